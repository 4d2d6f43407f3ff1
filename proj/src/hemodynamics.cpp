#include "vascond/hemodynamics.hpp"

#include "vascond/error.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <cmath>
#include <numbers>

namespace vascond {

namespace {

using Mat3 = Eigen::Matrix3d;

// G(l, h) = d u^l / d x_h on one element.
Mat3 velocity_gradient(const ElementGeometry& g, const std::array<int, 4>& ids,
                       const VectorField& u) {
  Mat3 grad = Mat3::Zero();
  for (int a = 0; a < 4; ++a) {
    for (int l = 0; l < 3; ++l) grad.row(l) += u.comp[l][ids[a]] * g.grad[a].transpose();
  }
  return grad;
}

Vec3 scalar_gradient(const ElementGeometry& g, const std::array<int, 4>& ids,
                     const Eigen::VectorXd& s) {
  Vec3 grad = Vec3::Zero();
  for (int a = 0; a < 4; ++a) grad += s[ids[a]] * g.grad[a];
  return grad;
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string(name) + " must be positive and finite");
  }
}

// Golden-section search for an extremum of f on [lo, hi]; sign = +1 for max.
double refine_extremum(const std::function<double(double)>& f, double lo, double hi, double sign) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - r * (hi - lo), x2 = lo + r * (hi - lo);
  double f1 = sign * f(x1), f2 = sign * f(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    if (f1 > f2) {
      hi = x2, x2 = x1, f2 = f1;
      x1 = hi - r * (hi - lo);
      f1 = sign * f(x1);
    } else {
      lo = x1, x1 = x2, f1 = f2;
      x2 = lo + r * (hi - lo);
      f2 = sign * f(x2);
    }
  }
  return sign * std::max({f1, f2, sign * f(lo), sign * f(hi)});
}

}  // namespace

// ---------------------------------------------------------------------------

void ViscosityParams::validate() const {
  require_positive(mu_inf, "viscosity.mu_inf");
  require_positive(lambda, "viscosity.lambda");
  require_positive(a, "viscosity.a");
  if (!(mu0 > mu_inf)) throw ConfigError("viscosity.mu0 must exceed viscosity.mu_inf");
  if (!(n > 0.0 && n < 1.0)) throw ConfigError("viscosity.n must lie in (0, 1)");
}

double carreau_yasuda(double shear_rate, const ViscosityParams& p) {
  const double x = p.lambda * std::abs(shear_rate);
  return p.mu_inf + (p.mu0 - p.mu_inf) * std::pow(1.0 + std::pow(x, p.a), (p.n - 1.0) / p.a);
}

Eigen::VectorXd carreau_yasuda(const Eigen::VectorXd& shear_rate, const ViscosityParams& p) {
  return shear_rate.unaryExpr([&p](double g) { return carreau_yasuda(g, p); });
}

// ---------------------------------------------------------------------------

double blackman_harris(double t) {
  constexpr double a0 = 0.35875, a1 = 0.48829, a2 = 0.14128, a3 = 0.01168;
  const double x = 2.0 * std::numbers::pi * (t - std::floor(t));
  return a0 - a1 * std::cos(x) + a2 * std::cos(2.0 * x) - a3 * std::cos(3.0 * x);
}

void PulseSpec::validate() const {
  for (int i = 0; i < 3; ++i) {
    require_positive(weights[i], "pulse.weights");
    if (!(durations[i] > 0.0 && durations[i] <= 1.0)) {
      throw ConfigError("pulse.durations must lie in (0, 1] (fractions of the cycle)");
    }
    if (!(starts[i] >= 0.0 && starts[i] < 1.0)) throw ConfigError("pulse.starts must lie in [0, 1)");
  }
  require_positive(cycle, "pulse cycle length");
  if (!(pulse_pressure >= 0.0)) throw ConfigError("pulse.pulse_pressure must be >= 0");
  for (const auto& s : spheres) require_positive(s.radius, "pulse sphere radius");
}

double PulseSpec::waveform(double t) const {
  const double phase = t / cycle - std::floor(t / cycle);
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    double s = phase - starts[i];
    s = (s - std::floor(s)) / durations[i];
    if (s < 1.0) sum += weights[i] * blackman_harris(s);
  }
  return amplitude * sum;
}

std::pair<double, double> waveform_range(const PulseSpec& spec) {
  PulseSpec unit = spec;
  unit.amplitude = 1.0;
  unit.cycle = 1.0;
  const auto f = [&unit](double t) { return unit.waveform(t); };
  constexpr int kSamples = 20000;
  int imin = 0, imax = 0;
  double vmin = f(0.0), vmax = vmin;
  for (int i = 1; i < kSamples; ++i) {
    const double v = f(static_cast<double>(i) / kSamples);
    if (v < vmin) vmin = v, imin = i;
    if (v > vmax) vmax = v, imax = i;
  }
  const double dt = 1.0 / kSamples;
  vmin = std::min(vmin, refine_extremum(f, (imin - 1) * dt, (imin + 1) * dt, -1.0));
  vmax = std::max(vmax, refine_extremum(f, (imax - 1) * dt, (imax + 1) * dt, +1.0));
  return {vmin, vmax};
}

void PulseSpec::normalize() {
  const auto [lo, hi] = waveform_range(*this);
  if (!(hi > lo)) throw ConfigError("pulse waveform is constant; cannot normalize");
  amplitude = pulse_pressure / (hi - lo);
}

bool PulseSpec::in_support(const Vec3& x) const {
  for (const auto& s : spheres) {
    if ((x - s.center).norm() <= s.radius) return true;
  }
  return false;
}

double pulse_pressure(const Vec3& x, double t, const PulseSpec& spec) {
  return spec.in_support(x) ? spec.waveform(t) : 0.0;
}

// ---------------------------------------------------------------------------

double FlowParams::arteriole_area() const {
  return std::numbers::pi * 0.25 * arteriole_diameter * arteriole_diameter;
}

void FlowParams::validate() const {
  require_positive(density, "flow.density");
  require_positive(viscosity, "flow.viscosity");
  require_positive(total_flow, "flow.total_flow");
  require_positive(reference_pressure, "flow.reference_pressure");
  require_positive(arteriole_diameter, "flow.arteriole_diameter");
  require_positive(distension, "flow.distension");
  require_positive(reference_volume, "flow.reference_volume");
  require_positive(dt, "time.dt");
  if (!gravity.allFinite()) throw ConfigError("flow.gravity must be finite");
  if (!(leray_epsilon >= 0.0) || !(viscosity_epsilon >= 0.0)) {
    throw ConfigError("smoothing factors must be >= 0");
  }
}

double compute_zeta(const FlowParams& p, double boundary_area) {
  const double denom = boundary_area * p.arteriole_area() * p.reference_pressure;
  if (!(denom > 0.0)) throw InputError("zeta: boundary area and reference pressure must be positive");
  return 8.0 * std::numbers::pi * p.viscosity * p.total_flow / denom;
}

double compute_nu_bar(const FlowParams& p, double boundary_area) {
  const double b2 = p.distension * p.distension;
  const double denom = 8.0 * std::numbers::pi * p.viscosity * b2 * p.reference_volume;
  if (!(denom > 0.0)) throw InputError("nu_bar: zero denominator");
  return (1.0 + b2) * boundary_area * p.arteriole_area() * p.reference_pressure / denom;
}

// ---------------------------------------------------------------------------

ElementCache::ElementCache(const TetMesh& mesh, const Subdomain& sd) {
  geom.reserve(sd.tets.size());
  ids.reserve(sd.tets.size());
  for (int t : sd.tets) {
    geom.push_back(element_gradients(mesh, t));
    const Tet& k = mesh.tet(t);
    ids.push_back({sd.to_local[k[0]], sd.to_local[k[1]], sd.to_local[k[2]], sd.to_local[k[3]]});
  }
}

Eigen::VectorXd shear_rate(const TetMesh& mesh, const Subdomain& sd, const VectorField& u) {
  const ElementCache cache(mesh, sd);
  const int n = sd.size();
  if (u.size() != n) throw InputError("shear_rate: velocity size does not match the subdomain");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n), weight = Eigen::VectorXd::Zero(n);
  for (int e = 0; e < cache.size(); ++e) {
    const Mat3 g = velocity_gradient(cache.geom[e], cache.ids[e], u);
    const Mat3 s = g + g.transpose();
    const double rate = std::sqrt(0.5 * s.squaredNorm());
    const double v = cache.geom[e].volume;
    for (int node : cache.ids[e]) {
      sum[node] += v * rate;
      weight[node] += v;
    }
  }
  return sum.cwiseQuotient(weight);
}

double filter_length(const TetMesh& mesh, Region region, double factor) {
  return factor * mesh.mean_edge_length(region);
}

HelmholtzFilter::HelmholtzFilter(const TetMesh& mesh, const Subdomain& sd, double length,
                                 double tol)
    : length_(length) {
  if (!(length >= 0.0)) throw InputError("smoothing length must be >= 0");
  if (length == 0.0) return;
  mass_ = assemble_mass(mesh, sd, 1.0);
  solver_ = SpdSolver(mass_ + assemble_stiffness(mesh, sd, length * length), tol);
}

Eigen::VectorXd HelmholtzFilter::apply(const Eigen::VectorXd& x) const {
  if (length_ == 0.0) return x;
  return solver_.solve(mass_ * x);
}

VectorField HelmholtzFilter::apply(const VectorField& u) const {
  VectorField out = u;
  for (int l = 0; l < 3; ++l) out.comp[l] = apply(u.comp[l]);
  return out;
}

Eigen::VectorXd assemble_ppe_rhs(const ElementCache& cache, int n, const VectorField& u,
                                 const VectorField& u_smooth, const Eigen::VectorXd& mu,
                                 double density) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  for (int e = 0; e < cache.size(); ++e) {
    const auto& g = cache.geom[e];
    const auto& ids = cache.ids[e];
    const Mat3 grad_u = velocity_gradient(g, ids, u);
    const Vec3 grad_mu = scalar_gradient(g, ids, mu);
    Vec3 transport = Vec3::Zero();
    for (int a = 0; a < 4; ++a) {
      for (int l = 0; l < 3; ++l) transport[l] += 0.25 * u_smooth.comp[l][ids[a]];
    }
    const Vec3 flux = 2.0 * grad_u * grad_mu - density * grad_u * transport;
    for (int a = 0; a < 4; ++a) d[ids[a]] += g.volume * g.grad[a].dot(flux);
  }
  return d;
}

// ---------------------------------------------------------------------------

PressureOperator::PressureOperator(const TetMesh& mesh, const BoundarySurface& surface,
                                   const Subdomain& sd, const Eigen::VectorXd& boundary_coeff,
                                   double dt, double tol)
    : dt_(dt),
      stiffness_(assemble_stiffness(mesh, sd, 1.0)),
      boundary_mass_(assemble_boundary_mass(mesh, surface, sd, boundary_coeff)),
      solver_(stiffness_.scaled(dt * dt) + boundary_mass_, tol) {}

Eigen::VectorXd PressureOperator::step(const Eigen::VectorXd& d, const Eigen::VectorXd& p1,
                                       const Eigen::VectorXd& p2, const Eigen::VectorXd& pb0,
                                       const Eigen::VectorXd& pb1,
                                       const Eigen::VectorXd& pb2) const {
  const Eigen::VectorXd history = 2.0 * p1 - p2 + pb0 - 2.0 * pb1 + pb2;
  Eigen::VectorXd rhs = boundary_mass_ * history;
  rhs += (dt_ * dt_) * d;
  return solver_.solve(rhs);
}

// ---------------------------------------------------------------------------

std::vector<char> boundary_mask(const BoundarySurface& surface, const Subdomain& sd) {
  std::vector<char> mask(sd.size(), 0);
  for (const Tri& t : surface.triangles) {
    for (int v : t) {
      if (sd.to_local[v] >= 0) mask[sd.to_local[v]] = 1;
    }
  }
  return mask;
}

VelocityOperator::VelocityOperator(const TetMesh& mesh, const Subdomain& sd, double density,
                                   std::vector<char> fixed, double tol)
    : cache_(mesh, sd), density_(density), n_(sd.size()), fixed_(std::move(fixed)) {
  if (static_cast<int>(fixed_.size()) != n_) throw InputError("velocity: fixed mask size mismatch");
  for (int i = 0; i < n_; ++i) {
    if (!fixed_[i]) free_.push_back(i);
  }
  mass_ = assemble_mass(mesh, sd, density);
  solver_ = SpdSolver(restrict_to(mass_, free_), tol);
}

VectorField VelocityOperator::pressure_term(const Eigen::VectorXd& p) const {
  VectorField r = VectorField::zero(n_, "N");
  for (int e = 0; e < cache_.size(); ++e) {
    const auto& g = cache_.geom[e];
    const Vec3 gp = scalar_gradient(g, cache_.ids[e], p) * (0.25 * g.volume);
    for (int b : cache_.ids[e]) {
      for (int l = 0; l < 3; ++l) r.comp[l][b] += gp[l];
    }
  }
  return r;
}

VectorField VelocityOperator::convection_term(const VectorField& u_smooth,
                                              const VectorField& u) const {
  VectorField r = VectorField::zero(n_, "N");
  for (int e = 0; e < cache_.size(); ++e) {
    const auto& g = cache_.geom[e];
    const auto& ids = cache_.ids[e];
    const Mat3 grad_u = velocity_gradient(g, ids, u);
    Vec3 total = Vec3::Zero();
    for (int m = 0; m < 4; ++m) {
      for (int k = 0; k < 3; ++k) total[k] += u_smooth.comp[k][ids[m]];
    }
    for (int b = 0; b < 4; ++b) {
      // int u_s psi_b with the P1 mass weights (1 + delta_bm) V / 20.
      Vec3 w;
      for (int k = 0; k < 3; ++k) w[k] = (total[k] + u_smooth.comp[k][ids[b]]) * g.volume / 20.0;
      const Vec3 contrib = density_ * grad_u * w;
      for (int l = 0; l < 3; ++l) r.comp[l][ids[b]] += contrib[l];
    }
  }
  return r;
}

VectorField VelocityOperator::curl_viscous_term(const Eigen::VectorXd& mu,
                                                const VectorField& u) const {
  VectorField r = VectorField::zero(n_, "N");
  for (int e = 0; e < cache_.size(); ++e) {
    const auto& g = cache_.geom[e];
    const auto& ids = cache_.ids[e];
    const Mat3 grad_u = velocity_gradient(g, ids, u);
    const double mean_mu = 0.25 * (mu[ids[0]] + mu[ids[1]] + mu[ids[2]] + mu[ids[3]]);
    const Mat3 rot = (grad_u - grad_u.transpose()) * (mean_mu * g.volume);
    for (int b = 0; b < 4; ++b) {
      const Vec3 contrib = rot * g.grad[b];
      for (int l = 0; l < 3; ++l) r.comp[l][ids[b]] += contrib[l];
    }
  }
  return r;
}

VectorField VelocityOperator::gradient_viscous_term(const Eigen::VectorXd& mu,
                                                    const VectorField& u) const {
  VectorField r = VectorField::zero(n_, "N");
  for (int e = 0; e < cache_.size(); ++e) {
    const auto& g = cache_.geom[e];
    const auto& ids = cache_.ids[e];
    const Mat3 grad_u = velocity_gradient(g, ids, u);
    const Vec3 contrib = -2.0 * (grad_u.transpose() * scalar_gradient(g, ids, mu)) * (0.25 * g.volume);
    for (int b : ids) {
      for (int l = 0; l < 3; ++l) r.comp[l][b] += contrib[l];
    }
  }
  return r;
}

VectorField VelocityOperator::body_term(const Vec3& gravity) const {
  VectorField r = VectorField::zero(n_, "N");
  for (int e = 0; e < cache_.size(); ++e) {
    const Vec3 contrib = -density_ * gravity * (0.25 * cache_.geom[e].volume);
    for (int b : cache_.ids[e]) {
      for (int l = 0; l < 3; ++l) r.comp[l][b] += contrib[l];
    }
  }
  return r;
}

SparseMatrix VelocityOperator::convection_matrix(const VectorField& u_smooth) const {
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(16 * cache_.size());
  for (int e = 0; e < cache_.size(); ++e) {
    const auto& g = cache_.geom[e];
    const auto& ids = cache_.ids[e];
    Vec3 total = Vec3::Zero();
    for (int m = 0; m < 4; ++m) {
      for (int k = 0; k < 3; ++k) total[k] += u_smooth.comp[k][ids[m]];
    }
    for (int b = 0; b < 4; ++b) {
      Vec3 w;
      for (int k = 0; k < 3; ++k) w[k] = (total[k] + u_smooth.comp[k][ids[b]]) * g.volume / 20.0;
      for (int j = 0; j < 4; ++j) entries.emplace_back(ids[b], ids[j], density_ * g.grad[j].dot(w));
    }
  }
  SparseMatrix h(n_, n_);
  h.setFromTriplets(entries.begin(), entries.end());
  return h;
}

SparseMatrix VelocityOperator::curl_viscous_matrix(const Eigen::VectorXd& mu) const {
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(144 * cache_.size());
  for (int e = 0; e < cache_.size(); ++e) {
    const auto& g = cache_.geom[e];
    const auto& ids = cache_.ids[e];
    const double s = 0.25 * (mu[ids[0]] + mu[ids[1]] + mu[ids[2]] + mu[ids[3]]) * g.volume;
    for (int b = 0; b < 4; ++b) {
      for (int j = 0; j < 4; ++j) {
        const double lap = g.grad[j].dot(g.grad[b]);
        for (int l = 0; l < 3; ++l) {
          for (int m = 0; m < 3; ++m) {
            const double v = (l == m ? lap : 0.0) - g.grad[j][l] * g.grad[b][m];
            if (v != 0.0) entries.emplace_back(l * n_ + ids[b], m * n_ + ids[j], s * v);
          }
        }
      }
    }
  }
  SparseMatrix a(3 * n_, 3 * n_);
  a.setFromTriplets(entries.begin(), entries.end());
  return a;
}

VectorField VelocityOperator::step(const VectorField& u, const VectorField& u_smooth,
                                   const Eigen::VectorXd& mu, const Eigen::VectorXd& p,
                                   const Vec3& gravity, double dt, TimeScheme scheme) const {
  if (u.size() != n_ || u_smooth.size() != n_ || mu.size() != n_ || p.size() != n_) {
    throw InputError("velocity step: field size mismatch");
  }
  return scheme == TimeScheme::Explicit ? explicit_step(u, u_smooth, mu, p, gravity, dt)
                                        : semi_implicit_step(u, u_smooth, mu, p, gravity, dt);
}

VectorField VelocityOperator::semi_implicit_step(const VectorField& u, const VectorField& u_smooth,
                                                 const Eigen::VectorXd& mu,
                                                 const Eigen::VectorXd& p, const Vec3& gravity,
                                                 double dt) const {
  const int nf = static_cast<int>(free_.size());
  VectorField next = VectorField::zero(n_, u.unit);
  next.time = u.time + dt;
  if (nf == 0) return next;

  std::vector<int> local(n_, -1);
  for (int i = 0; i < nf; ++i) local[free_[i]] = i;

  // Unknowns ordered node-major (3 i + l) to keep the coupling blocks banded.
  std::vector<Eigen::Triplet<double>> entries;
  const SparseMatrix ch = mass_.matrix() + dt * convection_matrix(u_smooth);
  for (int col = 0; col < ch.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(ch, col); it; ++it) {
      const int r = local[it.row()], c = local[col];
      if (r < 0 || c < 0) continue;
      for (int l = 0; l < 3; ++l) entries.emplace_back(3 * r + l, 3 * c + l, it.value());
    }
  }
  const SparseMatrix visc = curl_viscous_matrix(mu);
  for (int col = 0; col < visc.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(visc, col); it; ++it) {
      const int r = local[it.row() % n_], c = local[col % n_];
      if (r < 0 || c < 0) continue;
      entries.emplace_back(3 * r + static_cast<int>(it.row()) / n_, 3 * c + col / n_,
                           dt * it.value());
    }
  }
  SparseMatrix a(3 * nf, 3 * nf);
  a.setFromTriplets(entries.begin(), entries.end());
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw SolverError("velocity: semi-implicit factorization failed");

  const VectorField q = pressure_term(p);
  const VectorField l2 = gradient_viscous_term(mu, u);
  const VectorField f = body_term(gravity);
  Eigen::VectorXd rhs(3 * nf);
  for (int l = 0; l < 3; ++l) {
    const Eigen::VectorXd cu = mass_.matrix() * u.comp[l];
    for (int i = 0; i < nf; ++i) {
      const int k = free_[i];
      rhs[3 * i + l] = cu[k] - dt * (q.comp[l][k] + l2.comp[l][k] + f.comp[l][k]);
    }
  }
  if (!rhs.allFinite()) throw SolverError("velocity: non-finite right-hand side");
  const Eigen::VectorXd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) throw SolverError("velocity: solve failed");
  const double res = (a * x - rhs).norm();
  if (res > 1e-8 * std::max(rhs.norm(), 1e-300)) {
    throw SolverError("velocity: semi-implicit residual " + std::to_string(res));
  }
  for (int i = 0; i < nf; ++i) {
    for (int l = 0; l < 3; ++l) next.comp[l][free_[i]] = x[3 * i + l];
  }
  return next;
}

TimeScheme parse_time_scheme(const std::string& name) {
  if (name == "explicit") return TimeScheme::Explicit;
  if (name == "semi-implicit") return TimeScheme::SemiImplicit;
  throw ConfigError("unknown time scheme '" + name + "' (expected explicit or semi-implicit)");
}

std::string to_string(TimeScheme scheme) {
  return scheme == TimeScheme::Explicit ? "explicit" : "semi-implicit";
}

VectorField VelocityOperator::explicit_step(const VectorField& u, const VectorField& u_smooth,
                                            const Eigen::VectorXd& mu, const Eigen::VectorXd& p,
                                            const Vec3& gravity, double dt) const {
  const VectorField q = pressure_term(p);
  const VectorField h = convection_term(u_smooth, u);
  const VectorField l1 = curl_viscous_term(mu, u);
  const VectorField l2 = gradient_viscous_term(mu, u);
  const VectorField f = body_term(gravity);

  VectorField next = VectorField::zero(n_, u.unit);
  next.time = u.time + dt;
  const int nf = static_cast<int>(free_.size());
  for (int l = 0; l < 3; ++l) {
    Eigen::VectorXd rhs(nf);
    for (int i = 0; i < nf; ++i) {
      const int k = free_[i];
      rhs[i] = -(q.comp[l][k] + h.comp[l][k] + l1.comp[l][k] + l2.comp[l][k] + f.comp[l][k]);
    }
    const Eigen::VectorXd accel = solver_.solve(rhs);
    for (int i = 0; i < nf; ++i) next.comp[l][free_[i]] = u.comp[l][free_[i]] + dt * accel[i];
  }
  return next;
}

}  // namespace vascond
