#include "vascond/microcirculation.hpp"

#include "vascond/error.hpp"

#include <cmath>
#include <numbers>

namespace vascond {

AbsorptionModel parse_absorption_model(const std::string& name) {
  if (name == "printed") return AbsorptionModel::Printed;
  if (name == "sphere") return AbsorptionModel::Sphere;
  throw ConfigError("unknown absorption model '" + name + "' (expected printed or sphere)");
}

std::string to_string(AbsorptionModel model) {
  return model == AbsorptionModel::Printed ? "printed" : "sphere";
}

void DiffusionParams::validate() const {
  if (!(theta > 0.0 && theta <= 1.0)) throw ConfigError("diffusion.theta must lie in (0, 1]");
  if (!(arteriole_length > 0.0)) throw ConfigError("diffusion.arteriole_length must be positive");
  if (!std::isfinite(kappa)) throw ConfigError("diffusion.kappa must be finite");
}

double compute_varsigma(const FlowParams& params) {
  return params.arteriole_area() * params.reference_pressure /
         (8.0 * std::numbers::pi * params.viscosity);
}

double compute_epsilon(double varsigma, double lambda, double theta, double length, double v_max,
                       AbsorptionModel model) {
  if (!(v_max > 0.0) || !(length > 0.0)) {
    throw InputError("absorption: element volume and arteriole length must be positive");
  }
  const double flux = varsigma * lambda * theta / length;
  if (model == AbsorptionModel::Printed) {
    return flux * std::cbrt(45.0 * std::numbers::pi / v_max);
  }
  const double radius = std::cbrt(3.0 * v_max / (4.0 * std::numbers::pi));
  return 3.0 * flux / radius;
}

Eigen::VectorXd compute_epsilon(double varsigma, const Eigen::VectorXd& lambda, double theta,
                                double length, double v_max, AbsorptionModel model) {
  const double unit = compute_epsilon(varsigma, 1.0, theta, length, v_max, model);
  return unit * lambda;
}

Eigen::VectorXd source_shape(const TetMesh& mesh, const BoundarySurface& surface,
                             const Eigen::VectorXd& p_artery, const Eigen::VectorXd& lambda,
                             double p_diastolic, double p_pulse) {
  const Subdomain& art = mesh.artery();
  const Subdomain& tis = mesh.tissue();
  if (p_artery.size() != art.size()) throw InputError("source: pressure size mismatch");
  if (lambda.size() != mesh.num_nodes()) throw InputError("source: lambda size mismatch");
  if (!(p_pulse > 0.0)) throw InputError("source: pulse pressure must be positive");
  Eigen::VectorXd s = Eigen::VectorXd::Zero(tis.size());
  for (int f = 0; f < surface.size(); ++f) {
    if (surface.tissue_tet[f] < 0) continue;
    for (int v : surface.triangles[f]) {
      const int a = art.to_local[v], t = tis.to_local[v];
      if (a < 0 || t < 0) continue;
      s[t] = lambda[v] * std::max(p_artery[a] - p_diastolic, 0.0) / p_pulse;
    }
  }
  return s;
}

Eigen::VectorXd assemble_source(const TetMesh& mesh, const BoundarySurface& surface,
                                const Eigen::VectorXd& s) {
  const Subdomain& tis = mesh.tissue();
  if (s.size() != tis.size()) throw InputError("source: shape size mismatch");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(tis.size());
  for (int f = 0; f < surface.size(); ++f) {
    if (surface.tissue_tet[f] < 0) continue;
    std::array<int, 3> ids;
    for (int a = 0; a < 3; ++a) {
      ids[a] = tis.to_local[surface.triangles[f][a]];
      if (ids[a] < 0) throw InputError("source: interface node outside the tissue");
    }
    const double sum = s[ids[0]] + s[ids[1]] + s[ids[2]];
    // int s phi_a = A/12 (2 s_a + s_b + s_c)
    for (int a = 0; a < 3; ++a) w[ids[a]] += surface.areas[f] / 12.0 * (sum + s[ids[a]]);
  }
  return w;
}

ConcentrationSolver::ConcentrationSolver(const TetMesh& mesh, const Eigen::VectorXd& diffusivity,
                                         const Eigen::VectorXd& absorption, double dt, double tol,
                                         bool lumped)
    : dt_(dt), tol_(tol) {
  if (!(dt > 0.0)) throw ConfigError("concentration: time step must be positive");
  const Subdomain& tis = mesh.tissue();
  if (tis.size() == 0) throw InputError("concentration: mesh has no tissue");
  mass_ = assemble_mass(mesh, tis, 1.0);
  diffusion_ = assemble_stiffness(mesh, tis, diffusivity);
  absorption_ = assemble_mass(mesh, tis, absorption);
  if (lumped) {
    mass_ = vascond::lumped(mass_);
    absorption_ = vascond::lumped(absorption_);
  }
  solver_ = SpdSolver(mass_ + (diffusion_ + absorption_).scaled(dt), tol);
}

Eigen::VectorXd ConcentrationSolver::advance(const Eigen::VectorXd& c,
                                             const Eigen::VectorXd& w) const {
  if (c.size() != size() || w.size() != size()) {
    throw InputError("concentration: field size mismatch");
  }
  return solver_.solve(mass_ * c + dt_ * w);
}

Eigen::VectorXd ConcentrationSolver::step(const Eigen::VectorXd& c, const Eigen::VectorXd& w,
                                          ClampReport* report) const {
  Eigen::VectorXd next = advance(c, w);
  ClampReport r;
  for (Eigen::Index i = 0; i < next.size(); ++i) {
    if (next[i] < 0.0 || next[i] > 1.0) {
      const double v = std::clamp(next[i], 0.0, 1.0);
      r.excursion = std::max(r.excursion, std::abs(next[i] - v));
      next[i] = v;
      ++r.count;
    }
  }
  if (report) *report = r;
  return next;
}

Eigen::VectorXd ConcentrationSolver::steady_state(const Eigen::VectorXd& w) const {
  return solve_spd(diffusion_ + absorption_, w, tol_);
}

double calibrate_kappa(const ConcentrationSolver& solver, const TetMesh& mesh,
                       const BoundarySurface& surface, const Eigen::VectorXd& shape) {
  const Eigen::VectorXd c = solver.steady_state(assemble_source(mesh, surface, shape));
  double peak = 0.0;
  const Subdomain& tis = mesh.tissue();
  for (int f = 0; f < surface.size(); ++f) {
    if (surface.tissue_tet[f] < 0) continue;
    for (int v : surface.triangles[f]) peak = std::max(peak, c[tis.to_local[v]]);
  }
  if (!(peak > 0.0)) throw InputError("concentration: source shape produces no response");
  return 1.0 / peak;
}

}  // namespace vascond
