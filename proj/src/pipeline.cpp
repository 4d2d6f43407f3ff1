#include "vascond/pipeline.hpp"

#include "vascond/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace vascond {

namespace {

Eigen::VectorXd restrict_nodes(const Eigen::VectorXd& global, const Subdomain& sd) {
  Eigen::VectorXd local(sd.size());
  for (int i = 0; i < sd.size(); ++i) local[i] = global[sd.to_global[i]];
  return local;
}

void require_finite(const Eigen::VectorXd& v, long step, const char* field) {
  if (!v.allFinite()) throw NumericalAbort(step, field, "non-finite value");
}

}  // namespace

Eigen::VectorXd Snapshot::speed() const {
  return (u[0].array().square() + u[1].array().square() + u[2].array().square()).sqrt().matrix();
}

Problem prepare_problem(const SimulationConfig& config) {
  CompartmentTable table = config.compartment_path.empty()
                               ? CompartmentTable::defaults()
                               : CompartmentTable::from_file(config.compartment_path);
  TetMesh mesh = config.mesh_path.empty() ? generate_synthetic_vessel(config.geometry, table)
                                          : load_mesh(config.mesh_path, table);
  if (mesh.artery().tets.empty()) throw InputError("mesh has no blood vessel tets");
  if (mesh.tissue().tets.empty()) throw InputError("mesh has no tissue tets");
  BoundarySurface surface = extract_boundary(mesh);
  Eigen::VectorXd lambda = compute_lambda(mesh, surface, table);
  return Problem{std::move(mesh), std::move(surface), std::move(table), std::move(lambda)};
}

SupportSphere enclosing_sphere(const TetMesh& mesh) {
  const Subdomain& art = mesh.artery();
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
  Vec3 hi = -lo;
  for (int v : art.to_global) {
    lo = lo.cwiseMin(mesh.node(v));
    hi = hi.cwiseMax(mesh.node(v));
  }
  SupportSphere s;
  s.center = 0.5 * (lo + hi);
  for (int v : art.to_global) s.radius = std::max(s.radius, (mesh.node(v) - s.center).norm());
  s.radius *= 1.0 + 1e-9;
  s.radius += 1e-12;
  return s;
}

SimulationResult run_simulation(const SimulationConfig& config) {
  config.validate();
  return run_simulation(config, prepare_problem(config));
}

SimulationResult run_simulation(const SimulationConfig& config, const Problem& problem,
                                const StepObserver& observer) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  Eigen::setNbThreads(config.threads);

  const TetMesh& mesh = problem.mesh;
  const BoundarySurface& surface = problem.surface;
  const Subdomain& art = mesh.artery();
  const Subdomain& tis = mesh.tissue();
  const FlowParams& flow = config.flow;
  const double dt = flow.dt;
  const double tol = config.solver_tol;

  SimulationResult result;
  RunInfo& info = result.info;
  info.nodes = mesh.num_nodes();
  info.tets = mesh.num_tets();
  info.artery_nodes = art.size();
  info.tissue_nodes = tis.size();
  info.boundary_area = surface.total_area;

  PulseSpec pulse = config.pulse;
  if (config.auto_sphere) pulse.spheres = {enclosing_sphere(mesh)};
  pulse.normalize();

  // Arterial operators.
  const int n = art.size();
  info.zeta = compute_zeta(flow, surface.total_area);
  info.nu_bar = compute_nu_bar(flow, surface.total_area);
  const Eigen::VectorXd lambda_art = restrict_nodes(problem.lambda, art);
  const Eigen::VectorXd boundary_coeff =
      config.boundary_model == BoundaryModel::Robin
          ? Eigen::VectorXd(info.zeta * lambda_art)
          : Eigen::VectorXd(lambda_art / (info.zeta * info.nu_bar * info.nu_bar));
  const PressureOperator pressure(mesh, surface, art, boundary_coeff, dt, tol);
  const std::vector<char> wall = boundary_mask(surface, art);
  const VelocityOperator velocity(mesh, art, flow.density, wall, tol);
  const HelmholtzFilter leray(mesh, art, filter_length(mesh, Region::Artery, flow.leray_epsilon), tol);
  const HelmholtzFilter smooth(mesh, art, filter_length(mesh, Region::Artery, flow.viscosity_epsilon), tol);

  std::vector<Vec3> art_points(n);
  std::vector<char> in_support(n);
  for (int i = 0; i < n; ++i) {
    art_points[i] = mesh.node(art.to_global[i]);
    in_support[i] = pulse.in_support(art_points[i]) ? 1 : 0;
  }
  const auto boundary_pulse = [&](double t) {
    const double value = pulse.waveform(t);
    Eigen::VectorXd pb = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (in_support[i]) pb[i] = value;
    }
    return pb;
  };

  // Tissue operators.
  info.varsigma = compute_varsigma(flow);
  info.v_max = mesh.max_volume(Region::Tissue);
  const Eigen::VectorXd lambda_tis = restrict_nodes(problem.lambda, tis);
  const Eigen::VectorXd absorption =
      compute_epsilon(info.varsigma, lambda_tis, config.diffusion.theta,
                      config.diffusion.arteriole_length, info.v_max, config.diffusion.absorption);
  const ConcentrationSolver concentration(mesh, info.varsigma * lambda_tis, absorption, dt, tol,
                                          config.diffusion.lumped_mass);

  const double p_dia = config.diastolic_pressure();
  const double p_pulse = pulse.pulse_pressure;
  if (config.diffusion.kappa > 0.0) {
    info.kappa = config.diffusion.kappa;
  } else {
    const Eigen::VectorXd full = Eigen::VectorXd::Constant(n, p_dia + 1.0);
    info.kappa = calibrate_kappa(concentration, mesh, surface,
                                 source_shape(mesh, surface, full, problem.lambda, p_dia, 1.0));
  }

  const Eigen::VectorXd background = nodal_background_conductivity(mesh, problem.table);

  // Initial state: diastolic offset on the wall, fluid at rest, no blood in tissue.
  Eigen::VectorXd p1 = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (wall[i]) p1[i] = p_dia;
  }
  Eigen::VectorXd p2 = p1;
  Eigen::VectorXd pb1 = boundary_pulse(-dt), pb2 = boundary_pulse(-2.0 * dt);
  VectorField u = VectorField::zero(n);
  Eigen::VectorXd mu = Eigen::VectorXd::Constant(n, config.viscosity.mu0);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(tis.size());

  const std::vector<long> record = config.snapshot_steps();
  std::size_t next_record = 0;
  const long steps = config.total_steps();
  result.lapse.snapshots.reserve(record.size());

  for (long k = 1; k <= steps; ++k) {
    const double t = k * dt;
    const char* stage = "pressure";
    try {
      const Eigen::VectorXd pb0 = boundary_pulse(t);
      const VectorField u_smooth = leray.apply(u);
      const Eigen::VectorXd d = assemble_ppe_rhs(velocity.cache(), n, u, u_smooth, mu, flow.density);
      const Eigen::VectorXd p = pressure.step(d, p1, p2, pb0, pb1, pb2);
      require_finite(p, k, "pressure");

      stage = "viscosity";
      const Eigen::VectorXd shear = smooth.apply(shear_rate(mesh, art, u)).cwiseMax(0.0);
      const Eigen::VectorXd mu_new = carreau_yasuda(shear, config.viscosity);
      require_finite(mu_new, k, "viscosity");

      stage = "velocity";
      u = velocity.step(u, u_smooth, mu_new, p, flow.gravity, dt, config.time_scheme);
      for (int l = 0; l < 3; ++l) require_finite(u.comp[l], k, "velocity");
      mu = mu_new;

      stage = "concentration";
      Eigen::VectorXd w = Eigen::VectorXd::Zero(tis.size());
      if (p_pulse > 0.0) {
        w = info.kappa * assemble_source(mesh, surface,
                                         source_shape(mesh, surface, p, problem.lambda, p_dia, p_pulse));
      }
      ClampReport clamp;
      c = concentration.step(c, w, &clamp);
      require_finite(c, k, "concentration");
      info.clamp_events += clamp.count;
      info.max_clamp_fraction =
          std::max(info.max_clamp_fraction, static_cast<double>(clamp.count) / tis.size());
      info.max_clamp_excursion = std::max(info.max_clamp_excursion, clamp.excursion);

      p2 = p1;
      p1 = p;
      pb2 = pb1;
      pb1 = pb0;
    } catch (const SolverError& e) {
      throw NumericalAbort(k, stage, e.what());
    }

    if (next_record < record.size() && record[next_record] == k) {
      Snapshot snap;
      snap.step = k;
      snap.time = t;
      const int nn = mesh.num_nodes();
      snap.p = Eigen::VectorXd::Zero(nn);
      snap.mu = Eigen::VectorXd::Zero(nn);
      for (int l = 0; l < 3; ++l) snap.u[l] = Eigen::VectorXd::Zero(nn);
      for (int i = 0; i < n; ++i) {
        const int g = art.to_global[i];
        snap.p[g] = p1[i];
        snap.mu[g] = mu[i];
        for (int l = 0; l < 3; ++l) snap.u[l][g] = u.comp[l][i];
      }
      snap.c = Eigen::VectorXd::Ones(nn);
      for (int i = 0; i < tis.size(); ++i) snap.c[tis.to_global[i]] = c[i];
      snap.sigma = build_atlas(mesh, c, background, config.archie);
      result.lapse.snapshots.push_back(std::move(snap));
      ++next_record;
    }
    if (observer) observer(k, t);
  }

  info.steps = steps;
  result.final_c = c;
  info.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// ---------------------------------------------------------------------------

double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("quantile of an empty series");
  if (!(q > 0.0 && q <= 1.0)) throw InputError("quantile level must lie in (0, 1]");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(std::floor(q * n)), n - 1);
  return values[idx];
}

FieldStats series_stats(const std::vector<Eigen::VectorXd>& series, double quantile) {
  if (series.size() < 2) throw InputError("summary needs at least two snapshots");
  const Eigen::Index nodes = series.front().size();
  const double count = static_cast<double>(series.size());
  FieldStats s;
  s.mean = Eigen::VectorXd::Zero(nodes);
  for (const auto& v : series) {
    if (v.size() != nodes) throw InputError("summary: inconsistent node counts");
    s.mean += v;
  }
  s.mean /= count;
  s.std = Eigen::VectorXd::Zero(nodes);
  for (const auto& v : series) s.std += (v - s.mean).array().square().matrix();
  s.std = (s.std / count).cwiseSqrt();
  s.peak.resize(nodes);
  std::vector<double> column(series.size());
  for (Eigen::Index i = 0; i < nodes; ++i) {
    for (std::size_t k = 0; k < series.size(); ++k) column[k] = series[k][i];
    s.peak[i] = nearest_rank_quantile(column, quantile);
  }
  return s;
}

SummaryStats summarize(const TimeLapse& lapse) {
  if (lapse.size() < 2) throw InputError("summary needs at least two snapshots");
  std::vector<Eigen::VectorXd> p, speed, mu, c, sigma;
  for (const auto& s : lapse.snapshots) {
    p.push_back(s.p);
    speed.push_back(s.speed());
    mu.push_back(s.mu);
    c.push_back(s.c);
    sigma.push_back(s.sigma);
  }
  return {series_stats(p), series_stats(speed), series_stats(mu), series_stats(c),
          series_stats(sigma)};
}

}  // namespace vascond
