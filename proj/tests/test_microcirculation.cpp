#include "support.hpp"

#include "vascond/error.hpp"
#include "vascond/microcirculation.hpp"

#include <doctest.h>

using namespace vascond;
using namespace vascond::test;

namespace {

Eigen::VectorXd restrict(const Eigen::VectorXd& global, const Subdomain& sd) {
  Eigen::VectorXd v(sd.size());
  for (int i = 0; i < sd.size(); ++i) v[i] = global[sd.to_global[i]];
  return v;
}

// Coefficients as the simulation builds them, on the tissue numbering.
struct TissueSetup {
  TetMesh mesh;
  BoundarySurface surface;
  Eigen::VectorXd lambda;      // all nodes
  Eigen::VectorXd diffusivity;  // tissue
  Eigen::VectorXd absorption;   // tissue

  explicit TissueSetup(TetMesh m) : mesh(std::move(m)), surface(extract_boundary(mesh)) {
    lambda = compute_lambda(mesh, surface, CompartmentTable::defaults());
    const double varsigma = compute_varsigma(FlowParams{});
    const Eigen::VectorXd lt = restrict(lambda, mesh.tissue());
    diffusivity = varsigma * lt;
    absorption = compute_epsilon(varsigma, lt, 0.7, 4e-4, mesh.max_volume(Region::Tissue));
  }
  ConcentrationSolver solver(double dt, bool lumped) const {
    return ConcentrationSolver(mesh, diffusivity, absorption, dt, 1e-13, lumped);
  }
  Eigen::VectorXd shape() const {
    const Eigen::VectorXd p = Eigen::VectorXd::Constant(mesh.artery().size(), 2.0);
    return source_shape(mesh, surface, p, lambda, 1.0, 1.0);
  }
};

Dense dense_lumped(const Dense& a) { return a.rowwise().sum().asDiagonal(); }

}  // namespace

TEST_CASE("diffusion and absorption coefficients match high-precision oracles") {
  const FlowParams f;
  const Real pi = boost::math::constants::pi<Real>();
  const Real aa = pi * Real(f.arteriole_diameter) * Real(f.arteriole_diameter) / 4;
  const Real varsigma = aa * Real(f.reference_pressure) / (8 * pi * Real(f.viscosity));
  CHECK(std::abs(compute_varsigma(f) / static_cast<double>(varsigma) - 1.0) < 1e-14);

  for (double v_max : {1e-13, 7.6e-13, 3e-12}) {
    for (double lambda : {0.4, 1.0, 2.3}) {
      const Real flux = Real(9.06e-6) * Real(lambda) * Real(0.7) / Real(4e-4);
      const Real printed = flux * cbrt(45 * pi / Real(v_max));
      const Real radius = cbrt(3 * Real(v_max) / (4 * pi));
      const Real sphere = 3 * flux / radius;
      CHECK(std::abs(compute_epsilon(9.06e-6, lambda, 0.7, 4e-4, v_max) / static_cast<double>(printed) - 1.0) < 1e-14);
      CHECK(std::abs(compute_epsilon(9.06e-6, lambda, 0.7, 4e-4, v_max, AbsorptionModel::Sphere) /
                         static_cast<double>(sphere) - 1.0) < 1e-14);
    }
  }
  const Eigen::VectorXd lam = Eigen::Vector3d(0.5, 1.0, 2.0);
  const Eigen::VectorXd eps = compute_epsilon(9.06e-6, lam, 0.7, 4e-4, 7.6e-13);
  CHECK(eps[2] == doctest::Approx(4.0 * eps[0]).epsilon(1e-15));
  CHECK_THROWS_AS(compute_epsilon(9.06e-6, 1.0, 0.7, 4e-4, 0.0), InputError);
  CHECK(parse_absorption_model("sphere") == AbsorptionModel::Sphere);
  CHECK(to_string(AbsorptionModel::Printed) == "printed");
  CHECK_THROWS_AS(parse_absorption_model("cube"), ConfigError);
  DiffusionParams bad;
  bad.theta = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("steady state and one step match dense solves on a four-tet tissue") {
  const TetMesh mesh = kuhn_cube(2, 1e-3);
  const Subdomain& tis = mesh.tissue();
  const int n = tis.size();
  std::mt19937 rng(41);
  const Eigen::VectorXd d = random_vector(n, rng, 1e-6, 2e-5);
  const Eigen::VectorXd e = random_vector(n, rng, 100.0, 2000.0);
  const Eigen::VectorXd w = random_vector(n, rng, 0.0, 1e-9);
  const Eigen::VectorXd c0 = random_vector(n, rng, 0.0, 1.0);
  const double dt = 1e-2;

  const Dense u = dense_assemble(mesh, tis, [](const Vec3& x, int, const Basis& b, int i, int j) {
    return b.phi(i, x) * b.phi(j, x);
  });
  const Dense r = dense_assemble(mesh, tis, [&](const Vec3& x, int t, const Basis& b, int i, int j) {
    return interp(mesh, tis, t, b, d, x) * b.grad(i).dot(b.grad(j));
  });
  const Dense tt = dense_assemble(mesh, tis, [&](const Vec3& x, int t, const Basis& b, int i, int j) {
    return interp(mesh, tis, t, b, e, x) * b.phi(i, x) * b.phi(j, x);
  });

  for (bool lumped : {false, true}) {
    CAPTURE(lumped);
    const ConcentrationSolver s(mesh, d, e, dt, 1e-14, lumped);
    const Dense um = lumped ? dense_lumped(u) : u;
    const Dense tm = lumped ? dense_lumped(tt) : tt;
    CHECK(rel_diff(to_dense(s.mass().matrix()), um) < 1e-12);
    CHECK(rel_diff(to_dense(s.diffusion().matrix()), r) < 1e-12);
    CHECK(rel_diff(to_dense(s.absorption().matrix()), tm) < 1e-12);
    CHECK(rel_diff(s.steady_state(w), Eigen::VectorXd((r + tm).lu().solve(w))) < 1e-10);
    const Eigen::VectorXd next = (um + dt * r + dt * tm).lu().solve(um * c0 + dt * w);
    CHECK(rel_diff(s.advance(c0, w), next) < 1e-10);
  }
}

TEST_CASE("energy decays in the mass norm without a source") {
  const TissueSetup s(generate_synthetic_vessel(small_tube()));
  std::mt19937 rng(3);
  for (bool lumped : {false, true}) {
    for (double dt : {1e-3, 1e-2, 1e-1}) {
      CAPTURE(lumped);
      CAPTURE(dt);
      const ConcentrationSolver solver = s.solver(dt, lumped);
      const SparseMatrix& u = solver.mass().matrix();
      Eigen::VectorXd c = random_vector(solver.size(), rng, -1.0, 1.0);
      const Eigen::VectorXd zero = Eigen::VectorXd::Zero(solver.size());
      double energy = c.dot(u * c);
      for (int k = 0; k < 50; ++k) {
        c = solver.advance(c, zero);
        const double next = c.dot(u * c);
        CHECK(next <= energy * (1.0 + 1e-12));
        energy = next;
      }
    }
  }
}

TEST_CASE("discrete balance: storage plus absorption equals injected source") {
  const TissueSetup s(generate_synthetic_vessel(small_tube()));
  for (bool lumped : {false, true}) {
    CAPTURE(lumped);
    const double dt = 1e-2;
    const ConcentrationSolver solver = s.solver(dt, lumped);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(solver.size());
    const Eigen::VectorXd w = 0.05 * assemble_source(s.mesh, s.surface, s.shape());
    Eigen::VectorXd c = Eigen::VectorXd::Zero(solver.size());
    for (int k = 0; k < 20; ++k) {
      const Eigen::VectorXd next = solver.advance(c, w);
      const double storage = ones.dot(solver.mass() * (next - c));
      const double absorbed = dt * ones.dot(solver.absorption() * next);
      const double injected = dt * ones.dot(w);
      CHECK(std::abs(storage + absorbed - injected) <= 1e-8 * injected);
      c = next;
    }
    // Diffusion neither creates nor destroys mass.
    CHECK(std::abs(ones.dot(solver.diffusion() * c)) <= 1e-10 * ones.dot(w));
  }
}

TEST_CASE("step clamps to [0, 1] and reports what it clamped") {
  const TissueSetup s(generate_synthetic_vessel(small_tube()));
  const ConcentrationSolver solver = s.solver(1e-6, false);
  std::mt19937 rng(8);
  const Eigen::VectorXd c = random_vector(solver.size(), rng, -0.5, 1.5);
  const Eigen::VectorXd w = Eigen::VectorXd::Zero(solver.size());
  const Eigen::VectorXd raw = solver.advance(c, w);
  int outside = 0;
  double excursion = 0.0;
  for (double v : raw) {
    if (v < 0.0 || v > 1.0) {
      ++outside;
      excursion = std::max(excursion, v < 0.0 ? -v : v - 1.0);
    }
  }
  REQUIRE(outside > 0);
  ClampReport report;
  const Eigen::VectorXd clamped = solver.step(c, w, &report);
  CHECK(report.count == outside);
  CHECK(report.excursion == excursion);
  CHECK(clamped == raw.cwiseMax(0.0).cwiseMin(1.0));
  CHECK(solver.step(c, w) == clamped);
}

TEST_CASE("source: rectified pressure on interface nodes and exact face integral") {
  const TissueSetup s(generate_synthetic_vessel(small_tube()));
  const TetMesh& mesh = s.mesh;
  const Subdomain& art = mesh.artery();
  const Subdomain& tis = mesh.tissue();
  std::mt19937 rng(12);
  const Eigen::VectorXd below = random_vector(art.size(), rng, 0.0, 9000.0);
  CHECK(source_shape(mesh, s.surface, below, s.lambda, 9000.0, 50.0).cwiseAbs().maxCoeff() == 0.0);

  const Eigen::VectorXd p = random_vector(art.size(), rng, 8000.0, 16000.0);
  const double p_dia = 10000.0, p_pulse = 6666.0;
  const Eigen::VectorXd shape = source_shape(mesh, s.surface, p, s.lambda, p_dia, p_pulse);
  std::vector<char> interface(tis.size(), 0);
  for (int f = 0; f < s.surface.size(); ++f) {
    if (s.surface.tissue_tet[f] < 0) continue;
    for (int v : s.surface.triangles[f]) interface[tis.to_local[v]] = 1;
  }
  for (int i = 0; i < tis.size(); ++i) {
    const int g = tis.to_global[i];
    const double expect = interface[i] ? s.lambda[g] * std::max(p[art.to_local[g]] - p_dia, 0.0) / p_pulse : 0.0;
    CHECK(shape[i] == doctest::Approx(expect).epsilon(1e-14));
  }

  Eigen::VectorXd oracle = Eigen::VectorXd::Zero(tis.size());
  double interface_area = 0.0;
  for (int f = 0; f < s.surface.size(); ++f) {
    if (s.surface.tissue_tet[f] < 0) continue;
    interface_area += s.surface.areas[f];
    const Tri& t = s.surface.triangles[f];
    const Vec3 a = mesh.node(t[0]), b = mesh.node(t[1]), c = mesh.node(t[2]);
    // Barycentric coordinates from the collapsed map used by tri_points.
    for (const auto& q : tri_points(a, b, c)) {
      Eigen::Matrix2d m;
      m << (b - a).dot(b - a), (b - a).dot(c - a), (c - a).dot(b - a), (c - a).dot(c - a);
      const Eigen::Vector2d st = m.inverse() * (Eigen::Vector2d((q.x - a).dot(b - a), (q.x - a).dot(c - a)));
      const double phi[3] = {1.0 - st[0] - st[1], st[0], st[1]};
      double sv = 0.0;
      for (int k = 0; k < 3; ++k) sv += phi[k] * shape[tis.to_local[t[k]]];
      for (int k = 0; k < 3; ++k) oracle[tis.to_local[t[k]]] += q.w * sv * phi[k];
    }
  }
  CHECK(rel_diff(assemble_source(mesh, s.surface, shape), oracle) < 1e-12);
  const Eigen::VectorXd unit = assemble_source(mesh, s.surface, Eigen::VectorXd::Ones(tis.size()));
  CHECK(unit.sum() == doctest::Approx(interface_area).epsilon(1e-13));
  CHECK(interface_area > 0.0);
}

TEST_CASE("calibrated source scaling puts the steady interface maximum at one") {
  const TissueSetup s(generate_synthetic_vessel(small_tube()));
  for (bool lumped : {false, true}) {
    const ConcentrationSolver solver = s.solver(1e-2, lumped);
    const Eigen::VectorXd shape = s.shape();
    const double kappa = calibrate_kappa(solver, s.mesh, s.surface, shape);
    const Eigen::VectorXd c = solver.steady_state(kappa * assemble_source(s.mesh, s.surface, shape));
    double peak = 0.0;
    for (int f = 0; f < s.surface.size(); ++f) {
      if (s.surface.tissue_tet[f] < 0) continue;
      for (int v : s.surface.triangles[f]) peak = std::max(peak, c[s.mesh.tissue().to_local[v]]);
    }
    CHECK(peak == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(c.maxCoeff() <= 1.0 + 1e-9);
  }
  const ConcentrationSolver solver = s.solver(1e-2, true);
  CHECK_THROWS_AS(calibrate_kappa(solver, s.mesh, s.surface, Eigen::VectorXd::Zero(solver.size())),
                  InputError);
}

TEST_CASE("lumping keeps the transient response nonnegative where the consistent mass does not") {
  const TissueSetup s(generate_synthetic_vessel(small_tube()));
  const Eigen::VectorXd shape = s.shape();
  double min_consistent = 0.0, min_lumped = 0.0;
  for (bool lumped : {false, true}) {
    const ConcentrationSolver solver = s.solver(1e-2, lumped);
    const double kappa = calibrate_kappa(solver, s.mesh, s.surface, shape);
    const Eigen::VectorXd w = kappa * assemble_source(s.mesh, s.surface, shape);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(solver.size());
    double lowest = 0.0;
    for (int k = 0; k < 30; ++k) {
      c = solver.advance(c, w);
      lowest = std::min(lowest, c.minCoeff());
    }
    (lumped ? min_lumped : min_consistent) = lowest;
    // Lumping only redistributes within rows, so row sums are unchanged.
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(solver.size());
    const SparseOperator u = assemble_mass(s.mesh, s.mesh.tissue(), 1.0);
    CHECK(ones.dot(solver.mass() * ones) == doctest::Approx(ones.dot(u * ones)).epsilon(1e-13));
  }
  MESSAGE("lowest concentration: consistent " << min_consistent << ", lumped " << min_lumped);
  CHECK(min_consistent < 0.0);
  CHECK(min_lumped >= -1e-12);
}
