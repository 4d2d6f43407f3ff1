#include "vascond/fem.hpp"

#include "vascond/error.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace vascond {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

// int phi_i phi_j phi_k over an element, divided by its measure: the barycentric
// monomial formula a!b!c!d! d! / (|a| + d)! with d the element dimension.
double tet_triple(int i, int j, int k) {
  if (i == j && j == k) return 1.0 / 20.0;
  if (i == j || j == k || i == k) return 1.0 / 60.0;
  return 1.0 / 120.0;
}

double tri_triple(int i, int j, int k) {
  if (i == j && j == k) return 1.0 / 10.0;
  if (i == j || j == k || i == k) return 1.0 / 30.0;
  return 1.0 / 60.0;
}

void check_coefficient(const Eigen::VectorXd& coeff, int expected, const char* what) {
  if (coeff.size() != expected) {
    throw InputError(std::string(what) + ": coefficient has " + std::to_string(coeff.size()) +
                     " entries, expected " + std::to_string(expected));
  }
  for (Eigen::Index i = 0; i < coeff.size(); ++i) {
    if (!std::isfinite(coeff[i])) throw InputError(std::string(what) + ": non-finite coefficient");
    if (coeff[i] < 0.0) throw InputError(std::string(what) + ": negative coefficient");
  }
}

std::array<int, 4> local_ids(const Tet& t, const Subdomain& sd) {
  return {sd.to_local[t[0]], sd.to_local[t[1]], sd.to_local[t[2]], sd.to_local[t[3]]};
}

SparseOperator from_triplets(int n, const Triplets& trips) {
  SparseMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return SparseOperator(std::move(m), true);
}

template <class Coeff>
SparseOperator stiffness_impl(const TetMesh& mesh, const Subdomain& sd, Coeff coeff) {
  Triplets trips;
  trips.reserve(sd.tets.size() * 16);
  for (int t : sd.tets) {
    const auto e = element_gradients(mesh, t);
    const auto ids = local_ids(mesh.tet(t), sd);
    double mean = 0.0;
    for (int a = 0; a < 4; ++a) mean += 0.25 * coeff(ids[a]);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        trips.emplace_back(ids[a], ids[b], mean * e.volume * e.grad[a].dot(e.grad[b]));
  }
  return from_triplets(sd.size(), trips);
}

template <class Coeff>
SparseOperator mass_impl(const TetMesh& mesh, const Subdomain& sd, Coeff coeff) {
  Triplets trips;
  trips.reserve(sd.tets.size() * 16);
  for (int t : sd.tets) {
    const double v = mesh.volume(t);
    const auto ids = local_ids(mesh.tet(t), sd);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        double s = 0.0;
        for (int k = 0; k < 4; ++k) s += coeff(ids[k]) * tet_triple(a, b, k);
        trips.emplace_back(ids[a], ids[b], v * s);
      }
  }
  return from_triplets(sd.size(), trips);
}

template <class Coeff>
SparseOperator boundary_mass_impl(const TetMesh&, const BoundarySurface& surface,
                                  const Subdomain& sd, Coeff coeff) {
  Triplets trips;
  trips.reserve(surface.triangles.size() * 9);
  for (int f = 0; f < surface.size(); ++f) {
    const Tri& tri = surface.triangles[f];
    std::array<int, 3> ids{};
    for (int a = 0; a < 3; ++a) {
      ids[a] = sd.to_local[tri[a]];
      if (ids[a] < 0) {
        throw InputError("boundary coefficient missing on surface node " + std::to_string(tri[a]));
      }
    }
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += coeff(ids[k]) * tri_triple(a, b, k);
        trips.emplace_back(ids[a], ids[b], surface.areas[f] * s);
      }
  }
  return from_triplets(sd.size(), trips);
}

}  // namespace

VectorField VectorField::zero(int n, std::string unit) {
  VectorField v;
  for (auto& c : v.comp) c = Eigen::VectorXd::Zero(n);
  v.unit = std::move(unit);
  return v;
}

Eigen::VectorXd VectorField::magnitude() const {
  return (comp[0].array().square() + comp[1].array().square() + comp[2].array().square()).sqrt();
}

bool VectorField::all_finite() const {
  return comp[0].allFinite() && comp[1].allFinite() && comp[2].allFinite();
}

ElementGeometry element_gradients(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  Eigen::Matrix3d j;
  j.col(0) = b - a;
  j.col(1) = c - a;
  j.col(2) = d - a;
  const double det = j.determinant();
  if (std::abs(det) / 6.0 < kDegenerateVolume) throw InputError("degenerate tetrahedron");
  const Eigen::Matrix3d inv = j.inverse();
  ElementGeometry e;
  e.volume = std::abs(det) / 6.0;
  for (int k = 0; k < 3; ++k) e.grad[k + 1] = inv.row(k).transpose();
  e.grad[0] = -(e.grad[1] + e.grad[2] + e.grad[3]);
  return e;
}

ElementGeometry element_gradients(const TetMesh& mesh, int tet) {
  const Tet& t = mesh.tet(tet);
  return element_gradients(mesh.node(t[0]), mesh.node(t[1]), mesh.node(t[2]), mesh.node(t[3]));
}

const QuadratureRule& tet_rule() {
  static const QuadratureRule rule = [] {
    const double a = (5.0 + 3.0 * std::sqrt(5.0)) / 20.0;
    const double b = (5.0 - std::sqrt(5.0)) / 20.0;
    QuadratureRule r;
    for (int i = 0; i < 4; ++i) {
      Eigen::Vector4d p = Eigen::Vector4d::Constant(b);
      p[i] = a;
      r.points.push_back(p);
      r.weights.push_back(0.25);
    }
    return r;
  }();
  return rule;
}

const QuadratureRule& triangle_rule() {
  static const QuadratureRule rule = [] {
    QuadratureRule r;
    for (int i = 0; i < 3; ++i) {
      Eigen::Vector4d p(1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.0);
      p[i] = 2.0 / 3.0;
      r.points.push_back(p);
      r.weights.push_back(1.0 / 3.0);
    }
    return r;
  }();
  return rule;
}

// ---------------------------------------------------------------------------

SparseOperator::SparseOperator(SparseMatrix matrix, bool symmetric)
    : matrix_(std::move(matrix)), symmetric_(symmetric) {
  matrix_.makeCompressed();
}

double SparseOperator::symmetry_defect() const {
  if (matrix_.rows() != matrix_.cols()) return std::numeric_limits<double>::infinity();
  const double scale = matrix_.coeffs().size() ? matrix_.coeffs().cwiseAbs().maxCoeff() : 0.0;
  if (scale == 0.0) return 0.0;
  const SparseMatrix diff = matrix_ - SparseMatrix(matrix_.transpose());
  const double d = diff.coeffs().size() ? diff.coeffs().cwiseAbs().maxCoeff() : 0.0;
  return d / scale;
}

SparseOperator SparseOperator::operator+(const SparseOperator& o) const {
  return SparseOperator(matrix_ + o.matrix_, symmetric_ && o.symmetric_);
}

SparseOperator SparseOperator::scaled(double s) const {
  return SparseOperator(s * matrix_, symmetric_);
}

SparseOperator lumped(const SparseOperator& a) {
  const Eigen::VectorXd rows = a.matrix() * Eigen::VectorXd::Ones(a.cols());
  SparseMatrix d(a.rows(), a.cols());
  d.reserve(Eigen::VectorXi::Constant(a.cols(), 1));
  for (int i = 0; i < a.rows(); ++i) d.insert(i, i) = rows[i];
  d.makeCompressed();
  return SparseOperator(std::move(d), true);
}

SparseOperator restrict_to(const SparseOperator& a, const std::vector<int>& keep) {
  std::vector<int> map(a.rows(), -1);
  for (std::size_t i = 0; i < keep.size(); ++i) map[keep[i]] = static_cast<int>(i);
  Triplets trips;
  const SparseMatrix& m = a.matrix();
  for (int col = 0; col < m.outerSize(); ++col) {
    if (map[col] < 0) continue;
    for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
      if (map[it.row()] >= 0) trips.emplace_back(map[it.row()], map[col], it.value());
    }
  }
  SparseMatrix r(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(keep.size()));
  r.setFromTriplets(trips.begin(), trips.end());
  return SparseOperator(std::move(r), a.symmetric());
}

// ---------------------------------------------------------------------------

SparseOperator assemble_stiffness(const TetMesh& mesh, const Subdomain& sd, double coeff) {
  if (!(coeff >= 0.0)) throw InputError("stiffness: negative coefficient");
  return stiffness_impl(mesh, sd, [coeff](int) { return coeff; });
}

SparseOperator assemble_stiffness(const TetMesh& mesh, const Subdomain& sd,
                                  const Eigen::VectorXd& coeff) {
  check_coefficient(coeff, sd.size(), "stiffness");
  return stiffness_impl(mesh, sd, [&coeff](int i) { return coeff[i]; });
}

SparseOperator assemble_mass(const TetMesh& mesh, const Subdomain& sd, double coeff) {
  if (!(coeff >= 0.0)) throw InputError("mass: negative coefficient");
  return mass_impl(mesh, sd, [coeff](int) { return coeff; });
}

SparseOperator assemble_mass(const TetMesh& mesh, const Subdomain& sd,
                             const Eigen::VectorXd& coeff) {
  check_coefficient(coeff, sd.size(), "mass");
  return mass_impl(mesh, sd, [&coeff](int i) { return coeff[i]; });
}

SparseOperator assemble_boundary_mass(const TetMesh& mesh, const BoundarySurface& surface,
                                      const Subdomain& sd, double coeff) {
  if (!(coeff >= 0.0)) throw InputError("boundary mass: negative coefficient");
  return boundary_mass_impl(mesh, surface, sd, [coeff](int) { return coeff; });
}

SparseOperator assemble_boundary_mass(const TetMesh& mesh, const BoundarySurface& surface,
                                      const Subdomain& sd, const Eigen::VectorXd& coeff) {
  check_coefficient(coeff, sd.size(), "boundary mass");
  return boundary_mass_impl(mesh, surface, sd, [&coeff](int i) { return coeff[i]; });
}

Eigen::VectorXd assemble_load(const TetMesh& mesh, const Subdomain& sd,
                              const std::function<double(const Vec3&)>& f) {
  Eigen::VectorXd load = Eigen::VectorXd::Zero(sd.size());
  const auto& rule = tet_rule();
  for (int t : sd.tets) {
    const Tet& tet = mesh.tet(t);
    const double v = mesh.volume(t);
    const auto ids = local_ids(tet, sd);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Eigen::Vector4d& l = rule.points[q];
      const Vec3 x = l[0] * mesh.node(tet[0]) + l[1] * mesh.node(tet[1]) +
                     l[2] * mesh.node(tet[2]) + l[3] * mesh.node(tet[3]);
      const double fx = f(x) * rule.weights[q] * v;
      for (int a = 0; a < 4; ++a) load[ids[a]] += fx * l[a];
    }
  }
  return load;
}

Eigen::VectorXd assemble_boundary_load(const TetMesh& mesh, const BoundarySurface& surface,
                                       const Subdomain& sd,
                                       const std::function<double(const Vec3&)>& g) {
  Eigen::VectorXd load = Eigen::VectorXd::Zero(sd.size());
  const auto& rule = triangle_rule();
  for (int f = 0; f < surface.size(); ++f) {
    const Tri& tri = surface.triangles[f];
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Eigen::Vector4d& l = rule.points[q];
      const Vec3 x = l[0] * mesh.node(tri[0]) + l[1] * mesh.node(tri[1]) + l[2] * mesh.node(tri[2]);
      const double gx = g(x) * rule.weights[q] * surface.areas[f];
      for (int a = 0; a < 3; ++a) {
        const int id = sd.to_local[tri[a]];
        if (id < 0) throw InputError("surface node outside the subdomain");
        load[id] += gx * l[a];
      }
    }
  }
  return load;
}

// ---------------------------------------------------------------------------

SolveStats solve_spd(const SparseOperator& a, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                     double tol) {
  const int n = a.rows();
  if (a.cols() != n || b.size() != n) throw SolverError("solve_spd: dimension mismatch");
  if (!b.allFinite()) throw SolverError("solve_spd: non-finite right-hand side");
  if (x.size() != n || !x.allFinite()) x = Eigen::VectorXd::Zero(n);

  SolveStats stats;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero();
    return stats;
  }
  const Eigen::VectorXd diag = a.matrix().diagonal();
  if ((diag.array() <= 0.0).any()) throw SolverError("solve_spd: matrix is not positive definite");
  const Eigen::VectorXd inv_diag = diag.cwiseInverse();

  Eigen::VectorXd r = b - a.matrix() * x;
  stats.relative_residual = r.norm() / bnorm;
  if (stats.relative_residual <= tol) return stats;
  Eigen::VectorXd z = inv_diag.cwiseProduct(r);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  const int cap = 10 * n;
  for (int it = 1; it <= cap; ++it) {
    const Eigen::VectorXd ap = a.matrix() * p;
    const double curvature = p.dot(ap);
    if (!(curvature > 0.0)) throw SolverError("solve_spd: matrix is not positive definite");
    const double alpha = rz / curvature;
    x += alpha * p;
    r -= alpha * ap;
    stats.iterations = it;
    stats.relative_residual = r.norm() / bnorm;
    if (stats.relative_residual <= tol) {
      // Confirm against the true residual; recurrences drift in long runs.
      stats.relative_residual = (b - a.matrix() * x).norm() / bnorm;
      if (stats.relative_residual <= tol) return stats;
      r = b - a.matrix() * x;
    }
    z = inv_diag.cwiseProduct(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  throw SolverError("solve_spd: no convergence in " + std::to_string(cap) +
                    " iterations (relative residual " + std::to_string(stats.relative_residual) +
                    ")");
}

Eigen::VectorXd solve_spd(const SparseOperator& a, const Eigen::VectorXd& b, double tol) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  solve_spd(a, b, x, tol);
  return x;
}

SpdSolver::SpdSolver(SparseOperator a, double tol)
    : a_(std::move(a)), tol_(tol), ldlt_(std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>()) {
  if (a_.rows() != a_.cols()) throw SolverError("SpdSolver: matrix is not square");
  if (a_.rows() == 0) return;
  ldlt_->compute(a_.matrix());
  if (ldlt_->info() != Eigen::Success) throw SolverError("SpdSolver: factorization failed");
  if ((ldlt_->vectorD().array() <= 0.0).any()) {
    throw SolverError("SpdSolver: matrix is not positive definite");
  }
}

Eigen::VectorXd SpdSolver::solve(const Eigen::VectorXd& b) const {
  if (b.size() != a_.rows()) throw SolverError("SpdSolver: dimension mismatch");
  if (b.size() == 0) return b;
  if (!b.allFinite()) throw SolverError("SpdSolver: non-finite right-hand side");
  Eigen::VectorXd x = ldlt_->solve(b);
  const double bnorm = b.norm();
  if (bnorm == 0.0) return Eigen::VectorXd::Zero(b.size());
  if ((b - a_.matrix() * x).norm() > tol_ * bnorm) solve_spd(a_, b, x, tol_);
  return x;
}

}  // namespace vascond
