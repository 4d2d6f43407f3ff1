#pragma once

#include "vascond/mesh.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <array>
#include <functional>
#include <memory>
#include <string>

namespace vascond {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Nodal scalar coefficients on one subdomain, tagged with unit and time.
struct ScalarField {
  Eigen::VectorXd values;
  std::string unit;
  double time = 0.0;
};

/// Three nodal coefficient blocks (x, y, z components) on one subdomain.
struct VectorField {
  std::array<Eigen::VectorXd, 3> comp;
  std::string unit;
  double time = 0.0;

  static VectorField zero(int n, std::string unit = "m/s");
  int size() const { return static_cast<int>(comp[0].size()); }
  Eigen::VectorXd magnitude() const;
  bool all_finite() const;
};

/// Constant gradients of the four P1 basis functions and the tet volume.
struct ElementGeometry {
  std::array<Vec3, 4> grad;
  double volume = 0.0;
};

ElementGeometry element_gradients(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);
ElementGeometry element_gradients(const TetMesh& mesh, int tet);

/// Barycentric points with weights summing to one (scale by |element|).
struct QuadratureRule {
  std::vector<Eigen::Vector4d> points;  // tets use four coordinates, triangles three (last is 0)
  std::vector<double> weights;
};

/// Degree-2 rules: 4 points on tets, 3 points on triangles.
const QuadratureRule& tet_rule();
const QuadratureRule& triangle_rule();

/// Sparse matrix with a symmetry flag.
class SparseOperator {
 public:
  SparseOperator() = default;
  SparseOperator(SparseMatrix matrix, bool symmetric);

  int rows() const { return static_cast<int>(matrix_.rows()); }
  int cols() const { return static_cast<int>(matrix_.cols()); }
  bool symmetric() const { return symmetric_; }
  const SparseMatrix& matrix() const { return matrix_; }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return matrix_ * x; }
  Eigen::VectorXd operator*(const Eigen::VectorXd& x) const { return apply(x); }

  /// max |A_ij - A_ji| / max |A|.
  double symmetry_defect() const;

  SparseOperator operator+(const SparseOperator& o) const;
  SparseOperator scaled(double s) const;

 private:
  SparseMatrix matrix_;
  bool symmetric_ = false;
};

/// Row-sum lumped diagonal copy of `a`.
SparseOperator lumped(const SparseOperator& a);

/// Principal submatrix on the listed rows/columns, in the listed order.
SparseOperator restrict_to(const SparseOperator& a, const std::vector<int>& keep);

// Assembly on a subdomain: operators are indexed by subdomain-local node ids.
// Nodal coefficients are interpolated linearly inside elements and all element
// integrals are evaluated exactly.
SparseOperator assemble_stiffness(const TetMesh& mesh, const Subdomain& sd, double coeff);
SparseOperator assemble_stiffness(const TetMesh& mesh, const Subdomain& sd,
                                  const Eigen::VectorXd& coeff);
SparseOperator assemble_mass(const TetMesh& mesh, const Subdomain& sd, double coeff);
SparseOperator assemble_mass(const TetMesh& mesh, const Subdomain& sd,
                             const Eigen::VectorXd& coeff);

/// Surface mass over the artery boundary, indexed by the numbering of `sd`.
SparseOperator assemble_boundary_mass(const TetMesh& mesh, const BoundarySurface& surface,
                                      const Subdomain& sd, double coeff);
SparseOperator assemble_boundary_mass(const TetMesh& mesh, const BoundarySurface& surface,
                                      const Subdomain& sd, const Eigen::VectorXd& coeff);

/// Load vectors int f phi_i, evaluated with the degree-2 rules.
Eigen::VectorXd assemble_load(const TetMesh& mesh, const Subdomain& sd,
                              const std::function<double(const Vec3&)>& f);
Eigen::VectorXd assemble_boundary_load(const TetMesh& mesh, const BoundarySurface& surface,
                                       const Subdomain& sd,
                                       const std::function<double(const Vec3&)>& g);

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients to ||Ax - b|| <= tol ||b||, capped
/// at 10 n iterations. `x` holds the initial guess and receives the solution.
/// Throws SolverError on non-convergence or a non-positive curvature direction.
SolveStats solve_spd(const SparseOperator& a, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                     double tol = 1e-10);
Eigen::VectorXd solve_spd(const SparseOperator& a, const Eigen::VectorXd& b, double tol = 1e-10);

/// Sparse LDL^T factorization of a fixed SPD operator with the same residual
/// contract as solve_spd; a residual above tolerance is polished with PCG.
class SpdSolver {
 public:
  SpdSolver() = default;
  explicit SpdSolver(SparseOperator a, double tol = 1e-10);

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  const SparseOperator& op() const { return a_; }
  int size() const { return a_.rows(); }

 private:
  SparseOperator a_;
  double tol_ = 1e-10;
  std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> ldlt_;
};

}  // namespace vascond
