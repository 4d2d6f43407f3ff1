#pragma once

#include "vascond/fem.hpp"
#include "vascond/hemodynamics.hpp"
#include "vascond/mesh.hpp"

#include <string>

namespace vascond {

/// Closed form of the absorption amplitude.
///   Printed: eps = varsigma lambda (theta / L) (45 pi / V_max)^(1/3)
///   Sphere:  eps = 3 varsigma lambda (theta / L) / R with V_max = 4/3 pi R^3
enum class AbsorptionModel { Printed, Sphere };

AbsorptionModel parse_absorption_model(const std::string& name);
std::string to_string(AbsorptionModel model);

struct DiffusionParams {
  double theta = 0.70;             // pressure decay fraction in arterioles
  double arteriole_length = 4e-4;  // m
  double kappa = 0.0;              // source scaling, 1/s; <= 0 means calibrate
  AbsorptionModel absorption = AbsorptionModel::Printed;
  bool lumped_mass = true;         // row-sum lumping of U and T

  void validate() const;
};

/// Effective diffusion coefficient A_a p / (8 pi mu), m^2/s.
double compute_varsigma(const FlowParams& params);

double compute_epsilon(double varsigma, double lambda, double theta, double length, double v_max,
                       AbsorptionModel model = AbsorptionModel::Printed);
Eigen::VectorXd compute_epsilon(double varsigma, const Eigen::VectorXd& lambda, double theta,
                                double length, double v_max,
                                AbsorptionModel model = AbsorptionModel::Printed);

/// Nodal source shape on the tissue side of the artery surface:
/// s = lambda max(p - p_diastolic, 0) / p_pulse on interface nodes, 0 elsewhere.
/// `p_artery` is indexed by the artery numbering, the result by the tissue numbering.
Eigen::VectorXd source_shape(const TetMesh& mesh, const BoundarySurface& surface,
                             const Eigen::VectorXd& p_artery, const Eigen::VectorXd& lambda,
                             double p_diastolic, double p_pulse);

/// w_i = int_{dOmega} s phi_i over artery faces with a tissue neighbour, with s
/// interpolated linearly from the nodal values (tissue numbering).
Eigen::VectorXd assemble_source(const TetMesh& mesh, const BoundarySurface& surface,
                                const Eigen::VectorXd& s);

struct ClampReport {
  int count = 0;           // nodes outside [0, 1] before clamping
  double excursion = 0.0;  // largest distance outside [0, 1]
};

/// Implicit Euler for U dc/dt + R c + T c = w on the tissue subdomain:
/// c_k = (U + dt R + dt T)^{-1} (U c_{k-1} + dt w).
/// With `lumped`, U and T are replaced by their row-sum diagonals, which keeps
/// c nonnegative when the absorption layer is thinner than the mesh spacing.
class ConcentrationSolver {
 public:
  ConcentrationSolver(const TetMesh& mesh, const Eigen::VectorXd& diffusivity,
                      const Eigen::VectorXd& absorption, double dt, double tol = 1e-10,
                      bool lumped = false);

  /// One step without clamping.
  Eigen::VectorXd advance(const Eigen::VectorXd& c, const Eigen::VectorXd& w) const;
  /// One step followed by clamping to [0, 1], reported in `report` when not null.
  Eigen::VectorXd step(const Eigen::VectorXd& c, const Eigen::VectorXd& w,
                       ClampReport* report = nullptr) const;
  /// Solution of the stationary system (R + T) c = w.
  Eigen::VectorXd steady_state(const Eigen::VectorXd& w) const;

  const SparseOperator& mass() const { return mass_; }             // U
  const SparseOperator& diffusion() const { return diffusion_; }   // R
  const SparseOperator& absorption() const { return absorption_; } // T
  double dt() const { return dt_; }
  int size() const { return mass_.rows(); }

 private:
  double dt_;
  double tol_;
  SparseOperator mass_;
  SparseOperator diffusion_;
  SparseOperator absorption_;
  SpdSolver solver_;
};

/// Source scaling that makes the steady response to `shape` reach 1 at its
/// maximum over the interface nodes.
double calibrate_kappa(const ConcentrationSolver& solver, const TetMesh& mesh,
                       const BoundarySurface& surface, const Eigen::VectorXd& shape);

}  // namespace vascond
