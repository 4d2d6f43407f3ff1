#pragma once

#include "vascond/fem.hpp"
#include "vascond/mesh.hpp"

#include <array>
#include <string>
#include <vector>

namespace vascond {

inline constexpr double kPascalPerMmHg = 133.322;

// ---------------------------------------------------------------------------
// Viscosity

struct ViscosityParams {
  double mu0 = 56e-3;      // zero-shear viscosity, Pa s
  double mu_inf = 3.45e-3; // infinite-shear viscosity, Pa s
  double lambda = 1.902;   // relaxation time, s
  double n = 0.22;         // power-law index
  double a = 1.25;         // transition parameter

  void validate() const;
};

double carreau_yasuda(double shear_rate, const ViscosityParams& p);
Eigen::VectorXd carreau_yasuda(const Eigen::VectorXd& shear_rate, const ViscosityParams& p);

// ---------------------------------------------------------------------------
// Boundary pulse

/// Four-term Blackman-Harris window, 1-periodic, peak 1 at t = 1/2.
double blackman_harris(double t);

struct SupportSphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

/// Percussion, tidal and dicrotic components. Durations and start times are
/// fractions of the cycle.
struct PulseSpec {
  std::array<double, 3> weights{0.50, 0.30, 0.25};
  std::array<double, 3> durations{0.55, 0.55, 0.60};
  std::array<double, 3> starts{0.05, 0.20, 0.38};
  double cycle = 1.0;                                  // s
  double pulse_pressure = 50.0 * kPascalPerMmHg;       // Pa, max - min after normalize()
  double amplitude = 1.0;                              // Pa
  std::vector<SupportSphere> spheres;

  void validate() const;
  /// Sets the amplitude so that max - min over a cycle equals pulse_pressure.
  void normalize();
  /// Spatially uniform part: amplitude * sum of weighted windows.
  double waveform(double t) const;
  bool in_support(const Vec3& x) const;
};

/// Minimum and maximum of the unit-amplitude waveform over one cycle.
std::pair<double, double> waveform_range(const PulseSpec& spec);

double pulse_pressure(const Vec3& x, double t, const PulseSpec& spec);

// ---------------------------------------------------------------------------
// Flow parameters

struct FlowParams {
  double density = 1050.0;                       // kg/m^3
  double viscosity = 4e-3;                       // reference viscosity, Pa s
  double total_flow = 750e-6 / 60.0;             // m^3/s
  double reference_pressure = 87.0 * kPascalPerMmHg;  // Pa
  double arteriole_diameter = 10e-6;             // m
  double distension = 0.2;                       // vessel distension factor
  double reference_volume = 1e-4;                // m^3
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);          // m/s^2
  double leray_epsilon = 0.03;
  double viscosity_epsilon = 0.01;
  double dt = 2e-3;                              // s

  double arteriole_area() const;
  void validate() const;
};

/// Robin coefficient of the pressure boundary condition, 1/m.
double compute_zeta(const FlowParams& p, double boundary_area);
double compute_nu_bar(const FlowParams& p, double boundary_area);

// ---------------------------------------------------------------------------
// Field operators on the artery subdomain (local numbering)

/// Nodal shear rate: per-element sqrt(Su:Su / 2) averaged to nodes by volume.
Eigen::VectorXd shear_rate(const TetMesh& mesh, const Subdomain& sd, const VectorField& u);

/// (M + l^2 K) x_s = M x with natural boundary conditions.
class HelmholtzFilter {
 public:
  HelmholtzFilter(const TetMesh& mesh, const Subdomain& sd, double length, double tol = 1e-10);

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  VectorField apply(const VectorField& u) const;
  double length() const { return length_; }

 private:
  double length_;
  SparseOperator mass_;
  SpdSolver solver_;
};

/// Smoothing length for a dimensionless factor: factor times the mean edge length.
double filter_length(const TetMesh& mesh, Region region, double factor);

/// Element-constant data reused by the flow operators.
struct ElementCache {
  std::vector<ElementGeometry> geom;
  std::vector<std::array<int, 4>> ids;  // local node ids

  ElementCache(const TetMesh& mesh, const Subdomain& sd);
  int size() const { return static_cast<int>(geom.size()); }
};

/// Right-hand side of the pressure equation:
/// 2 int grad(q) . (grad u) grad(mu) - rho int grad(q) . (grad u) u_s.
Eigen::VectorXd assemble_ppe_rhs(const ElementCache& cache, int n, const VectorField& u,
                                 const VectorField& u_smooth, const Eigen::VectorXd& mu,
                                 double density);

/// Implicit pressure recursion (dt^2 K + M) p_k = dt^2 D + M(2p_{k-1} - p_{k-2})
/// + M(pb_k - 2pb_{k-1} + pb_{k-2}).
class PressureOperator {
 public:
  PressureOperator(const TetMesh& mesh, const BoundarySurface& surface, const Subdomain& sd,
                   const Eigen::VectorXd& boundary_coeff, double dt, double tol = 1e-10);

  Eigen::VectorXd step(const Eigen::VectorXd& d, const Eigen::VectorXd& p1,
                       const Eigen::VectorXd& p2, const Eigen::VectorXd& pb0,
                       const Eigen::VectorXd& pb1, const Eigen::VectorXd& pb2) const;

  const SparseOperator& stiffness() const { return stiffness_; }
  const SparseOperator& boundary_mass() const { return boundary_mass_; }
  double dt() const { return dt_; }

 private:
  double dt_;
  SparseOperator stiffness_;
  SparseOperator boundary_mass_;
  SpdSolver solver_;
};

/// Time discretization of the momentum balance.
///   Explicit:     C u_k = C u_{k-1} - dt (Q(p) + H(u_s)u_{k-1} + L u_{k-1} + F)
///   SemiImplicit: (C + dt H(u_s) + dt L1) u_k = C u_{k-1} - dt (Q(p) + L2 u_{k-1} + F)
enum class TimeScheme { Explicit, SemiImplicit };

/// Velocity recursion on free nodes; fixed nodes keep zero velocity.
class VelocityOperator {
 public:
  VelocityOperator(const TetMesh& mesh, const Subdomain& sd, double density,
                   std::vector<char> fixed, double tol = 1e-10);

  // Individual terms of the momentum balance, one vector per component over all nodes.
  VectorField pressure_term(const Eigen::VectorXd& p) const;                         // Q(p)
  VectorField convection_term(const VectorField& u_smooth, const VectorField& u) const;  // H(u_s)u
  VectorField curl_viscous_term(const Eigen::VectorXd& mu, const VectorField& u) const;  // L1 u
  VectorField gradient_viscous_term(const Eigen::VectorXd& mu, const VectorField& u) const;  // L2 u
  VectorField body_term(const Vec3& gravity) const;                                // F

  // Matrix forms: H(u_s) acts per component (n x n); L1 couples components and is
  // ordered component-major (index l * n + i).
  SparseMatrix convection_matrix(const VectorField& u_smooth) const;
  SparseMatrix curl_viscous_matrix(const Eigen::VectorXd& mu) const;

  VectorField step(const VectorField& u, const VectorField& u_smooth, const Eigen::VectorXd& mu,
                   const Eigen::VectorXd& p, const Vec3& gravity, double dt,
                   TimeScheme scheme = TimeScheme::Explicit) const;

  const SparseOperator& mass() const { return mass_; }
  const std::vector<int>& free_nodes() const { return free_; }
  const ElementCache& cache() const { return cache_; }

 private:
  ElementCache cache_;
  double density_;
  int n_;
  std::vector<char> fixed_;
  std::vector<int> free_;
  SparseOperator mass_;  // rho-weighted consistent mass on all nodes
  SpdSolver solver_;     // on free nodes

  VectorField explicit_step(const VectorField& u, const VectorField& u_smooth,
                            const Eigen::VectorXd& mu, const Eigen::VectorXd& p,
                            const Vec3& gravity, double dt) const;
  VectorField semi_implicit_step(const VectorField& u, const VectorField& u_smooth,
                                 const Eigen::VectorXd& mu, const Eigen::VectorXd& p,
                                 const Vec3& gravity, double dt) const;
};

TimeScheme parse_time_scheme(const std::string& name);
std::string to_string(TimeScheme scheme);

/// Boundary-node mask in local numbering of the artery subdomain.
std::vector<char> boundary_mask(const BoundarySurface& surface, const Subdomain& sd);

}  // namespace vascond
