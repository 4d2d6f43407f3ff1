#pragma once

#include "vascond/config.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace vascond {

/// All fields on the global node numbering. Pressure, velocity and viscosity
/// are zero off the artery; concentration is one on artery-only nodes.
struct Snapshot {
  double time = 0.0;
  long step = 0;
  Eigen::VectorXd p;
  std::array<Eigen::VectorXd, 3> u;
  Eigen::VectorXd mu;
  Eigen::VectorXd c;
  Eigen::VectorXd sigma;

  Eigen::VectorXd speed() const;
};

struct TimeLapse {
  std::vector<Snapshot> snapshots;
  int size() const { return static_cast<int>(snapshots.size()); }
};

struct RunInfo {
  int nodes = 0;
  int tets = 0;
  int artery_nodes = 0;
  int tissue_nodes = 0;
  double boundary_area = 0.0;
  double zeta = 0.0;
  double nu_bar = 0.0;
  double varsigma = 0.0;
  double kappa = 0.0;
  double v_max = 0.0;
  long steps = 0;
  long clamp_events = 0;
  double max_clamp_fraction = 0.0;  // per step, over tissue nodes
  double max_clamp_excursion = 0.0;
  double wall_seconds = 0.0;
};

/// Mesh, surface and derived per-node data shared by one run.
struct Problem {
  TetMesh mesh;
  BoundarySurface surface;
  CompartmentTable table;
  Eigen::VectorXd lambda;  // all nodes
};

Problem prepare_problem(const SimulationConfig& config);

/// One support sphere centred on the artery bounding box, enclosing every artery node.
SupportSphere enclosing_sphere(const TetMesh& mesh);

struct SimulationResult {
  TimeLapse lapse;
  RunInfo info;
  /// Concentration of the final step on the tissue numbering.
  Eigen::VectorXd final_c;
};

/// Called after every step with the step index and simulated time.
using StepObserver = std::function<void(long step, double time)>;

SimulationResult run_simulation(const SimulationConfig& config, const Problem& problem,
                                const StepObserver& observer = {});
SimulationResult run_simulation(const SimulationConfig& config);

struct FieldStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd peak;  // nearest-rank 90% quantile
  Eigen::VectorXd std;   // population standard deviation
};

struct SummaryStats {
  FieldStats p, speed, mu, c, sigma;
};

/// Nearest-rank quantile of `values` (sorted copy), q in (0, 1].
double nearest_rank_quantile(std::vector<double> values, double q);
/// Per-node statistics over a series of nodal vectors.
FieldStats series_stats(const std::vector<Eigen::VectorXd>& series, double quantile = 0.9);
SummaryStats summarize(const TimeLapse& lapse);

// Export.
void write_snapshot_vtk(const TetMesh& mesh, const Snapshot& snap, const std::filesystem::path& path);
void write_summary_vtk(const TetMesh& mesh, const SummaryStats& stats, const std::filesystem::path& path);
int nearest_node(const TetMesh& mesh, const Vec3& x);
void write_probe_csv(const TimeLapse& lapse, int node, const std::filesystem::path& path);

void write_lapse(const TimeLapse& lapse, const std::filesystem::path& path);
TimeLapse read_lapse(const std::filesystem::path& path);

}  // namespace vascond
