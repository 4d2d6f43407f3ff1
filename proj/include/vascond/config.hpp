#pragma once

#include "vascond/conductivity.hpp"
#include "vascond/hemodynamics.hpp"
#include "vascond/mesh.hpp"
#include "vascond/microcirculation.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace vascond {

/// Robin coefficient used in the boundary mass of the pressure recursion.
///   Robin: zeta lambda
///   Wave:  lambda / (zeta nu_bar^2)
enum class BoundaryModel { Robin, Wave };

struct SimulationConfig {
  // Mesh source: a mesh file when `mesh_path` is set, the synthetic generator otherwise.
  std::filesystem::path mesh_path;
  std::filesystem::path compartment_path;
  VesselGeometry geometry = desk_geometry();

  FlowParams flow;
  ViscosityParams viscosity;
  PulseSpec pulse;
  bool auto_sphere = true;  // one support sphere enclosing the whole artery
  DiffusionParams diffusion;
  ArchieParams archie;

  TimeScheme time_scheme = TimeScheme::SemiImplicit;
  BoundaryModel boundary_model = BoundaryModel::Robin;

  double total_time = 6.0;  // s
  double burn_in = 3.0;     // s
  int snapshots = 300;
  double solver_tol = 1e-10;
  std::filesystem::path output_dir = "vascond_out";
  std::vector<Vec3> probes;
  int threads = 1;

  /// Y bifurcation of radius 0.3 mm in a 2.4 x 2.4 x 3.6 mm grey-matter box.
  static VesselGeometry desk_geometry();

  /// Throws ConfigError naming the violated invariant.
  void validate() const;

  double mean_arterial_pressure() const { return flow.reference_pressure; }
  double diastolic_pressure() const { return flow.reference_pressure - 0.5 * pulse.pulse_pressure; }
  int total_steps() const;
  /// Step indices at which snapshots are recorded.
  std::vector<long> snapshot_steps() const;
};

struct ConfigKey {
  std::string name;
  std::string unit;
  std::string description;
  std::function<void(SimulationConfig&, const std::string&)> set;
  std::function<std::string(const SimulationConfig&)> get;
};

/// Every configurable key; the single source for parsing, validation and help.
const std::vector<ConfigKey>& config_schema();

/// Applies `key = value` (throws ConfigError for unknown keys or bad values).
void apply_setting(SimulationConfig& config, const std::string& key, const std::string& value);
/// Applies a `key=value` override string.
void apply_override(SimulationConfig& config, const std::string& assignment);

/// Reads `key = value` lines on top of the defaults; `#` starts a comment.
SimulationConfig load_config(const std::filesystem::path& path);
void save_config(const SimulationConfig& config, const std::filesystem::path& path);

/// Table of keys with unit, default value and description.
std::string schema_help();

std::string to_string(BoundaryModel model);
BoundaryModel parse_boundary_model(const std::string& name);

}  // namespace vascond
