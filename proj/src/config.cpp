#include "vascond/config.hpp"

#include "vascond/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace vascond {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  }
  return v;
}

std::vector<double> parse_numbers(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(parse_number(key, tok));
  return out;
}

template <std::size_t N>
std::array<double, N> parse_fixed(const std::string& key, const std::string& text) {
  const auto v = parse_numbers(key, text);
  if (v.size() != N) {
    throw ConfigError(key + ": expected " + std::to_string(N) + " numbers, got '" + text + "'");
  }
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

int parse_int(const std::string& key, const std::string& text) {
  const double v = parse_number(key, text);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(key + ": expected an integer");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key + ": expected true or false");
}

std::string join(const std::array<double, 3>& v) { return fmt(v[0]) + " " + fmt(v[1]) + " " + fmt(v[2]); }
std::string join(const Vec3& v) { return fmt(v[0]) + " " + fmt(v[1]) + " " + fmt(v[2]); }

// "x y z [r]; x y z [r]" lists.
std::vector<std::vector<double>> parse_groups(const std::string& key, const std::string& text,
                                              std::size_t width) {
  std::vector<std::vector<double>> groups;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ';')) {
    if (trim(part).empty()) continue;
    auto v = parse_numbers(key, part);
    if (v.size() != width) {
      throw ConfigError(key + ": each entry needs " + std::to_string(width) + " numbers");
    }
    groups.push_back(std::move(v));
  }
  return groups;
}

using Setter = std::function<void(SimulationConfig&, const std::string&)>;
using Getter = std::function<std::string(const SimulationConfig&)>;

ConfigKey number_key(std::string name, std::string unit, std::string desc,
                     std::function<double&(SimulationConfig&)> ref, double scale = 1.0) {
  const std::string key = name;
  Setter set = [ref, scale, key](SimulationConfig& c, const std::string& v) {
    ref(c) = parse_number(key, v) * scale;
  };
  Getter get = [ref, scale](const SimulationConfig& c) {
    return fmt(ref(const_cast<SimulationConfig&>(c)) / scale);
  };
  return {std::move(name), std::move(unit), std::move(desc), std::move(set), std::move(get)};
}

std::vector<ConfigKey> build_schema() {
  using C = SimulationConfig;
  std::vector<ConfigKey> s;
  const double mmhg = kPascalPerMmHg;

  s.push_back({"mesh.path", "-", "mesh file; empty selects the synthetic vessel",
               [](C& c, const std::string& v) { c.mesh_path = trim(v); },
               [](const C& c) { return c.mesh_path.string(); }});
  s.push_back({"mesh.compartments", "-", "compartment table file (name = sigma, xi); empty for defaults",
               [](C& c, const std::string& v) { c.compartment_path = trim(v); },
               [](const C& c) { return c.compartment_path.string(); }});

  s.push_back({"geometry.shape", "-", "synthetic vessel: straight or y",
               [](C& c, const std::string& v) {
                 const std::string t = trim(v);
                 if (t == "straight") c.geometry.shape = VesselGeometry::Shape::Straight;
                 else if (t == "y") c.geometry.shape = VesselGeometry::Shape::YBifurcation;
                 else throw ConfigError("geometry.shape: expected straight or y");
               },
               [](const C& c) {
                 return std::string(c.geometry.shape == VesselGeometry::Shape::Straight ? "straight" : "y");
               }});
  s.push_back(number_key("geometry.radius", "m", "vessel radius",
                         [](C& c) -> double& { return c.geometry.radius; }));
  s.push_back(number_key("geometry.length", "m", "straight tube or parent branch length",
                         [](C& c) -> double& { return c.geometry.length; }));
  s.push_back(number_key("geometry.branch_length", "m", "daughter branch length",
                         [](C& c) -> double& { return c.geometry.branch_length; }));
  s.push_back(number_key("geometry.angle", "deg", "bifurcation angle between the daughters",
                         [](C& c) -> double& { return c.geometry.bifurcation_angle_deg; }));
  s.push_back({"geometry.box", "m", "tissue box extents x y z",
               [](C& c, const std::string& v) {
                 const auto b = parse_fixed<3>("geometry.box", v);
                 c.geometry.box = Vec3(b[0], b[1], b[2]);
               },
               [](const C& c) { return join(c.geometry.box); }});
  s.push_back(number_key("geometry.edge_length", "m", "target edge length h",
                         [](C& c) -> double& { return c.geometry.edge_length; }));
  s.push_back({"geometry.tissue_label", "-", "compartment of the tissue box",
               [](C& c, const std::string& v) { c.geometry.tissue_label = trim(v); },
               [](const C& c) { return c.geometry.tissue_label; }});

  s.push_back(number_key("flow.density", "kg/m^3", "blood density",
                         [](C& c) -> double& { return c.flow.density; }));
  s.push_back(number_key("flow.viscosity", "Pa s", "reference viscosity in zeta and varsigma",
                         [](C& c) -> double& { return c.flow.viscosity; }));
  s.push_back(number_key("flow.total_flow", "ml/min", "total cerebral blood flow",
                         [](C& c) -> double& { return c.flow.total_flow; }, 1e-6 / 60.0));
  s.push_back(number_key("flow.reference_pressure", "mmHg", "average pressure difference (mean arterial)",
                         [](C& c) -> double& { return c.flow.reference_pressure; }, mmhg));
  s.push_back(number_key("flow.arteriole_diameter", "m", "arteriole diameter",
                         [](C& c) -> double& { return c.flow.arteriole_diameter; }));
  s.push_back(number_key("flow.distension", "-", "vessel distension factor",
                         [](C& c) -> double& { return c.flow.distension; }));
  s.push_back(number_key("flow.reference_volume", "m^3", "overall volume of changes",
                         [](C& c) -> double& { return c.flow.reference_volume; }));
  s.push_back({"flow.gravity", "m/s^2", "gravity vector x y z",
               [](C& c, const std::string& v) {
                 const auto g = parse_fixed<3>("flow.gravity", v);
                 c.flow.gravity = Vec3(g[0], g[1], g[2]);
               },
               [](const C& c) { return join(c.flow.gravity); }});
  s.push_back(number_key("flow.leray_epsilon", "-", "Leray smoothing length in mean edge lengths",
                         [](C& c) -> double& { return c.flow.leray_epsilon; }));
  s.push_back(number_key("flow.viscosity_epsilon", "-", "viscosity smoothing length in mean edge lengths",
                         [](C& c) -> double& { return c.flow.viscosity_epsilon; }));
  s.push_back({"flow.time_scheme", "-", "velocity update: explicit or semi-implicit",
               [](C& c, const std::string& v) { c.time_scheme = parse_time_scheme(trim(v)); },
               [](const C& c) { return to_string(c.time_scheme); }});
  s.push_back({"flow.boundary_model", "-", "pressure boundary coefficient: robin (zeta lambda) or wave",
               [](C& c, const std::string& v) { c.boundary_model = parse_boundary_model(trim(v)); },
               [](const C& c) { return to_string(c.boundary_model); }});

  s.push_back(number_key("viscosity.mu0", "Pa s", "zero-shear viscosity",
                         [](C& c) -> double& { return c.viscosity.mu0; }));
  s.push_back(number_key("viscosity.mu_inf", "Pa s", "infinite-shear viscosity",
                         [](C& c) -> double& { return c.viscosity.mu_inf; }));
  s.push_back(number_key("viscosity.lambda", "s", "Carreau-Yasuda relaxation time",
                         [](C& c) -> double& { return c.viscosity.lambda; }));
  s.push_back(number_key("viscosity.n", "-", "power-law index",
                         [](C& c) -> double& { return c.viscosity.n; }));
  s.push_back(number_key("viscosity.a", "-", "transition parameter",
                         [](C& c) -> double& { return c.viscosity.a; }));

  s.push_back({"pulse.bpm", "1/min", "heart rate; sets the cycle length 60/bpm",
               [](C& c, const std::string& v) {
                 const double bpm = parse_number("pulse.bpm", v);
                 if (!(bpm > 0.0)) throw ConfigError("pulse.bpm must be positive");
                 c.pulse.cycle = 60.0 / bpm;
               },
               [](const C& c) { return fmt(60.0 / c.pulse.cycle); }});
  s.push_back(number_key("pulse.pulse_pressure", "mmHg", "systolic minus diastolic pressure",
                         [](C& c) -> double& { return c.pulse.pulse_pressure; }, mmhg));
  s.push_back({"pulse.weights", "-", "percussion, tidal and dicrotic weights",
               [](C& c, const std::string& v) { c.pulse.weights = parse_fixed<3>("pulse.weights", v); },
               [](const C& c) { return join(c.pulse.weights); }});
  s.push_back({"pulse.durations", "cycle", "component durations as cycle fractions",
               [](C& c, const std::string& v) { c.pulse.durations = parse_fixed<3>("pulse.durations", v); },
               [](const C& c) { return join(c.pulse.durations); }});
  s.push_back({"pulse.starts", "cycle", "component start times as cycle fractions",
               [](C& c, const std::string& v) { c.pulse.starts = parse_fixed<3>("pulse.starts", v); },
               [](const C& c) { return join(c.pulse.starts); }});
  s.push_back({"pulse.spheres", "m", "support spheres 'x y z r; ...', or auto (one sphere enclosing the artery)",
               [](C& c, const std::string& v) {
                 if (trim(v) == "auto") {
                   c.auto_sphere = true;
                   c.pulse.spheres.clear();
                   return;
                 }
                 c.auto_sphere = false;
                 c.pulse.spheres.clear();
                 for (const auto& g : parse_groups("pulse.spheres", v, 4)) {
                   c.pulse.spheres.push_back({Vec3(g[0], g[1], g[2]), g[3]});
                 }
               },
               [](const C& c) {
                 if (c.auto_sphere) return std::string("auto");
                 std::string out;
                 for (const auto& sp : c.pulse.spheres) {
                   if (!out.empty()) out += "; ";
                   out += join(sp.center) + " " + fmt(sp.radius);
                 }
                 return out;
               }});

  s.push_back(number_key("diffusion.theta", "-", "pressure decay fraction in arterioles",
                         [](C& c) -> double& { return c.diffusion.theta; }));
  s.push_back(number_key("diffusion.arteriole_length", "m", "arteriole length",
                         [](C& c) -> double& { return c.diffusion.arteriole_length; }));
  s.push_back(number_key("diffusion.kappa", "1/s", "source scaling; 0 calibrates from the steady state",
                         [](C& c) -> double& { return c.diffusion.kappa; }));
  s.push_back({"diffusion.absorption", "-", "absorption amplitude form: printed or sphere",
               [](C& c, const std::string& v) { c.diffusion.absorption = parse_absorption_model(trim(v)); },
               [](const C& c) { return to_string(c.diffusion.absorption); }});
  s.push_back({"diffusion.lumped_mass", "-", "lump the mass and absorption matrices of the concentration step",
               [](C& c, const std::string& v) { c.diffusion.lumped_mass = parse_bool("diffusion.lumped_mass", v); },
               [](const C& c) { return std::string(c.diffusion.lumped_mass ? "true" : "false"); }});

  s.push_back(number_key("archie.cementation", "-", "cementation exponent beta",
                         [](C& c) -> double& { return c.archie.cementation; }));
  s.push_back(number_key("archie.sigma_fluid", "S/m", "blood conductivity",
                         [](C& c) -> double& { return c.archie.sigma_fluid; }));
  s.push_back({"archie.strict", "-", "restrict the cementation exponent to [3/2, 5/3]",
               [](C& c, const std::string& v) { c.archie.strict_cementation = parse_bool("archie.strict", v); },
               [](const C& c) { return std::string(c.archie.strict_cementation ? "true" : "false"); }});

  s.push_back(number_key("time.dt", "s", "time step",
                         [](C& c) -> double& { return c.flow.dt; }));
  s.push_back(number_key("time.total", "s", "simulated time",
                         [](C& c) -> double& { return c.total_time; }));
  s.push_back(number_key("time.burn_in", "s", "discarded initial interval",
                         [](C& c) -> double& { return c.burn_in; }));
  s.push_back({"time.snapshots", "-", "equispaced snapshots after burn-in",
               [](C& c, const std::string& v) { c.snapshots = parse_int("time.snapshots", v); },
               [](const C& c) { return std::to_string(c.snapshots); }});

  s.push_back(number_key("solver.tolerance", "-", "relative residual of linear solves",
                         [](C& c) -> double& { return c.solver_tol; }));
  s.push_back({"output.dir", "-", "output directory",
               [](C& c, const std::string& v) { c.output_dir = trim(v); },
               [](const C& c) { return c.output_dir.string(); }});
  s.push_back({"output.probes", "m", "probe points 'x y z; ...' (nearest node)",
               [](C& c, const std::string& v) {
                 c.probes.clear();
                 for (const auto& g : parse_groups("output.probes", v, 3)) c.probes.emplace_back(g[0], g[1], g[2]);
               },
               [](const C& c) {
                 std::string out;
                 for (const auto& p : c.probes) {
                   if (!out.empty()) out += "; ";
                   out += join(p);
                 }
                 return out;
               }});
  s.push_back({"run.threads", "-", "worker threads for linear algebra",
               [](C& c, const std::string& v) { c.threads = parse_int("run.threads", v); },
               [](const C& c) { return std::to_string(c.threads); }});
  return s;
}

}  // namespace

VesselGeometry SimulationConfig::desk_geometry() {
  VesselGeometry g;
  g.shape = VesselGeometry::Shape::YBifurcation;
  g.radius = 0.3e-3;
  g.length = 1.5e-3;
  g.branch_length = 1.2e-3;
  g.bifurcation_angle_deg = 60.0;
  g.box = Vec3(2.4e-3, 2.4e-3, 3.6e-3);
  g.edge_length = 0.15e-3;
  return g;
}

int SimulationConfig::total_steps() const {
  return static_cast<int>(std::llround(total_time / flow.dt));
}

std::vector<long> SimulationConfig::snapshot_steps() const {
  std::vector<long> steps;
  const double interval = (total_time - burn_in) / snapshots;
  for (int i = 0; i < snapshots; ++i) {
    steps.push_back(std::llround((burn_in + i * interval) / flow.dt));
  }
  return steps;
}

void SimulationConfig::validate() const {
  flow.validate();
  viscosity.validate();
  pulse.validate();
  diffusion.validate();
  archie.validate();
  if (!(burn_in >= 0.0)) throw ConfigError("time.burn_in must be >= 0");
  if (!(total_time > burn_in)) throw ConfigError("time.total must exceed time.burn_in");
  if (snapshots < 1) throw ConfigError("time.snapshots must be >= 1");
  const double steps = total_time / flow.dt;
  if (std::abs(steps - std::round(steps)) > 1e-6) {
    throw ConfigError("time.dt must divide time.total");
  }
  const double interval = (total_time - burn_in) / snapshots;
  const double ratio = interval / flow.dt;
  if (ratio < 1.0 - 1e-9 || std::abs(ratio - std::round(ratio)) > 1e-6) {
    throw ConfigError("time.dt must divide the snapshot interval (time.total - time.burn_in) / time.snapshots");
  }
  const double start = burn_in / flow.dt;
  if (std::abs(start - std::round(start)) > 1e-6) throw ConfigError("time.dt must divide time.burn_in");
  if (!(solver_tol > 0.0 && solver_tol < 1.0)) throw ConfigError("solver.tolerance must lie in (0, 1)");
  if (threads < 1) throw ConfigError("run.threads must be >= 1");
  if (!auto_sphere && pulse.spheres.empty()) throw ConfigError("pulse.spheres: at least one sphere required");
  if (mesh_path.empty()) {
    if (!(geometry.radius > 0.0) || !(geometry.edge_length > 0.0)) {
      throw ConfigError("geometry.radius and geometry.edge_length must be positive");
    }
  }
  if (!(diastolic_pressure() >= 0.0)) {
    throw ConfigError("flow.reference_pressure must be at least half the pulse pressure");
  }
}

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = build_schema();
  return schema;
}

void apply_setting(SimulationConfig& config, const std::string& key, const std::string& value) {
  for (const auto& k : config_schema()) {
    if (k.name == key) {
      k.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_override(SimulationConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  apply_setting(config, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

SimulationConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  SimulationConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      apply_setting(config, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

void save_config(const SimulationConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write config " + path.string());
  for (const auto& k : config_schema()) out << k.name << " = " << k.get(config) << "\n";
}

std::string schema_help() {
  const SimulationConfig defaults;
  std::ostringstream out;
  out << "Config keys (key = value; units as listed):\n";
  for (const auto& k : config_schema()) {
    out << "  " << std::left << std::setw(28) << k.name << " [" << k.unit << "] default: "
        << (k.get(defaults).empty() ? "(empty)" : k.get(defaults)) << "\n      " << k.description << "\n";
  }
  return out.str();
}

std::string to_string(BoundaryModel model) {
  return model == BoundaryModel::Robin ? "robin" : "wave";
}

BoundaryModel parse_boundary_model(const std::string& name) {
  if (name == "robin") return BoundaryModel::Robin;
  if (name == "wave") return BoundaryModel::Wave;
  throw ConfigError("unknown boundary model '" + name + "' (expected robin or wave)");
}

}  // namespace vascond
