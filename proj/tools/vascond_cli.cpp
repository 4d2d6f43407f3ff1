#include "vascond/error.hpp"
#include "vascond/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

namespace {

using namespace vascond;

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::string output;
  int threads = 0;
  bool verbose = false;
  std::string input;
  std::string format = "vtk";
  std::string mesh_out;
};

// `export` treats --output as its destination, so it keeps the configured run directory.
SimulationConfig resolve(const Options& opt, bool output_is_run_dir = true) {
  SimulationConfig config = opt.config.empty() ? SimulationConfig{} : load_config(opt.config);
  for (const auto& o : opt.overrides) apply_override(config, o);
  if (output_is_run_dir && !opt.output.empty()) config.output_dir = opt.output;
  if (opt.threads > 0) config.threads = opt.threads;
  config.validate();
  return config;
}

void print_manifest(std::ostream& out, const SimulationConfig& config, const Problem& problem) {
  out << "parameters:\n";
  for (const auto& k : config_schema()) out << "  " << k.name << " = " << k.get(config) << "\n";
  out << "mesh: " << problem.mesh.num_nodes() << " nodes, " << problem.mesh.num_tets() << " tets\n"
      << "  artery: " << problem.mesh.artery().tets.size() << " tets, "
      << problem.mesh.artery().size() << " nodes, " << artery_components(problem.mesh)
      << " component(s)\n"
      << "  tissue: " << problem.mesh.tissue().tets.size() << " tets, "
      << problem.mesh.tissue().size() << " nodes\n"
      << "  artery surface: " << problem.surface.size() << " triangles, area "
      << problem.surface.total_area << " m^2\n";
}

void print_run(std::ostream& out, const RunInfo& info, int snapshots) {
  out << "run: " << info.steps << " steps, " << snapshots << " snapshots, wall time "
      << info.wall_seconds << " s\n"
      << "  zeta " << info.zeta << " 1/m, nu_bar " << info.nu_bar << ", varsigma " << info.varsigma
      << " m^2/s, kappa " << info.kappa << " 1/s, V_max " << info.v_max << " m^3\n"
      << "  clamped concentration values: " << info.clamp_events << " (max per-step fraction "
      << info.max_clamp_fraction << ", largest excursion " << info.max_clamp_excursion << ")\n";
}

void print_stats(std::ostream& out, const SummaryStats& s, const TetMesh& mesh) {
  const auto range = [&](const Eigen::VectorXd& v, const Subdomain* sd) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int i = 0; i < mesh.num_nodes(); ++i) {
      if (sd && !sd->contains(i)) continue;
      lo = std::min(lo, v[i]);
      hi = std::max(hi, v[i]);
    }
    std::ostringstream t;
    t << "[" << lo << ", " << hi << "]";
    return t.str();
  };
  const Subdomain* art = &mesh.artery();
  const Subdomain* tis = &mesh.tissue();
  const std::tuple<const char*, const FieldStats*, const Subdomain*> rows[] = {
      {"p [Pa]", &s.p, art}, {"|u| [m/s]", &s.speed, art}, {"mu [Pa s]", &s.mu, art},
      {"c [-]", &s.c, tis},  {"sigma [S/m]", &s.sigma, nullptr}};
  out << "field         mean range / peak range / std range\n";
  for (const auto& [name, f, sd] : rows) {
    out << "  " << name << ": " << range(f->mean, sd) << " / " << range(f->peak, sd) << " / "
        << range(f->std, sd) << "\n";
  }
}

std::filesystem::path input_dir(const Options& opt, const SimulationConfig& config) {
  return opt.input.empty() ? config.output_dir : std::filesystem::path(opt.input);
}

CompartmentTable table_for(const SimulationConfig& config) {
  return config.compartment_path.empty() ? CompartmentTable::defaults()
                                         : CompartmentTable::from_file(config.compartment_path);
}

int cmd_validate(const Options& opt) {
  const SimulationConfig config = resolve(opt);
  const Problem problem = prepare_problem(config);
  print_manifest(std::cout, config, problem);
  std::cout << "config and mesh are valid\n";
  return 0;
}

int cmd_mesh_gen(const Options& opt) {
  const SimulationConfig config = resolve(opt);
  const TetMesh mesh = generate_synthetic_vessel(config.geometry, table_for(config));
  const std::filesystem::path path =
      opt.mesh_out.empty() ? config.output_dir / "mesh.txt" : std::filesystem::path(opt.mesh_out);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  save_mesh(mesh, path);
  std::cout << "wrote " << path.string() << ": " << mesh.num_nodes() << " nodes, "
            << mesh.num_tets() << " tets, " << mesh.artery().tets.size() << " artery tets\n";
  return 0;
}

int cmd_simulate(const Options& opt) {
  const SimulationConfig config = resolve(opt);
  const Problem problem = prepare_problem(config);
  print_manifest(std::cout, config, problem);
  const long total = config.total_steps();
  const StepObserver progress = [&](long k, double t) {
    if (opt.verbose && (k % 100 == 0 || k == total)) {
      std::cerr << "step " << k << "/" << total << " t = " << t << " s\n";
    }
  };
  const SimulationResult result = run_simulation(config, problem, progress);
  const auto& dir = config.output_dir;
  std::filesystem::create_directories(dir);
  save_config(config, dir / "config.cfg");
  save_mesh(problem.mesh, dir / "mesh.txt");
  write_lapse(result.lapse, dir / "lapse.bin");
  if (result.lapse.size() >= 2) {
    write_summary_vtk(problem.mesh, summarize(result.lapse), dir / "summary.vtk");
  }
  for (std::size_t i = 0; i < config.probes.size(); ++i) {
    write_probe_csv(result.lapse, nearest_node(problem.mesh, config.probes[i]),
                    dir / ("probe_" + std::to_string(i) + ".csv"));
  }
  print_run(std::cout, result.info, result.lapse.size());
  std::cout << "outputs in " << dir.string() << "\n";
  return 0;
}

int cmd_stats(const Options& opt) {
  const SimulationConfig config = resolve(opt);
  const auto dir = input_dir(opt, config);
  const TetMesh mesh = load_mesh(dir / "mesh.txt", table_for(config));
  const TimeLapse lapse = read_lapse(dir / "lapse.bin");
  const SummaryStats stats = summarize(lapse);
  write_summary_vtk(mesh, stats, dir / "summary.vtk");
  std::cout << lapse.size() << " snapshots in [" << lapse.snapshots.front().time << ", "
            << lapse.snapshots.back().time << "] s\n";
  print_stats(std::cout, stats, mesh);
  return 0;
}

int cmd_export(const Options& opt) {
  const SimulationConfig config = resolve(opt, false);
  const auto dir = input_dir(opt, config);
  const auto out = opt.output.empty() ? dir : std::filesystem::path(opt.output);
  const TetMesh mesh = load_mesh(dir / "mesh.txt", table_for(config));
  const TimeLapse lapse = read_lapse(dir / "lapse.bin");
  std::filesystem::create_directories(out);
  if (opt.format == "vtk") {
    for (int i = 0; i < lapse.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "snapshot_%04d.vtk", i);
      write_snapshot_vtk(mesh, lapse.snapshots[i], out / name);
    }
    std::cout << "wrote " << lapse.size() << " VTK files to " << out.string() << "\n";
  } else {
    if (config.probes.empty()) throw ConfigError("csv export needs output.probes");
    for (std::size_t i = 0; i < config.probes.size(); ++i) {
      write_probe_csv(lapse, nearest_node(mesh, config.probes[i]),
                      out / ("probe_" + std::to_string(i) + ".csv"));
    }
    std::cout << "wrote " << config.probes.size() << " probe files to " << out.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pulsatile cerebral blood flow, microcirculation and conductivity atlas"};
  app.footer("\n" + schema_help());
  app.require_subcommand(1);
  // Global options may also follow the subcommand.
  app.fallthrough();
  Options opt;
  app.add_option("--config", opt.config, "config file (key = value)")->check(CLI::ExistingFile);
  app.add_option("--set", opt.overrides, "override a config key, key=value (repeatable)")
      ->allow_extra_args(false);
  app.add_option("--output", opt.output, "output directory");
  app.add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--verbose", opt.verbose, "progress on standard error");

  auto* mesh_gen = app.add_subcommand("mesh-gen", "generate the synthetic vessel mesh");
  mesh_gen->add_option("--mesh-out", opt.mesh_out, "mesh file (default OUTPUT/mesh.txt)");
  auto* simulate = app.add_subcommand("simulate", "run the coupled simulation and write outputs");
  auto* stats = app.add_subcommand("stats", "summary statistics of a finished run");
  stats->add_option("--input", opt.input, "run directory (default output.dir)");
  auto* exp = app.add_subcommand("export", "write snapshot VTK files or probe CSV files");
  exp->add_option("--input", opt.input, "run directory (default output.dir)");
  exp->add_option("--format", opt.format, "vtk or csv")->check(CLI::IsMember({"vtk", "csv"}));
  auto* validate = app.add_subcommand("validate", "check config and mesh without simulating");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.get_usage() << "Run with --help for options and config keys.\n";
    return 2;
  }

  try {
    if (mesh_gen->parsed()) return cmd_mesh_gen(opt);
    if (simulate->parsed()) return cmd_simulate(opt);
    if (stats->parsed()) return cmd_stats(opt);
    if (exp->parsed()) return cmd_export(opt);
    if (validate->parsed()) return cmd_validate(opt);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
