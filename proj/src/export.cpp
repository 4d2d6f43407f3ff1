#include "vascond/error.hpp"
#include "vascond/pipeline.hpp"

#include <cstdint>
#include <fstream>
#include <iomanip>

namespace vascond {

namespace {

constexpr char kLapseMagic[8] = {'V', 'C', 'L', 'A', 'P', 'S', 'E', '1'};

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw InputError("cannot write " + path.string());
  out << std::setprecision(10);
  return out;
}

void write_geometry(std::ostream& out, const TetMesh& mesh, const std::string& title) {
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_nodes() << " double\n";
  for (const auto& x : mesh.nodes()) out << x[0] << ' ' << x[1] << ' ' << x[2] << '\n';
  out << "CELLS " << mesh.num_tets() << ' ' << 5 * mesh.num_tets() << '\n';
  for (const auto& t : mesh.tets()) out << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  out << "CELL_TYPES " << mesh.num_tets() << '\n';
  for (int t = 0; t < mesh.num_tets(); ++t) out << "10\n";
  out << "CELL_DATA " << mesh.num_tets() << "\nSCALARS label int 1\nLOOKUP_TABLE default\n";
  for (int t = 0; t < mesh.num_tets(); ++t) out << mesh.label(t) << '\n';
  out << "POINT_DATA " << mesh.num_nodes() << '\n';
}

void write_scalars(std::ostream& out, const std::string& name, const Eigen::VectorXd& v) {
  out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
  for (Eigen::Index i = 0; i < v.size(); ++i) out << v[i] << '\n';
}

void check_out(const std::ostream& out, const std::filesystem::path& path) {
  if (!out) throw InputError("write failed: " + path.string());
}

void write_vec(std::ostream& out, const Eigen::VectorXd& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_vec(std::istream& in, Eigen::VectorXd& v, std::int64_t n) {
  v.resize(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
}

}  // namespace

void write_snapshot_vtk(const TetMesh& mesh, const Snapshot& snap, const std::filesystem::path& path) {
  if (snap.p.size() != mesh.num_nodes()) throw InputError("snapshot does not match the mesh");
  auto out = open_out(path);
  write_geometry(out, mesh, "vascond snapshot t=" + std::to_string(snap.time) + " s");
  write_scalars(out, "p_Pa", snap.p);
  write_scalars(out, "u_magnitude_mps", snap.speed());
  write_scalars(out, "mu_Pas", snap.mu);
  write_scalars(out, "c", snap.c);
  write_scalars(out, "sigma_Spm", snap.sigma);
  out << "VECTORS u_mps double\n";
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    out << snap.u[0][i] << ' ' << snap.u[1][i] << ' ' << snap.u[2][i] << '\n';
  }
  check_out(out, path);
}

void write_summary_vtk(const TetMesh& mesh, const SummaryStats& stats, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_geometry(out, mesh, "vascond summary");
  const std::pair<const char*, const FieldStats*> fields[] = {
      {"p_Pa", &stats.p}, {"u_magnitude_mps", &stats.speed}, {"mu_Pas", &stats.mu},
      {"c", &stats.c},    {"sigma_Spm", &stats.sigma}};
  for (const auto& [name, f] : fields) {
    write_scalars(out, std::string(name) + "_mean", f->mean);
    write_scalars(out, std::string(name) + "_peak", f->peak);
    write_scalars(out, std::string(name) + "_std", f->std);
  }
  check_out(out, path);
}

int nearest_node(const TetMesh& mesh, const Vec3& x) {
  int best = -1;
  double dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const double d = (mesh.node(i) - x).squaredNorm();
    if (d < dist) dist = d, best = i;
  }
  return best;
}

void write_probe_csv(const TimeLapse& lapse, int node, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << std::setprecision(17);
  out << "time_s,p_Pa,u_mps,mu_Pas,c,sigma_Spm\n";
  for (const auto& s : lapse.snapshots) {
    if (node < 0 || node >= s.p.size()) throw InputError("probe node out of range");
    const double speed = std::sqrt(s.u[0][node] * s.u[0][node] + s.u[1][node] * s.u[1][node] +
                                   s.u[2][node] * s.u[2][node]);
    out << s.time << ',' << s.p[node] << ',' << speed << ',' << s.mu[node] << ',' << s.c[node]
        << ',' << s.sigma[node] << '\n';
  }
  check_out(out, path);
}

void write_lapse(const TimeLapse& lapse, const std::filesystem::path& path) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  const std::int64_t nodes = lapse.snapshots.empty() ? 0 : lapse.snapshots.front().p.size();
  const std::int64_t count = lapse.size();
  out.write(kLapseMagic, sizeof kLapseMagic);
  out.write(reinterpret_cast<const char*>(&nodes), sizeof nodes);
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  for (const auto& s : lapse.snapshots) {
    const std::int64_t step = s.step;
    out.write(reinterpret_cast<const char*>(&s.time), sizeof s.time);
    out.write(reinterpret_cast<const char*>(&step), sizeof step);
    for (const auto* v : {&s.p, &s.u[0], &s.u[1], &s.u[2], &s.mu, &s.c, &s.sigma}) {
      if (v->size() != nodes) throw InputError("lapse: inconsistent node counts");
      write_vec(out, *v);
    }
  }
  check_out(out, path);
}

TimeLapse read_lapse(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  char magic[8];
  std::int64_t nodes = 0, count = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&nodes), sizeof nodes);
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!in || !std::equal(magic, magic + 8, kLapseMagic) || nodes < 0 || count < 0) {
    throw InputError(path.string() + ": not a time-lapse file");
  }
  TimeLapse lapse;
  for (std::int64_t k = 0; k < count; ++k) {
    Snapshot s;
    std::int64_t step = 0;
    in.read(reinterpret_cast<char*>(&s.time), sizeof s.time);
    in.read(reinterpret_cast<char*>(&step), sizeof step);
    s.step = step;
    for (auto* v : {&s.p, &s.u[0], &s.u[1], &s.u[2], &s.mu, &s.c, &s.sigma}) read_vec(in, *v, nodes);
    if (!in) throw InputError(path.string() + ": truncated time-lapse file");
    lapse.snapshots.push_back(std::move(s));
  }
  return lapse;
}

}  // namespace vascond
