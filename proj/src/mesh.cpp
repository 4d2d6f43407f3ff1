#include "vascond/mesh.hpp"

#include "vascond/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace vascond {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

// Faces of a tet, each listed with the index of the opposite vertex.
constexpr std::array<std::array<int, 4>, 4> kFaces = {{
    {1, 2, 3, 0},
    {0, 2, 3, 1},
    {0, 1, 3, 2},
    {0, 1, 2, 3},
}};

struct FaceRecord {
  Tri key;  // sorted node ids
  int tet;
  int local;  // face index within the tet

  bool operator<(const FaceRecord& o) const {
    return key != o.key ? key < o.key : tet < o.tet;
  }
};

Tri sorted_face(const Tet& t, int f) {
  Tri k{t[kFaces[f][0]], t[kFaces[f][1]], t[kFaces[f][2]]};
  std::sort(k.begin(), k.end());
  return k;
}

std::vector<FaceRecord> collect_faces(const TetMesh& mesh, const std::vector<int>& tets) {
  std::vector<FaceRecord> faces;
  faces.reserve(tets.size() * 4);
  for (int t : tets) {
    for (int f = 0; f < 4; ++f) faces.push_back({sorted_face(mesh.tet(t), f), t, f});
  }
  std::sort(faces.begin(), faces.end());
  return faces;
}

// Face of tet t opposite local vertex f, ordered so its normal points away
// from the opposite vertex.
Tri outward_face(const TetMesh& mesh, int t, int f) {
  const Tet& tet = mesh.tet(t);
  Tri tri{tet[kFaces[f][0]], tet[kFaces[f][1]], tet[kFaces[f][2]]};
  const Vec3& a = mesh.node(tri[0]);
  const Vec3 n = (mesh.node(tri[1]) - a).cross(mesh.node(tri[2]) - a);
  if (n.dot(mesh.node(tet[kFaces[f][3]]) - a) > 0.0) std::swap(tri[1], tri[2]);
  return tri;
}

Subdomain build_subdomain(Region region, const std::vector<bool>& vessel,
                          const std::vector<Tet>& tets, int num_nodes) {
  Subdomain sd;
  sd.region = region;
  sd.to_local.assign(num_nodes, -1);
  std::vector<char> used(num_nodes, 0);
  for (int t = 0; t < static_cast<int>(tets.size()); ++t) {
    if (vessel[t] != (region == Region::Artery)) continue;
    sd.tets.push_back(t);
    for (int n : tets[t]) used[n] = 1;
  }
  for (int n = 0; n < num_nodes; ++n) {
    if (!used[n]) continue;
    sd.to_local[n] = static_cast<int>(sd.to_global.size());
    sd.to_global.push_back(n);
  }
  return sd;
}

}  // namespace

// ---------------------------------------------------------------------------
// CompartmentTable

CompartmentTable CompartmentTable::defaults() {
  CompartmentTable table;
  // Subcortical nuclei use the grey matter conductivity and the subcortical
  // microvessel density; CSF-filled spaces carry no microvessels.
  table.set(std::string(kVesselCompartment), 0.70, 0.0);
  table.set("Grey matter", 0.33, 2.4e8);
  table.set("White matter", 0.14, 1.4e8);
  table.set("Cerebellum cortex", 0.33, 3.0e8);
  table.set("Cerebellum white matter", 0.14, 1.0e8);
  table.set("Brainstem", 0.33, 2.9e8);
  table.set("Cingulate cortex", 0.14, 2.4e8);
  table.set("Ventral Diencephalon", 0.33, 1.5e8);
  table.set("Amygdala", 0.33, 1.5e8);
  table.set("Thalamus", 0.33, 1.5e8);
  table.set("Caudate", 0.33, 1.5e8);
  table.set("Accumbens", 0.33, 1.5e8);
  table.set("Putamen", 0.33, 1.5e8);
  table.set("Hippocampus", 0.33, 1.5e8);
  table.set("Pallidum", 0.33, 1.5e8);
  table.set("Ventricles", 0.33, 0.0);
  table.set("Cerebrospinal fluid (CSF)", 1.79, 0.0);
  return table;
}

CompartmentTable CompartmentTable::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open compartment table " + path.string());
  CompartmentTable table = defaults();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    const auto comma = line.find(',', eq == std::string::npos ? 0 : eq);
    if (eq == std::string::npos || comma == std::string::npos) {
      throw InputError(path.string() + ":" + std::to_string(line_no) +
                       ": expected 'name = sigma, xi'");
    }
    const std::string name = trim(std::string_view(line).substr(0, eq));
    try {
      const double sigma = std::stod(line.substr(eq + 1, comma - eq - 1));
      const double xi = std::stod(line.substr(comma + 1));
      table.set(name, sigma, xi);
    } catch (const std::invalid_argument&) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
  }
  return table;
}

void CompartmentTable::set(const std::string& name, double sigma, double xi) {
  if (name.empty()) throw InputError("compartment name must not be empty");
  if (!(sigma > 0.0)) throw InputError("compartment '" + name + "': conductivity must be > 0");
  if (!(xi >= 0.0)) throw InputError("compartment '" + name + "': microvessel density must be >= 0");
  for (auto& e : entries_) {
    if (e.name == name) {
      e.sigma = sigma;
      e.xi = xi;
      return;
    }
  }
  entries_.push_back({name, sigma, xi});
}

const Compartment* CompartmentTable::find(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

const Compartment& CompartmentTable::at(std::string_view name) const {
  if (const auto* c = find(name)) return *c;
  throw InputError("unknown compartment label '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// TetMesh

double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

TetMesh::TetMesh(std::vector<Vec3> nodes, std::vector<Tet> tets, std::vector<int> tet_labels,
                 std::map<int, std::string> label_names, const CompartmentTable& table)
    : nodes_(std::move(nodes)),
      tets_(std::move(tets)),
      tet_labels_(std::move(tet_labels)),
      label_names_(std::move(label_names)) {
  if (tets_.size() != tet_labels_.size()) {
    throw InputError("tet count and label count differ");
  }
  const int n = num_nodes();
  for (const Vec3& x : nodes_) {
    if (!x.allFinite()) throw InputError("non-finite node coordinate");
  }
  vessel_.resize(tets_.size());
  for (std::size_t t = 0; t < tets_.size(); ++t) {
    Tet& tet = tets_[t];
    for (int v : tet) {
      if (v < 0 || v >= n) {
        throw InputError("tet " + std::to_string(t) + " has orphan reference to node " +
                         std::to_string(v) + " (node count " + std::to_string(n) + ")");
      }
    }
    const auto name = label_names_.find(tet_labels_[t]);
    if (name == label_names_.end()) {
      throw InputError("tet " + std::to_string(t) + " has unknown compartment label id " +
                       std::to_string(tet_labels_[t]));
    }
    if (!table.find(name->second)) {
      throw InputError("unknown compartment label '" + name->second + "'");
    }
    vessel_[t] = name->second == kVesselCompartment;

    double v = signed_tet_volume(nodes_[tet[0]], nodes_[tet[1]], nodes_[tet[2]], nodes_[tet[3]]);
    if (std::abs(v) < kDegenerateVolume) {
      throw InputError("tet " + std::to_string(t) + " is degenerate (volume " +
                       std::to_string(v) + " m^3)");
    }
    if (v < 0.0) std::swap(tet[2], tet[3]);
  }
  artery_ = build_subdomain(Region::Artery, vessel_, tets_, n);
  tissue_ = build_subdomain(Region::Tissue, vessel_, tets_, n);
}

double TetMesh::volume(int t) const {
  const Tet& k = tets_[t];
  return signed_tet_volume(nodes_[k[0]], nodes_[k[1]], nodes_[k[2]], nodes_[k[3]]);
}

double TetMesh::total_volume() const {
  double v = 0.0;
  for (int t = 0; t < num_tets(); ++t) v += volume(t);
  return v;
}

double TetMesh::max_volume(Region region) const {
  double v = 0.0;
  for (int t : subdomain(region).tets) v = std::max(v, volume(t));
  return v;
}

double TetMesh::mean_edge_length(Region region) const {
  const auto& tets = subdomain(region).tets;
  if (tets.empty()) return 0.0;
  double sum = 0.0;
  for (int t : tets) {
    const Tet& k = tets_[t];
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) sum += (nodes_[k[a]] - nodes_[k[b]]).norm();
    }
  }
  return sum / (6.0 * static_cast<double>(tets.size()));
}

// ---------------------------------------------------------------------------
// File I/O

TetMesh load_mesh(const std::filesystem::path& path, const CompartmentTable& table) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mesh file " + path.string());

  std::vector<Vec3> nodes;
  std::vector<Tet> tets;
  std::vector<int> labels;
  std::map<int, std::string> names;
  bool have_nodes = false, have_tets = false;

  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) -> InputError {
    return InputError(path.string() + ":" + std::to_string(line_no) + ": " + msg);
  };
  auto next_data_line = [&]() -> std::string {
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::string t = trim(line);
      if (!t.empty()) return t;
    }
    throw fail("unexpected end of file");
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string header = trim(line);
    if (header.empty()) continue;
    std::istringstream hs(header);
    std::string section;
    long count = -1;
    hs >> section >> count;
    if (!hs || count < 0) throw fail("expected '<section> <count>' header");

    if (section == "nodes") {
      nodes.resize(count);
      for (long i = 0; i < count; ++i) {
        std::istringstream ls(next_data_line());
        long idx;
        double x, y, z;
        if (!(ls >> idx >> x >> y >> z)) throw fail("malformed node line");
        if (idx != i) throw fail("node indices must be consecutive from 0");
        nodes[i] = Vec3(x, y, z);
      }
      have_nodes = true;
    } else if (section == "tets") {
      tets.resize(count);
      labels.resize(count);
      for (long i = 0; i < count; ++i) {
        std::istringstream ls(next_data_line());
        long idx;
        Tet t;
        int label;
        if (!(ls >> idx >> t[0] >> t[1] >> t[2] >> t[3] >> label)) throw fail("malformed tet line");
        if (idx != i) throw fail("tet indices must be consecutive from 0");
        tets[i] = t;
        labels[i] = label;
      }
      have_tets = true;
    } else if (section == "labels") {
      for (long i = 0; i < count; ++i) {
        std::istringstream ls(next_data_line());
        int id;
        if (!(ls >> id)) throw fail("malformed label line");
        std::string rest;
        std::getline(ls, rest);
        rest = trim(rest);
        if (rest.empty()) throw fail("label without name");
        names[id] = rest;
      }
    } else {
      throw fail("unknown section '" + section + "'");
    }
  }
  if (!have_nodes || !have_tets) throw InputError(path.string() + ": missing nodes or tets section");
  return TetMesh(std::move(nodes), std::move(tets), std::move(labels), std::move(names), table);
}

void save_mesh(const TetMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write mesh file " + path.string());
  out << std::setprecision(17);
  out << "# vascond tetrahedral mesh, coordinates in metres\n";
  out << "nodes " << mesh.num_nodes() << '\n';
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const Vec3& x = mesh.node(i);
    out << i << ' ' << x.x() << ' ' << x.y() << ' ' << x.z() << '\n';
  }
  out << "tets " << mesh.num_tets() << '\n';
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const Tet& k = mesh.tet(t);
    out << t << ' ' << k[0] << ' ' << k[1] << ' ' << k[2] << ' ' << k[3] << ' ' << mesh.label(t)
        << '\n';
  }
  out << "labels " << mesh.label_names().size() << '\n';
  for (const auto& [id, name] : mesh.label_names()) out << id << ' ' << name << '\n';
  if (!out) throw InputError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Surfaces

std::vector<int> BoundarySurface::nodes() const {
  std::vector<int> ids;
  ids.reserve(triangles.size() * 3);
  for (const Tri& t : triangles) ids.insert(ids.end(), t.begin(), t.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

BoundarySurface extract_boundary(const TetMesh& mesh) {
  const auto artery_faces = collect_faces(mesh, mesh.artery().tets);
  const auto tissue_faces = collect_faces(mesh, mesh.tissue().tets);

  BoundarySurface surface;
  for (std::size_t i = 0; i < artery_faces.size();) {
    std::size_t j = i + 1;
    while (j < artery_faces.size() && artery_faces[j].key == artery_faces[i].key) ++j;
    const std::size_t shared = j - i;
    if (shared > 2) {
      throw InputError("non-manifold artery surface: face shared by " + std::to_string(shared) +
                       " artery tets");
    }
    if (shared == 1) {
      const FaceRecord& rec = artery_faces[i];
      const Tri tri = outward_face(mesh, rec.tet, rec.local);
      const Vec3& a = mesh.node(tri[0]);
      const Vec3 cross = (mesh.node(tri[1]) - a).cross(mesh.node(tri[2]) - a);
      const double area = 0.5 * cross.norm();

      auto lo = std::lower_bound(tissue_faces.begin(), tissue_faces.end(), FaceRecord{rec.key, -1, 0});
      int tissue_tet = -1;
      if (lo != tissue_faces.end() && lo->key == rec.key) {
        tissue_tet = lo->tet;
        if (std::next(lo) != tissue_faces.end() && std::next(lo)->key == rec.key) {
          throw InputError("non-manifold artery surface: face shared by two tissue tets");
        }
      }
      surface.triangles.push_back(tri);
      surface.normals.push_back(cross / cross.norm());
      surface.areas.push_back(area);
      surface.artery_tet.push_back(rec.tet);
      surface.tissue_tet.push_back(tissue_tet);
      surface.total_area += area;
    }
    i = j;
  }
  return surface;
}

std::vector<Tri> outer_surface(const TetMesh& mesh) {
  std::vector<int> all(mesh.num_tets());
  std::iota(all.begin(), all.end(), 0);
  const auto faces = collect_faces(mesh, all);
  std::vector<Tri> out;
  for (std::size_t i = 0; i < faces.size();) {
    std::size_t j = i + 1;
    while (j < faces.size() && faces[j].key == faces[i].key) ++j;
    if (j - i == 1) out.push_back(outward_face(mesh, faces[i].tet, faces[i].local));
    i = j;
  }
  return out;
}

int artery_components(const TetMesh& mesh) {
  const auto& tets = mesh.artery().tets;
  if (tets.empty()) return 0;
  std::vector<int> parent(mesh.num_tets());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  const auto faces = collect_faces(mesh, tets);
  for (std::size_t i = 0; i + 1 < faces.size(); ++i) {
    if (faces[i].key == faces[i + 1].key) parent[find(faces[i].tet)] = find(faces[i + 1].tet);
  }
  int components = 0;
  for (int t : tets) components += find(t) == t ? 1 : 0;
  return components;
}

// ---------------------------------------------------------------------------
// Microvessel density

Eigen::VectorXd nodal_tissue_average(const TetMesh& mesh, const std::vector<double>& per_tet) {
  const int n = mesh.num_nodes();
  Eigen::VectorXd tissue_sum = Eigen::VectorXd::Zero(n), tissue_w = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd artery_sum = Eigen::VectorXd::Zero(n), artery_w = Eigen::VectorXd::Zero(n);
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const double v = mesh.volume(t);
    auto& sum = mesh.is_vessel(t) ? artery_sum : tissue_sum;
    auto& w = mesh.is_vessel(t) ? artery_w : tissue_w;
    for (int node : mesh.tet(t)) {
      sum[node] += v * per_tet[t];
      w[node] += v;
    }
  }
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    if (tissue_w[i] > 0.0) {
      out[i] = tissue_sum[i] / tissue_w[i];
    } else if (artery_w[i] > 0.0) {
      out[i] = artery_sum[i] / artery_w[i];
    } else {
      throw InputError("node " + std::to_string(i) + " has no adjacent tet");
    }
  }
  return out;
}

Eigen::VectorXd compute_lambda(const TetMesh& mesh, const BoundarySurface& surface,
                               const CompartmentTable& table) {
  if (surface.size() == 0 || !(surface.total_area > 0.0)) {
    throw InputError("artery surface is empty; microvessel mean is undefined");
  }
  std::vector<double> xi_tet(mesh.num_tets());
  for (int t = 0; t < mesh.num_tets(); ++t) xi_tet[t] = table.at(mesh.compartment(t)).xi;
  const Eigen::VectorXd xi = nodal_tissue_average(mesh, xi_tet);

  double integral = 0.0;
  for (int f = 0; f < surface.size(); ++f) {
    const Tri& tri = surface.triangles[f];
    integral += surface.areas[f] * (xi[tri[0]] + xi[tri[1]] + xi[tri[2]]) / 3.0;
  }
  const double mean = integral / surface.total_area;
  if (!(mean > 0.0)) throw InputError("mean microvessel density over the artery surface is zero");
  return xi / mean;
}

}  // namespace vascond
