#pragma once

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vascond {

using Vec3 = Eigen::Vector3d;
using Tet = std::array<int, 4>;
using Tri = std::array<int, 3>;

inline constexpr std::string_view kVesselCompartment = "Blood vessels";

/// Tets below this volume (m^3) are rejected as degenerate.
inline constexpr double kDegenerateVolume = 1e-18;

struct Compartment {
  std::string name;
  double sigma = 0.0;  // background conductivity, S/m
  double xi = 0.0;     // microvessel length density, 1/m^2
};

/// Background conductivity and microvessel density per compartment name.
class CompartmentTable {
 public:
  /// Seventeen brain compartments with their literature conductivities and
  /// microvessel densities.
  static CompartmentTable defaults();

  /// Parses `name = sigma, xi` lines on top of the defaults. `#` starts a comment.
  static CompartmentTable from_file(const std::filesystem::path& path);

  void set(const std::string& name, double sigma, double xi);
  const Compartment* find(std::string_view name) const;
  const Compartment& at(std::string_view name) const;
  const std::vector<Compartment>& entries() const { return entries_; }

 private:
  std::vector<Compartment> entries_;
};

enum class Region { Artery, Tissue };

/// Tets of one region plus the local node numbering used by its fields.
struct Subdomain {
  Region region = Region::Artery;
  std::vector<int> tets;
  std::vector<int> to_global;
  std::vector<int> to_local;  // -1 for nodes outside the region

  int size() const { return static_cast<int>(to_global.size()); }
  bool contains(int global_node) const { return to_local[global_node] >= 0; }
};

/// Labeled tetrahedral mesh. Validated and consistently oriented on
/// construction, immutable afterwards.
class TetMesh {
 public:
  TetMesh(std::vector<Vec3> nodes, std::vector<Tet> tets, std::vector<int> tet_labels,
          std::map<int, std::string> label_names, const CompartmentTable& table);

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_tets() const { return static_cast<int>(tets_.size()); }

  const std::vector<Vec3>& nodes() const { return nodes_; }
  const Vec3& node(int i) const { return nodes_[i]; }
  const std::vector<Tet>& tets() const { return tets_; }
  const Tet& tet(int t) const { return tets_[t]; }
  int label(int t) const { return tet_labels_[t]; }
  const std::vector<int>& labels() const { return tet_labels_; }
  const std::map<int, std::string>& label_names() const { return label_names_; }
  const std::string& compartment(int t) const { return label_names_.at(tet_labels_[t]); }
  bool is_vessel(int t) const { return vessel_[t]; }

  double volume(int t) const;
  double total_volume() const;
  double max_volume(Region region) const;
  double mean_edge_length(Region region) const;

  const Subdomain& artery() const { return artery_; }
  const Subdomain& tissue() const { return tissue_; }
  const Subdomain& subdomain(Region r) const { return r == Region::Artery ? artery_ : tissue_; }

 private:
  std::vector<Vec3> nodes_;
  std::vector<Tet> tets_;
  std::vector<int> tet_labels_;
  std::map<int, std::string> label_names_;
  std::vector<bool> vessel_;
  Subdomain artery_;
  Subdomain tissue_;
};

double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

TetMesh load_mesh(const std::filesystem::path& path, const CompartmentTable& table);
void save_mesh(const TetMesh& mesh, const std::filesystem::path& path);

/// Straight tube or symmetric Y bifurcation embedded in a tissue box centred
/// at the origin. All lengths in metres.
struct VesselGeometry {
  enum class Shape { Straight, YBifurcation };

  Shape shape = Shape::Straight;
  double radius = 2e-3;
  double length = 40e-3;         // straight tube, or parent branch of the Y
  double branch_length = 20e-3;  // daughter branches of the Y
  double bifurcation_angle_deg = 60.0;
  Vec3 box = Vec3(40e-3, 40e-3, 60e-3);
  double edge_length = 1e-3;
  std::string tissue_label = "Grey matter";

  /// Signed distance to the vessel surface, negative inside.
  double signed_distance(const Vec3& x) const;
  /// Centre of the inflow cap (bottom end of the tube / parent branch).
  Vec3 inlet_center() const;
  /// Branch axes as (start, end) pairs.
  std::vector<std::pair<Vec3, Vec3>> branches() const;
};

TetMesh generate_synthetic_vessel(const VesselGeometry& geometry,
                                  const CompartmentTable& table = CompartmentTable::defaults());

struct BoundarySurface {
  std::vector<Tri> triangles;     // global node ids
  std::vector<Vec3> normals;      // unit, pointing out of the artery
  std::vector<double> areas;
  std::vector<int> artery_tet;    // owning artery tet per triangle
  std::vector<int> tissue_tet;    // neighbouring tissue tet, or -1
  double total_area = 0.0;

  int size() const { return static_cast<int>(triangles.size()); }
  std::vector<int> nodes() const;  // sorted unique global ids
};

/// Artery surface: every face of an artery tet not shared with another artery tet.
BoundarySurface extract_boundary(const TetMesh& mesh);

/// Outer surface of the whole mesh with outward orientation.
std::vector<Tri> outer_surface(const TetMesh& mesh);

/// Number of face-connected components among the artery tets.
int artery_components(const TetMesh& mesh);

/// Nodal microvessel density ratio xi / mean_{dOmega}(xi) over all mesh nodes.
Eigen::VectorXd compute_lambda(const TetMesh& mesh, const BoundarySurface& surface,
                               const CompartmentTable& table);

/// Volume-weighted nodal average of a per-tet value; tissue tets take precedence
/// over artery tets at nodes touched by both.
Eigen::VectorXd nodal_tissue_average(const TetMesh& mesh, const std::vector<double>& per_tet);

}  // namespace vascond
