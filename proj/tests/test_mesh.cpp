#include "support.hpp"

#include "vascond/error.hpp"
#include "vascond/mesh.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

using namespace vascond;
using namespace vascond::test;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("vascond_test_mesh_" + name);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

VesselGeometry small_y() {
  VesselGeometry g;
  g.shape = VesselGeometry::Shape::YBifurcation;
  g.radius = 0.3e-3;
  g.length = 1.0e-3;
  g.branch_length = 0.8e-3;
  g.box = Vec3(2.4e-3, 2.4e-3, 3.2e-3);
  g.edge_length = 0.15e-3;
  return g;
}

double divergence_volume(const TetMesh& mesh) {
  double v = 0.0;
  for (const Tri& t : outer_surface(mesh)) {
    v += mesh.node(t[0]).dot(mesh.node(t[1]).cross(mesh.node(t[2]))) / 6.0;
  }
  return v;
}

}  // namespace

TEST_CASE("default compartment table carries the literature values") {
  const CompartmentTable table = CompartmentTable::defaults();
  CHECK(table.entries().size() == 17);
  const std::vector<std::pair<std::string, double>> sigma = {
      {"Blood vessels", 0.70},    {"Grey matter", 0.33},          {"White matter", 0.14},
      {"Cerebellum cortex", 0.33}, {"Cerebellum white matter", 0.14}, {"Brainstem", 0.33},
      {"Cingulate cortex", 0.14}, {"Ventral Diencephalon", 0.33}, {"Amygdala", 0.33},
      {"Thalamus", 0.33},          {"Caudate", 0.33},              {"Accumbens", 0.33},
      {"Putamen", 0.33},           {"Hippocampus", 0.33},          {"Pallidum", 0.33},
      {"Ventricles", 0.33},        {"Cerebrospinal fluid (CSF)", 1.79}};
  for (const auto& [name, s] : sigma) {
    REQUIRE(table.find(name) != nullptr);
    CHECK(table.at(name).sigma == s);
  }
  CHECK(table.at("Grey matter").xi == 2.4e8);
  CHECK(table.at("White matter").xi == 1.4e8);
  CHECK(table.at("Cerebellum cortex").xi == 3.0e8);
  CHECK(table.at("Cerebellum white matter").xi == 1.0e8);
  CHECK(table.at("Brainstem").xi == 2.9e8);
  CHECK(table.at("Thalamus").xi == 1.5e8);
  CHECK(table.at("Blood vessels").xi == 0.0);
  CHECK(table.find("Skull") == nullptr);
  CHECK_THROWS_AS(table.at("Skull"), InputError);
}

TEST_CASE("compartment table file overrides and rejects malformed lines") {
  const auto path = temp_file("table.txt");
  write_text(path, "# custom\nGrey matter = 0.4, 1e8\nTumour = 0.5, 0\n");
  const CompartmentTable table = CompartmentTable::from_file(path);
  CHECK(table.at("Grey matter").sigma == 0.4);
  CHECK(table.at("Grey matter").xi == 1e8);
  CHECK(table.at("Tumour").sigma == 0.5);
  CHECK(table.at("White matter").sigma == 0.14);

  write_text(path, "Grey matter 0.4 1e8\n");
  CHECK_THROWS_AS(CompartmentTable::from_file(path), InputError);
  write_text(path, "Grey matter = -1, 1e8\n");
  CHECK_THROWS_AS(CompartmentTable::from_file(path), InputError);
  std::filesystem::remove(path);
}

TEST_CASE("construction rejects invalid meshes") {
  const CompartmentTable table = CompartmentTable::defaults();
  const std::vector<Vec3> nodes = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  const auto names = labels({{1, "Grey matter"}});
  CHECK_THROWS_AS(TetMesh(nodes, {{0, 1, 2, 4}}, {1}, names, table), InputError);
  CHECK_THROWS_AS(TetMesh(nodes, {{0, 1, 2, 3}}, {2}, names, table), InputError);
  CHECK_THROWS_AS(TetMesh(nodes, {{0, 1, 2, 3}}, {1}, labels({{1, "Skull"}}), table), InputError);
  CHECK_THROWS_AS(TetMesh(nodes, {{0, 1, 2, 3}}, {1, 1}, names, table), InputError);
  const std::vector<Vec3> flat = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
  CHECK_THROWS_AS(TetMesh(flat, {{0, 1, 2, 3}}, {1}, names, table), InputError);

  // Negatively oriented input is reoriented.
  const TetMesh m(nodes, {{0, 2, 1, 3}}, {1}, names, table);
  CHECK(m.volume(0) == doctest::Approx(1.0 / 6.0));
  const Tet& t = m.tet(0);
  CHECK(signed_tet_volume(m.node(t[0]), m.node(t[1]), m.node(t[2]), m.node(t[3])) > 0.0);
}

TEST_CASE("tet volumes sum to the divergence-theorem volume of the outer surface") {
  for (const TetMesh& mesh : {kuhn_cube(2, 1e-3, Vec3(0.3e-3, -0.2e-3, 0.1e-3)),
                              generate_synthetic_vessel(small_tube()),
                              generate_synthetic_vessel(small_y())}) {
    const double v = mesh.total_volume();
    CHECK(std::abs(divergence_volume(mesh) - v) <= 1e-10 * v);
  }
  const TetMesh cube = kuhn_cube(0, 2.0);
  CHECK(cube.total_volume() == doctest::Approx(8.0).epsilon(1e-14));
}

TEST_CASE("artery surface matches a brute-force face count with outward normals") {
  const TetMesh mesh = generate_synthetic_vessel(small_y());
  const BoundarySurface s = extract_boundary(mesh);
  std::map<std::array<int, 3>, int> count;
  for (int t : mesh.artery().tets) {
    const Tet& k = mesh.tet(t);
    for (int f = 0; f < 4; ++f) {
      std::array<int, 3> tri;
      int m = 0;
      for (int a = 0; a < 4; ++a)
        if (a != f) tri[m++] = k[a];
      std::sort(tri.begin(), tri.end());
      ++count[tri];
    }
  }
  std::set<std::array<int, 3>> expected;
  for (const auto& [tri, c] : count)
    if (c == 1) expected.insert(tri);
  std::set<std::array<int, 3>> got;
  double area = 0.0;
  for (int f = 0; f < s.size(); ++f) {
    std::array<int, 3> tri = {s.triangles[f][0], s.triangles[f][1], s.triangles[f][2]};
    std::sort(tri.begin(), tri.end());
    CHECK(got.insert(tri).second);
    area += s.areas[f];
    CHECK(s.normals[f].norm() == doctest::Approx(1.0).epsilon(1e-12));
    const Vec3 face = (mesh.node(tri[0]) + mesh.node(tri[1]) + mesh.node(tri[2])) / 3.0;
    const Tet& k = mesh.tet(s.artery_tet[f]);
    const Vec3 cell = (mesh.node(k[0]) + mesh.node(k[1]) + mesh.node(k[2]) + mesh.node(k[3])) / 4.0;
    CHECK((face - cell).dot(s.normals[f]) > 0.0);
    CHECK(mesh.is_vessel(s.artery_tet[f]));
    if (s.tissue_tet[f] >= 0) CHECK_FALSE(mesh.is_vessel(s.tissue_tet[f]));
  }
  CHECK(got == expected);
  CHECK(area == doctest::Approx(s.total_area).epsilon(1e-12));
  CHECK(artery_components(mesh) == 1);
}

TEST_CASE("artery surface is invariant under node renumbering") {
  const TetMesh mesh = generate_synthetic_vessel(small_tube());
  std::vector<int> perm(mesh.num_nodes());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937 rng(11);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Vec3> nodes(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i) nodes[perm[i]] = mesh.node(i);
  std::vector<Tet> tets;
  for (const Tet& t : mesh.tets()) tets.push_back({perm[t[0]], perm[t[1]], perm[t[2]], perm[t[3]]});
  const TetMesh renumbered(nodes, tets, mesh.labels(), mesh.label_names(), CompartmentTable::defaults());

  const BoundarySurface a = extract_boundary(mesh);
  const BoundarySurface b = extract_boundary(renumbered);
  REQUIRE(a.size() == b.size());
  CHECK(a.total_area == doctest::Approx(b.total_area).epsilon(1e-14));
  std::vector<double> aa = a.areas, ba = b.areas;
  std::sort(aa.begin(), aa.end());
  std::sort(ba.begin(), ba.end());
  for (std::size_t i = 0; i < aa.size(); ++i) CHECK(aa[i] == doctest::Approx(ba[i]).epsilon(1e-14));
}

TEST_CASE("microvessel ratio is positive where density is and averages to one on the surface") {
  const TetMesh mesh = generate_synthetic_vessel(small_y());
  const CompartmentTable table = CompartmentTable::defaults();
  const BoundarySurface s = extract_boundary(mesh);
  const Eigen::VectorXd lambda = compute_lambda(mesh, s, table);
  std::vector<double> xi_tet(mesh.num_tets());
  for (int t = 0; t < mesh.num_tets(); ++t) xi_tet[t] = table.at(mesh.compartment(t)).xi;
  const Eigen::VectorXd xi = nodal_tissue_average(mesh, xi_tet);
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    if (xi[i] > 0.0) CHECK(lambda[i] > 0.0);
  }
  double integral = 0.0;
  for (int f = 0; f < s.size(); ++f) {
    const Tri& t = s.triangles[f];
    integral += s.areas[f] * (lambda[t[0]] + lambda[t[1]] + lambda[t[2]]) / 3.0;
  }
  CHECK(std::abs(integral / s.total_area - 1.0) < 1e-10);
}

TEST_CASE("nodal averages prefer tissue tets") {
  const TetMesh mesh = kuhn_cube(3);
  std::vector<double> value(6);
  for (int t = 0; t < 6; ++t) value[t] = mesh.is_vessel(t) ? 10.0 : 1.0;
  const Eigen::VectorXd avg = nodal_tissue_average(mesh, value);
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    CHECK(avg[i] == doctest::Approx(mesh.tissue().contains(i) ? 1.0 : 10.0));
  }
}

TEST_CASE("mesh files round-trip exactly and malformed files are rejected") {
  const TetMesh mesh = generate_synthetic_vessel(small_tube());
  const auto path = temp_file("roundtrip.txt");
  save_mesh(mesh, path);
  const TetMesh back = load_mesh(path, CompartmentTable::defaults());
  REQUIRE(back.num_nodes() == mesh.num_nodes());
  REQUIRE(back.num_tets() == mesh.num_tets());
  for (int i = 0; i < mesh.num_nodes(); ++i) CHECK(back.node(i) == mesh.node(i));
  for (int t = 0; t < mesh.num_tets(); ++t) {
    CHECK(back.tet(t) == mesh.tet(t));
    CHECK(back.compartment(t) == mesh.compartment(t));
  }

  const auto bad = temp_file("bad.txt");
  const std::string nodes = "nodes 4\n0 0 0 0\n1 1 0 0\n2 0 1 0\n3 0 0 1\n";
  write_text(bad, nodes + "tets 1\n0 0 1 2 3 7\nlabels 1\n7 Grey matter\n");
  CHECK(load_mesh(bad, CompartmentTable::defaults()).num_tets() == 1);
  write_text(bad, nodes + "tets 1\n0 0 1 2 9 7\nlabels 1\n7 Grey matter\n");
  CHECK_THROWS_AS(load_mesh(bad, CompartmentTable::defaults()), InputError);
  write_text(bad, nodes + "tets 1\n0 0 1 2 3 7\nlabels 1\n7 Bone\n");
  CHECK_THROWS_AS(load_mesh(bad, CompartmentTable::defaults()), InputError);
  write_text(bad, nodes + "tets 2\n0 0 1 2 3 7\n");
  CHECK_THROWS_AS(load_mesh(bad, CompartmentTable::defaults()), InputError);
  write_text(bad, nodes + "faces 1\n");
  CHECK_THROWS_AS(load_mesh(bad, CompartmentTable::defaults()), InputError);
  CHECK_THROWS_AS(load_mesh(temp_file("missing.txt"), CompartmentTable::defaults()), InputError);
  std::filesystem::remove(path);
  std::filesystem::remove(bad);
}

TEST_CASE("synthetic vessels: geometry, labels and feasibility checks") {
  const VesselGeometry g = small_y();
  CHECK(g.signed_distance(g.inlet_center() + Vec3(0, 0, 1e-4)) < 0.0);
  CHECK(g.signed_distance(Vec3(1.1e-3, 1.1e-3, -1.5e-3)) > 0.0);
  CHECK(g.branches().size() == 3);

  const TetMesh mesh = generate_synthetic_vessel(g);
  CHECK(mesh.artery().tets.size() > 0);
  CHECK(mesh.tissue().tets.size() > mesh.artery().tets.size());
  for (int t = 0; t < mesh.num_tets(); ++t) {
    CHECK((mesh.compartment(t) == "Grey matter" || mesh.compartment(t) == "Blood vessels"));
    CHECK(mesh.volume(t) > kDegenerateVolume);
  }
  CHECK(mesh.total_volume() == doctest::Approx(g.box.prod()).epsilon(1e-9));

  VesselGeometry coarse = g;
  coarse.edge_length = 0.2e-3;
  CHECK_THROWS_AS(generate_synthetic_vessel(coarse), InputError);
  VesselGeometry big = g;
  big.radius = 1.5e-3;
  CHECK_THROWS_AS(generate_synthetic_vessel(big), InputError);
  VesselGeometry label = g;
  label.tissue_label = "Bone";
  CHECK_THROWS_AS(generate_synthetic_vessel(label), InputError);
}
