#pragma once

// Independent reference machinery for the tests: collapsed Gauss-Legendre
// quadrature, barycentric basis functions from a dense 4x4 solve, dense
// brute-force assembly and small hand-built meshes.

#include "vascond/mesh.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <vector>

namespace vascond::test {

using Real = boost::multiprecision::cpp_bin_float_50;
using Dense = Eigen::MatrixXd;

/// Gauss-Legendre nodes and weights on [0, 1] with N points.
template <int N = 7>
const std::vector<std::pair<double, double>>& gauss_01() {
  static const std::vector<std::pair<double, double>> rule = [] {
    using G = boost::math::quadrature::gauss<double, N>;
    std::vector<std::pair<double, double>> r;
    const auto& x = G::abscissa();
    const auto& w = G::weights();
    for (std::size_t i = 0; i < x.size(); ++i) {
      r.emplace_back(0.5 + 0.5 * x[i], 0.5 * w[i]);
      if (x[i] != 0.0) r.emplace_back(0.5 - 0.5 * x[i], 0.5 * w[i]);
    }
    return r;
  }();
  return rule;
}

struct QuadPoint {
  Vec3 x;
  double w;
};

/// Collapsed-cube rule on a tetrahedron, exact for polynomials of degree <= 2N - 3.
template <int N = 7>
std::vector<QuadPoint> tet_points(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const double jac = std::abs((b - a).cross(c - a).dot(d - a));
  std::vector<QuadPoint> pts;
  for (const auto& [u, wu] : gauss_01<N>())
    for (const auto& [v, wv] : gauss_01<N>())
      for (const auto& [w, ww] : gauss_01<N>()) {
        const double s1 = u, s2 = v * (1 - u), s3 = w * (1 - u) * (1 - v);
        pts.push_back({a + s1 * (b - a) + s2 * (c - a) + s3 * (d - a),
                       wu * wv * ww * (1 - u) * (1 - u) * (1 - v) * jac});
      }
  return pts;
}

/// Collapsed-square rule on a triangle.
template <int N = 7>
std::vector<QuadPoint> tri_points(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double jac = (b - a).cross(c - a).norm();
  std::vector<QuadPoint> pts;
  for (const auto& [u, wu] : gauss_01<N>())
    for (const auto& [v, wv] : gauss_01<N>()) {
      pts.push_back({a + u * (b - a) + v * (1 - u) * (c - a), wu * wv * (1 - u) * jac});
    }
  return pts;
}

/// Linear basis of a tet: rows of the inverse of [1 x y z] give phi = c0 + c . x.
struct Basis {
  Eigen::Matrix4d coef;  // column a holds (c0, cx, cy, cz) of phi_a

  explicit Basis(const std::array<Vec3, 4>& v) {
    Eigen::Matrix4d m;
    for (int a = 0; a < 4; ++a) m.row(a) << 1.0, v[a][0], v[a][1], v[a][2];
    coef = m.inverse();
  }
  double phi(int a, const Vec3& x) const {
    return coef(0, a) + coef(1, a) * x[0] + coef(2, a) * x[1] + coef(3, a) * x[2];
  }
  Vec3 grad(int a) const { return coef.block<3, 1>(1, a); }
};

inline std::array<Vec3, 4> corners(const TetMesh& mesh, int t) {
  const Tet& k = mesh.tet(t);
  return {mesh.node(k[0]), mesh.node(k[1]), mesh.node(k[2]), mesh.node(k[3])};
}

/// Value of a nodal field (subdomain numbering) at x inside tet t.
inline double interp(const TetMesh& mesh, const Subdomain& sd, int t, const Basis& b,
                     const Eigen::VectorXd& f, const Vec3& x) {
  double s = 0.0;
  for (int a = 0; a < 4; ++a) s += f[sd.to_local[mesh.tet(t)[a]]] * b.phi(a, x);
  return s;
}

/// Dense brute-force assembly of int k(x) B(phi_i, phi_j) over the tets of `sd`.
/// `form` receives the quadrature point, phi values and gradients at that point.
using PairForm = std::function<double(const Vec3& x, int t, const Basis& b, int i, int j)>;

inline Dense dense_assemble(const TetMesh& mesh, const Subdomain& sd, const PairForm& form) {
  Dense a = Dense::Zero(sd.size(), sd.size());
  for (int t : sd.tets) {
    const auto v = corners(mesh, t);
    const Basis basis(v);
    for (const auto& q : tet_points(v[0], v[1], v[2], v[3])) {
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          a(sd.to_local[mesh.tet(t)[i]], sd.to_local[mesh.tet(t)[j]]) += q.w * form(q.x, t, basis, i, j);
        }
    }
  }
  return a;
}

inline Dense to_dense(const Eigen::SparseMatrix<double>& m) { return Dense(m); }

inline double rel_diff(const Dense& a, const Dense& b) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  return scale == 0.0 ? 0.0 : (a - b).cwiseAbs().maxCoeff() / scale;
}

inline double rel_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  return scale == 0.0 ? 0.0 : (a - b).cwiseAbs().maxCoeff() / scale;
}

inline std::map<int, std::string> labels(std::initializer_list<std::pair<int, std::string>> l) {
  return std::map<int, std::string>(l.begin(), l.end());
}

// Artery faces not shared by two artery tets, found by brute force.
inline std::vector<Tri> brute_boundary(const TetMesh& mesh) {
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
  std::vector<Tri> out;
  for (const auto& [tri, c] : count)
    if (c == 1) out.push_back({tri[0], tri[1], tri[2]});
  return out;
}

inline Dense dense_boundary_mass(const TetMesh& mesh, const Eigen::VectorXd& coeff) {
  const Subdomain& sd = mesh.artery();
  Dense m = Dense::Zero(sd.size(), sd.size());
  for (const Tri& tri : brute_boundary(mesh)) {
    const Vec3 &a = mesh.node(tri[0]), &b = mesh.node(tri[1]), &c = mesh.node(tri[2]);
    const Vec3 n = (b - a).cross(c - a);
    // Barycentric weights on the triangle from areas.
    const auto bary = [&](const Vec3& x) {
      const double area = n.norm();
      return Eigen::Vector3d((b - x).cross(c - x).norm() / area, (c - x).cross(a - x).norm() / area,
                             (a - x).cross(b - x).norm() / area);
    };
    for (const auto& q : tri_points(a, b, c)) {
      const Eigen::Vector3d l = bary(q.x);
      double k = 0.0;
      for (int i = 0; i < 3; ++i) k += l[i] * coeff[sd.to_local[tri[i]]];
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(sd.to_local[tri[i]], sd.to_local[tri[j]]) += q.w * k * l[i] * l[j];
    }
  }
  return m;
}

/// Two tets sharing a face, both in `label`.
inline TetMesh two_tet_mesh(const std::string& label = "Blood vessels") {
  std::vector<Vec3> nodes = {Vec3(0, 0, 0), Vec3(1.0, 0.1, 0), Vec3(0.2, 0.9, 0.1), Vec3(0.1, 0.2, 1.1),
                             Vec3(0.9, 0.8, 0.9)};
  return TetMesh(nodes, {{0, 1, 2, 3}, {1, 2, 3, 4}}, {1, 1}, labels({{1, label}}),
                 CompartmentTable::defaults());
}

/// Unit cube in six Kuhn tets; the first `artery` tets are vessel, the rest grey matter.
inline TetMesh kuhn_cube(int artery, double scale = 1.0, Vec3 shift = Vec3::Zero()) {
  std::vector<Vec3> nodes;
  for (int i = 0; i < 8; ++i) nodes.push_back(scale * Vec3(i & 1, (i >> 1) & 1, (i >> 2) & 1) + shift);
  const std::vector<Tet> tets = {{0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7},
                                 {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7}};
  std::vector<int> lab(6, 2);
  for (int t = 0; t < artery; ++t) lab[t] = 1;
  return TetMesh(nodes, tets, lab, labels({{1, "Blood vessels"}, {2, "Grey matter"}}),
                 CompartmentTable::defaults());
}

/// A coarse straight vessel in a small tissue box.
inline VesselGeometry small_tube() {
  VesselGeometry g;
  g.shape = VesselGeometry::Shape::Straight;
  g.radius = 0.3e-3;
  g.length = 0.8e-3;
  g.box = Vec3(1.2e-3, 1.2e-3, 1.8e-3);
  g.edge_length = 0.15e-3;
  return g;
}

inline Eigen::VectorXd random_vector(int n, std::mt19937& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

}  // namespace vascond::test
