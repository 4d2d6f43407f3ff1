#include "vascond/error.hpp"
#include "vascond/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

namespace vascond {

namespace {

// Nodes closer than this fraction of an edge to the vessel surface are moved
// onto it instead of cutting the edge, which avoids slivers.
constexpr double kSnapFraction = 0.2;
// A snap is undone if it shrinks any adjacent tet below this fraction of its
// lattice volume.
constexpr double kSnapMinVolumeRatio = 0.05;
// Cut points are kept this far from the edge ends.
constexpr double kMinCutFraction = 1e-3;

double capsule_distance(const Vec3& p, const Vec3& a, const Vec3& b, double r) {
  // Exact signed distance to a flat-capped cylinder.
  const Vec3 ba = b - a;
  const Vec3 pa = p - a;
  const double baba = ba.dot(ba);
  const double paba = pa.dot(ba);
  const double x = (pa * baba - ba * paba).norm() - r * baba;
  const double y = std::abs(paba - baba * 0.5) - baba * 0.5;
  const double x2 = x * x;
  const double y2 = y * y * baba;
  const double d = std::max(x, y) < 0.0 ? -std::min(x2, y2 ) : (x > 0.0 ? x2 : 0.0) + (y > 0.0 ? y2 : 0.0);
  return std::copysign(std::sqrt(std::abs(d)), d) / baba;
}

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

struct Builder {
  std::vector<Vec3> nodes;
  std::vector<Tet> tets;
  std::vector<int> labels;

  void add(int label, int a, int b, int c, int d) {
    tets.push_back({a, b, c, d});
    labels.push_back(label);
  }

  // Pyramid with quad base q (cyclic order) and apex z. The base diagonal starts
  // at the smallest node id so neighbouring elements agree on it.
  void pyramid(int label, int z, std::array<int, 4> q) {
    const int m = static_cast<int>(std::min_element(q.begin(), q.end()) - q.begin());
    std::rotate(q.begin(), q.begin() + (m % 2), q.end());
    add(label, z, q[0], q[1], q[2]);
    add(label, z, q[0], q[2], q[3]);
  }

  // Prism with triangles a and b, a[i]-b[i] being the lateral edges.
  void prism(int label, std::array<int, 3> a, std::array<int, 3> b) {
    int lo = 0;
    bool top = false;
    int smallest = a[0];
    for (int i = 0; i < 3; ++i) {
      if (a[i] < smallest) smallest = a[i], lo = i, top = false;
      if (b[i] < smallest) smallest = b[i], lo = i, top = true;
    }
    if (top) std::swap(a, b);
    std::rotate(a.begin(), a.begin() + lo, a.end());
    std::rotate(b.begin(), b.begin() + lo, b.end());
    // a[0] is the minimum, so both lateral quads through it are split from a[0].
    add(label, a[0], b[0], b[1], b[2]);
    pyramid(label, a[0], {a[1], a[2], b[2], b[1]});
  }
};

}  // namespace

std::vector<std::pair<Vec3, Vec3>> VesselGeometry::branches() const {
  if (shape == Shape::Straight) {
    return {{Vec3(0, 0, -0.5 * length), Vec3(0, 0, 0.5 * length)}};
  }
  const double half = 0.5 * bifurcation_angle_deg * std::numbers::pi / 180.0;
  const double height = length + branch_length * std::cos(half);
  const Vec3 inlet(0, 0, -0.5 * height);
  const Vec3 junction = inlet + Vec3(0, 0, length);
  const Vec3 left = junction + branch_length * Vec3(-std::sin(half), 0, std::cos(half));
  const Vec3 right = junction + branch_length * Vec3(std::sin(half), 0, std::cos(half));
  return {{inlet, junction}, {junction, left}, {junction, right}};
}

Vec3 VesselGeometry::inlet_center() const { return branches().front().first; }

double VesselGeometry::signed_distance(const Vec3& x) const {
  double d = std::numeric_limits<double>::infinity();
  const auto axes = branches();
  for (const auto& [a, b] : axes) d = std::min(d, capsule_distance(x, a, b, radius));
  if (shape == Shape::YBifurcation) {
    // Fill the wedge left between the flat caps at the junction.
    d = std::min(d, (x - axes.front().second).norm() - radius);
  }
  return d;
}

TetMesh generate_synthetic_vessel(const VesselGeometry& g, const CompartmentTable& table) {
  const double half_width = 0.5 * g.box.minCoeff();
  if (!(g.radius > 0.0) || g.radius >= half_width) {
    throw InputError("infeasible geometry: tube radius must be in (0, box half-width)");
  }
  if (!(g.length > 0.0) || (g.shape == VesselGeometry::Shape::YBifurcation &&
                             !(g.branch_length > 0.0 && g.bifurcation_angle_deg > 0.0 &&
                               g.bifurcation_angle_deg < 180.0))) {
    throw InputError("infeasible geometry: lengths must be positive and the angle in (0, 180)");
  }
  if (!(g.edge_length > 0.0) || 2.0 * g.radius / g.edge_length < 4.0) {
    throw InputError("edge length too coarse: fewer than 4 elements across the tube diameter");
  }
  if (!table.find(g.tissue_label)) {
    throw InputError("unknown compartment label '" + g.tissue_label + "'");
  }
  // The vessel must sit inside the box with at least one element of tissue around it.
  const Vec3 limit = 0.5 * g.box - Vec3::Constant(g.edge_length);
  for (const auto& [a, b] : g.branches()) {
    for (const Vec3& p : {a, b}) {
      if (((p.cwiseAbs() + Vec3::Constant(g.radius)).array() > limit.array()).any()) {
        throw InputError("infeasible geometry: vessel does not fit inside the tissue box");
      }
    }
  }

  // Structured lattice, each cube split into six tets around its main diagonal.
  const Eigen::Vector3i n = (g.box / g.edge_length).array().ceil().cast<int>();
  const Vec3 step = g.box.cwiseQuotient(n.cast<double>());
  const Vec3 origin = -0.5 * g.box;
  auto lattice_id = [&](int i, int j, int k) { return (k * (n.y() + 1) + j) * (n.x() + 1) + i; };

  Builder out;
  out.nodes.reserve(static_cast<std::size_t>((n.x() + 1) * (n.y() + 1) * (n.z() + 1)));
  for (int k = 0; k <= n.z(); ++k)
    for (int j = 0; j <= n.y(); ++j)
      for (int i = 0; i <= n.x(); ++i)
        out.nodes.push_back(origin + Vec3(i * step.x(), j * step.y(), k * step.z()));

  static constexpr std::array<std::array<int, 3>, 6> kPerms = {
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  std::vector<Tet> lattice;
  lattice.reserve(static_cast<std::size_t>(n.prod()) * 6);
  for (int k = 0; k < n.z(); ++k)
    for (int j = 0; j < n.y(); ++j)
      for (int i = 0; i < n.x(); ++i)
        for (const auto& perm : kPerms) {
          Eigen::Vector3i c(i, j, k);
          Tet t;
          t[0] = lattice_id(c.x(), c.y(), c.z());
          for (int s = 0; s < 3; ++s) {
            c[perm[s]] += 1;
            t[s + 1] = lattice_id(c.x(), c.y(), c.z());
          }
          const auto& x = out.nodes;
          if (signed_tet_volume(x[t[0]], x[t[1]], x[t[2]], x[t[3]]) < 0.0) std::swap(t[2], t[3]);
          lattice.push_back(t);
        }

  const int lattice_nodes = static_cast<int>(out.nodes.size());
  std::vector<double> phi(lattice_nodes);
  for (int i = 0; i < lattice_nodes; ++i) phi[i] = g.signed_distance(out.nodes[i]);

  auto root = [&](const Vec3& a, double fa, const Vec3& b) {
    // Bisection for the surface crossing on [a, b]; returns the fraction from a.
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = g.signed_distance(a + mid * (b - a));
      if ((fm < 0.0) == (fa < 0.0)) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  };

  // Snap nodes that lie close to the surface along some crossing edge.
  std::vector<double> snap_dist(lattice_nodes, std::numeric_limits<double>::infinity());
  std::vector<Vec3> snap_to(lattice_nodes);
  static constexpr std::array<std::array<int, 2>, 6> kEdges = {
      {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
  for (const Tet& t : lattice) {
    for (const auto& e : kEdges) {
      const int a = t[e[0]], b = t[e[1]];
      if (!((phi[a] < 0.0 && phi[b] > 0.0) || (phi[a] > 0.0 && phi[b] < 0.0))) continue;
      const Vec3& xa = out.nodes[a];
      const Vec3& xb = out.nodes[b];
      const double s = root(xa, phi[a], xb);
      const double len = (xb - xa).norm();
      const Vec3 p = xa + s * (xb - xa);
      if (s < kSnapFraction && s * len < snap_dist[a]) snap_dist[a] = s * len, snap_to[a] = p;
      if (s > 1.0 - kSnapFraction && (1.0 - s) * len < snap_dist[b]) {
        snap_dist[b] = (1.0 - s) * len;
        snap_to[b] = p;
      }
    }
  }
  std::vector<Vec3> original(out.nodes.begin(), out.nodes.end());
  std::vector<char> snapped(lattice_nodes, 0);
  for (int i = 0; i < lattice_nodes; ++i) {
    if (std::isfinite(snap_dist[i])) {
      snapped[i] = 1;
      out.nodes[i] = snap_to[i];
    }
  }
  // Undo snaps that flatten or invert a tet, repeating until every tet is sound.
  const double lattice_volume = step.prod() / 6.0;
  for (bool changed = true; changed;) {
    changed = false;
    for (const Tet& t : lattice) {
      const auto& x = out.nodes;
      if (signed_tet_volume(x[t[0]], x[t[1]], x[t[2]], x[t[3]]) >=
          kSnapMinVolumeRatio * lattice_volume) {
        continue;
      }
      int worst = -1;
      double worst_move = -1.0;
      for (int v : t) {
        const double move = (out.nodes[v] - original[v]).norm();
        if (snapped[v] && move > worst_move) worst = v, worst_move = move;
      }
      if (worst < 0) continue;
      snapped[worst] = 0;
      out.nodes[worst] = original[worst];
      changed = true;
    }
  }
  for (int i = 0; i < lattice_nodes; ++i) {
    if (snapped[i]) phi[i] = 0.0;
  }

  const int kVessel = 0, kTissue = 1;
  std::unordered_map<std::uint64_t, int> cuts;
  auto cut = [&](int a, int b) {
    const auto key = edge_key(a, b);
    if (auto it = cuts.find(key); it != cuts.end()) return it->second;
    const int lo = std::min(a, b), hi = std::max(a, b);
    const Vec3 xa = out.nodes[lo], xb = out.nodes[hi];
    const double s = std::clamp(root(xa, phi[lo], xb), kMinCutFraction, 1.0 - kMinCutFraction);
    const int id = static_cast<int>(out.nodes.size());
    out.nodes.push_back(xa + s * (xb - xa));
    cuts.emplace(key, id);
    return id;
  };

  for (const Tet& t : lattice) {
    std::vector<int> neg, zero, pos;
    for (int v : t) (phi[v] < 0.0 ? neg : phi[v] > 0.0 ? pos : zero).push_back(v);

    if (neg.empty() || pos.empty()) {
      int label = !neg.empty() ? kVessel : !pos.empty() ? kTissue : -1;
      if (label < 0) {
        const Vec3 c = 0.25 * (out.nodes[t[0]] + out.nodes[t[1]] + out.nodes[t[2]] + out.nodes[t[3]]);
        label = g.signed_distance(c) < 0.0 ? kVessel : kTissue;
      }
      out.add(label, t[0], t[1], t[2], t[3]);
      continue;
    }

    const bool lone_negative = neg.size() == 1;
    const auto& lone = lone_negative ? neg : pos;
    const auto& many = lone_negative ? pos : neg;
    const int lone_label = lone_negative ? kVessel : kTissue;
    const int many_label = lone_negative ? kTissue : kVessel;

    if (neg.size() == 2 && pos.size() == 2) {
      const int a = neg[0], b = neg[1], c = pos[0], d = pos[1];
      const int ac = cut(a, c), ad = cut(a, d), bc = cut(b, c), bd = cut(b, d);
      out.prism(kVessel, {a, ac, ad}, {b, bc, bd});
      out.prism(kTissue, {c, ac, bc}, {d, ad, bd});
    } else if (zero.empty()) {
      // One vertex against three.
      const int v = lone[0];
      const int c0 = cut(v, many[0]), c1 = cut(v, many[1]), c2 = cut(v, many[2]);
      out.add(lone_label, v, c0, c1, c2);
      out.prism(many_label, {c0, c1, c2}, {many[0], many[1], many[2]});
    } else if (zero.size() == 1) {
      // One vertex against two, with a vertex on the surface.
      const int v = lone[0], z = zero[0];
      const int c0 = cut(v, many[0]), c1 = cut(v, many[1]);
      out.add(lone_label, v, z, c0, c1);
      out.pyramid(many_label, z, {c0, many[0], many[1], c1});
    } else {
      // Two vertices on the surface, one on each side.
      const int c = cut(neg[0], pos[0]);
      out.add(kVessel, neg[0], zero[0], zero[1], c);
      out.add(kTissue, pos[0], zero[0], zero[1], c);
    }
  }

  std::map<int, std::string> names{{kVessel, std::string(kVesselCompartment)},
                                   {kTissue, g.tissue_label}};
  return TetMesh(std::move(out.nodes), std::move(out.tets), std::move(out.labels), std::move(names),
                 table);
}

}  // namespace vascond
