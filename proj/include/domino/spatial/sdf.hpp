#pragma once

// Exact unsigned distance to a triangle soup plus ray-parity inside tests,
// accelerated by an AABB hierarchy, and the SDF grid built from them.

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <vector>

#include "domino/mesh_io.hpp"
#include "domino/spatial/grid.hpp"

namespace domino {

/// Closest point on triangle (a,b,c) to p (Voronoi-region walk).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));
  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return a + ab * v + ac * w;
}

inline double point_triangle_distance(const Vec3& p, const TriangleSurface& s, std::size_t face) {
  const auto& f = s.faces[face];
  return distance(p, closest_point_on_triangle(p, s.vertices[f[0]], s.vertices[f[1]], s.vertices[f[2]]));
}

/// Counts whether the ray p + t*e_axis (t > 0) crosses the triangle.
inline bool axis_ray_hits_triangle(const Vec3& p, int axis, const Vec3& a, const Vec3& b, const Vec3& c) {
  Vec3 dir{};
  dir[axis] = 1.0;
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pv = cross(dir, e2);
  const double det = dot(e1, pv);
  if (det == 0.0) return false;
  const double inv = 1.0 / det;
  const Vec3 tv = p - a;
  const double u = dot(tv, pv) * inv;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 qv = cross(tv, e1);
  const double v = dot(dir, qv) * inv;
  if (v < 0.0 || u + v > 1.0) return false;
  return dot(e2, qv) * inv > 0.0;
}

/// Bounding-volume hierarchy over the faces of a surface. Holds a reference;
/// the surface must outlive it.
class SurfaceLocator {
 public:
  explicit SurfaceLocator(const TriangleSurface& s) : surface_(&s) {
    order_.resize(s.faces.size());
    std::iota(order_.begin(), order_.end(), 0u);
    boxes_.resize(s.faces.size());
    for (std::size_t f = 0; f < s.faces.size(); ++f) {
      const auto& t = s.faces[f];
      BoundingBox b{s.vertices[t[0]], s.vertices[t[0]]};
      for (int k = 1; k < 3; ++k) {
        b.min = cwise_min(b.min, s.vertices[t[k]]);
        b.max = cwise_max(b.max, s.vertices[t[k]]);
      }
      boxes_[f] = b;
    }
    if (!s.faces.empty()) {
      build(0, order_.size());
      jitter_scale_ = nodes_[0].box.diagonal();
    }
  }

  const TriangleSurface& surface() const { return *surface_; }
  bool empty() const { return surface_->faces.empty(); }

  /// Exact minimum point-to-triangle distance (infinity for an empty surface).
  double unsigned_distance(const Vec3& p) const {
    double best = std::numeric_limits<double>::infinity();
    if (nodes_.empty()) return best;
    std::vector<std::uint32_t> stack{0};
    while (!stack.empty()) {
      const Node& n = nodes_[stack.back()];
      stack.pop_back();
      // Slack keeps pruning conservative under rounding.
      if (box_distance2(n.box, p) > best * best * (1.0 + 1e-9)) continue;
      if (n.count > 0) {
        for (std::uint32_t i = n.first; i < n.first + n.count; ++i) best = std::min(best, point_triangle_distance(p, *surface_, order_[i]));
      } else {
        // Visit the nearer child first.
        const double dl = box_distance2(nodes_[n.left].box, p), dr = box_distance2(nodes_[n.right].box, p);
        if (dl < dr) {
          stack.push_back(n.right);
          stack.push_back(n.left);
        } else {
          stack.push_back(n.left);
          stack.push_back(n.right);
        }
      }
    }
    return best;
  }

  /// Parity of crossings along +axis. The ray origin is nudged sideways by a
  /// tiny incommensurate offset so rays from symmetric grid nodes do not pass
  /// exactly through mesh vertices or edges.
  bool odd_crossings(const Vec3& point, int axis) const {
    if (nodes_.empty()) return false;
    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
    Vec3 p = point;
    p[u] += 1.2345678901e-9 * jitter_scale_;
    p[v] += 2.7182818284e-9 * jitter_scale_;
    bool odd = false;
    std::vector<std::uint32_t> stack{0};
    const auto& s = *surface_;
    while (!stack.empty()) {
      const Node& n = nodes_[stack.back()];
      stack.pop_back();
      if (p[u] < n.box.min[u] || p[u] > n.box.max[u] || p[v] < n.box.min[v] || p[v] > n.box.max[v] ||
          n.box.max[axis] < p[axis])
        continue;
      if (n.count > 0) {
        for (std::uint32_t i = n.first; i < n.first + n.count; ++i) {
          const auto& f = s.faces[order_[i]];
          if (axis_ray_hits_triangle(p, axis, s.vertices[f[0]], s.vertices[f[1]], s.vertices[f[2]])) odd = !odd;
        }
      } else {
        stack.push_back(n.left);
        stack.push_back(n.right);
      }
    }
    return odd;
  }

  struct InsideVote {
    bool inside = false;
    bool unanimous = true;
  };

  /// Majority vote of the three axis-ray parities.
  InsideVote inside(const Vec3& p) const {
    int votes = 0;
    for (int a = 0; a < 3; ++a) votes += odd_crossings(p, a) ? 1 : 0;
    return {votes >= 2, votes == 0 || votes == 3};
  }

 private:
  struct Node {
    BoundingBox box;
    std::uint32_t left = 0, right = 0;
    std::uint32_t first = 0, count = 0;
  };

  static double box_distance2(const BoundingBox& b, const Vec3& p) {
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double lo = b.min[a] - p[a], hi = p[a] - b.max[a];
      const double d = std::max({lo, hi, 0.0});
      d2 += d * d;
    }
    return d2;
  }

  std::uint32_t build(std::size_t first, std::size_t last) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    BoundingBox box = boxes_[order_[first]];
    for (std::size_t i = first; i < last; ++i) {
      box.min = cwise_min(box.min, boxes_[order_[i]].min);
      box.max = cwise_max(box.max, boxes_[order_[i]].max);
    }
    nodes_[id].box = box;
    if (last - first <= 4) {
      nodes_[id].first = static_cast<std::uint32_t>(first);
      nodes_[id].count = static_cast<std::uint32_t>(last - first);
      return id;
    }
    const Vec3 e = box.extent();
    const int axis = (e.x >= e.y && e.x >= e.z) ? 0 : (e.y >= e.z ? 1 : 2);
    const std::size_t mid = (first + last) / 2;
    auto centroid = [&](std::uint32_t f) { return boxes_[f].min[axis] + boxes_[f].max[axis]; };
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(first), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(last),
                     [&](std::uint32_t a, std::uint32_t b) { return centroid(a) < centroid(b) || (centroid(a) == centroid(b) && a < b); });
    const auto l = build(first, mid);
    const auto r = build(mid, last);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  const TriangleSurface* surface_;
  std::vector<std::uint32_t> order_;
  std::vector<BoundingBox> boxes_;
  std::vector<Node> nodes_;
  double jitter_scale_ = 0.0;
};

/// Channel layout of an SDF grid.
enum SdfChannel : int { kSdf = 0, kSdfDx = 1, kSdfDy = 2, kSdfDz = 3 };

struct SdfReport {
  std::size_t vote_disagreements = 0;
  bool unsigned_fallback = false;
};

/// Fraction of grid nodes with split parity votes above which the mesh is
/// treated as open and the field left unsigned.
inline constexpr double kMaxVoteDisagreement = 0.05;

/// Signed distance (negative inside) and its central-difference gradient on
/// every node of `geometry`.
inline StructuredGrid compute_sdf_grid(const TriangleSurface& surface, const GridGeometry& geometry,
                                       SdfReport* report = nullptr) {
  for (int a = 0; a < 3; ++a)
    if (geometry.res[a] < 4) throw ContractError("SDF grid needs resolution >= 4 on every axis");
  StructuredGrid grid(geometry, 4);
  SdfReport local;
  SdfReport& rep = report ? *report : local;
  rep = {};
  const std::size_t n = geometry.node_count();
  std::vector<double> sdf(n);
  if (surface.empty()) {
    // Nothing to be inside of: a positive, finite far-field value.
    std::fill(sdf.begin(), sdf.end(), geometry.box.diagonal());
    rep.unsigned_fallback = true;
  } else {
    SurfaceLocator locator(surface);
    std::vector<char> inside(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 p = geometry.node(i);
      sdf[i] = locator.unsigned_distance(p);
      const auto vote = locator.inside(p);
      inside[i] = vote.inside;
      if (!vote.unanimous) ++rep.vote_disagreements;
    }
    if (static_cast<double>(rep.vote_disagreements) > kMaxVoteDisagreement * static_cast<double>(n)) {
      rep.unsigned_fallback = true;
      std::cerr << "warning: " << rep.vote_disagreements << " of " << n
                << " grid nodes had split inside votes; surface looks open, using unsigned distance\n";
    } else {
      for (std::size_t i = 0; i < n; ++i)
        if (inside[i]) sdf[i] = -sdf[i];
    }
  }
  const Vec3 h = geometry.cell_size();
  const auto& r = geometry.res;
  for (int i = 0; i < r[0]; ++i)
    for (int j = 0; j < r[1]; ++j)
      for (int k = 0; k < r[2]; ++k) {
        const std::size_t id = geometry.flat(i, j, k);
        grid.at(id, kSdf) = sdf[id];
        const std::array<int, 3> idx{i, j, k};
        for (int a = 0; a < 3; ++a) {
          auto at = [&](int off) {
            auto q = idx;
            q[a] += off;
            return sdf[geometry.flat(q[0], q[1], q[2])];
          };
          double g;
          if (idx[a] == 0)
            g = (at(1) - at(0)) / h[a];
          else if (idx[a] == r[a] - 1)
            g = (at(0) - at(-1)) / h[a];
          else
            g = (at(1) - at(-1)) / (2.0 * h[a]);
          grid.at(id, 1 + a) = g;
        }
      }
  return grid;
}

}  // namespace domino
