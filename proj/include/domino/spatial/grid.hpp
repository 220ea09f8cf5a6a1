#pragma once

// Bounding boxes, cell-centered structured grids and trilinear sampling.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "domino/error.hpp"
#include "domino/mesh_io.hpp"
#include "domino/vec3.hpp"

namespace domino {

struct BoundingBox {
  Vec3 min;
  Vec3 max;

  Vec3 extent() const { return max - min; }
  Vec3 center() const { return (min + max) * 0.5; }
  double diagonal() const { return norm(max - min); }
  bool valid() const { return max.x > min.x && max.y > min.y && max.z > min.z; }
  bool contains(const Vec3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z && p.z <= max.z;
  }
  bool contains(const BoundingBox& o) const { return contains(o.min) && contains(o.max); }
  double volume() const {
    const Vec3 e = extent();
    return e.x * e.y * e.z;
  }
};

/// Tight box around the vertices of a surface.
inline BoundingBox bounding_box(const TriangleSurface& s) {
  if (s.vertices.empty()) throw ContractError("bounding box of an empty surface");
  BoundingBox b{s.vertices[0], s.vertices[0]};
  for (const auto& v : s.vertices) {
    b.min = cwise_min(b.min, v);
    b.max = cwise_max(b.max, v);
  }
  return b;
}

/// Flow direction: an axis and a sign (+1 means flow towards +axis).
struct FlowAxis {
  int axis = 0;
  int sign = 1;
};

/// Domain extent in multiples of the body length on each axis. The lateral
/// growth is split evenly between the two sides.
struct TrimFactors {
  double upstream = 1.0;
  double downstream = 2.0;
  double lateral = 1.0;
};

inline BoundingBox make_domain_box(const BoundingBox& surface_box, FlowAxis flow, const TrimFactors& trim) {
  if (!surface_box.valid()) throw ContractError("surface box must satisfy max > min");
  if (trim.upstream < 0 || trim.downstream < 0 || trim.lateral < 0)
    throw ContractError("trim factors must be non-negative");
  if (flow.axis < 0 || flow.axis > 2 || (flow.sign != 1 && flow.sign != -1))
    throw ContractError("flow axis must be 0..2 with sign +/-1");
  BoundingBox d = surface_box;
  const Vec3 ext = surface_box.extent();
  for (int a = 0; a < 3; ++a) {
    if (a == flow.axis) {
      const double up = trim.upstream * ext[a];
      const double down = trim.downstream * ext[a];
      if (flow.sign > 0) {
        d.min[a] -= up;
        d.max[a] += down;
      } else {
        d.min[a] -= down;
        d.max[a] += up;
      }
    } else {
      d.min[a] -= 0.5 * trim.lateral * ext[a];
      d.max[a] += 0.5 * trim.lateral * ext[a];
    }
  }
  return d;
}

/// Node layout of a cell-centered grid: node (i,j,k) sits at
/// min + (i+1/2, j+1/2, k+1/2) * cell. Flat index is (i*ny + j)*nz + k.
struct GridGeometry {
  BoundingBox box;
  std::array<int, 3> res{0, 0, 0};

  GridGeometry() = default;
  GridGeometry(const BoundingBox& b, int m) : GridGeometry(b, {m, m, m}) {}
  GridGeometry(const BoundingBox& b, std::array<int, 3> r) : box(b), res(r) {
    if (!b.valid()) throw ContractError("grid box must satisfy max > min");
    if (r[0] < 1 || r[1] < 1 || r[2] < 1) throw ContractError("grid resolution must be positive");
  }

  Vec3 cell_size() const {
    const Vec3 e = box.extent();
    return {e.x / res[0], e.y / res[1], e.z / res[2]};
  }
  std::size_t node_count() const { return static_cast<std::size_t>(res[0]) * res[1] * res[2]; }
  std::size_t flat(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * res[1] + j) * res[2] + k;
  }
  Vec3 node(int i, int j, int k) const {
    const Vec3 h = cell_size();
    return {box.min.x + (i + 0.5) * h.x, box.min.y + (j + 0.5) * h.y, box.min.z + (k + 0.5) * h.z};
  }
  Vec3 node(std::size_t flat_index) const {
    const int k = static_cast<int>(flat_index % res[2]);
    const int j = static_cast<int>((flat_index / res[2]) % res[1]);
    const int i = static_cast<int>(flat_index / (static_cast<std::size_t>(res[1]) * res[2]));
    return node(i, j, k);
  }
  std::vector<Vec3> nodes() const {
    std::vector<Vec3> out;
    out.reserve(node_count());
    for (int i = 0; i < res[0]; ++i)
      for (int j = 0; j < res[1]; ++j)
        for (int k = 0; k < res[2]; ++k) out.push_back(node(i, j, k));
    return out;
  }
};

/// Channels-last field container: data[node * channels + c].
struct StructuredGrid {
  GridGeometry geometry;
  int channels = 0;
  std::vector<double> data;

  StructuredGrid() = default;
  StructuredGrid(const GridGeometry& g, int c)
      : geometry(g), channels(c), data(g.node_count() * static_cast<std::size_t>(c), 0.0) {}

  double& at(std::size_t node, int c) { return data[node * channels + c]; }
  double at(std::size_t node, int c) const { return data[node * channels + c]; }
};

/// Eight corner nodes and weights for trilinear interpolation at a point.
/// Positions beyond the outermost node centers clamp to the boundary value.
struct TrilinearStencil {
  std::array<std::size_t, 8> node{};
  std::array<double, 8> weight{};
};

inline TrilinearStencil trilinear_stencil(const GridGeometry& g, const Vec3& p) {
  const Vec3 h = g.cell_size();
  std::array<int, 3> i0{};
  std::array<double, 3> frac{};
  for (int a = 0; a < 3; ++a) {
    const int n = g.res[a];
    double t = (p[a] - g.box.min[a]) / h[a] - 0.5;
    t = std::clamp(t, 0.0, static_cast<double>(n - 1));
    int base = static_cast<int>(std::floor(t));
    if (base > n - 2) base = std::max(n - 2, 0);
    i0[a] = base;
    frac[a] = n > 1 ? t - base : 0.0;
  }
  TrilinearStencil s;
  int c = 0;
  for (int di = 0; di < 2; ++di)
    for (int dj = 0; dj < 2; ++dj)
      for (int dk = 0; dk < 2; ++dk, ++c) {
        const int i = std::min(i0[0] + di, g.res[0] - 1);
        const int j = std::min(i0[1] + dj, g.res[1] - 1);
        const int k = std::min(i0[2] + dk, g.res[2] - 1);
        s.node[c] = g.flat(i, j, k);
        s.weight[c] = (di ? frac[0] : 1.0 - frac[0]) * (dj ? frac[1] : 1.0 - frac[1]) * (dk ? frac[2] : 1.0 - frac[2]);
      }
  return s;
}

/// Interpolates one channel of a grid at p.
inline double sample_channel(const StructuredGrid& grid, int channel, const Vec3& p) {
  const auto st = trilinear_stencil(grid.geometry, p);
  double v = 0.0;
  for (int c = 0; c < 8; ++c) v += st.weight[c] * grid.at(st.node[c], channel);
  return v;
}

}  // namespace domino
