#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <utility>

#include "domino/mesh_io.hpp"

namespace domino {

/// Geodesic sphere from a subdivided icosahedron, outward winding.
/// subdivisions = 0 is the bare icosahedron (20 faces); each level x4.
inline TriangleSurface make_icosphere(int subdivisions, double radius = 1.0, Vec3 center = {}) {
  if (subdivisions < 0) throw ContractError("icosphere subdivisions must be >= 0");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p = p / norm(p);
  std::vector<Face> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                         {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                         {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto [it, inserted] = mid.try_emplace({key.first, key.second}, static_cast<std::uint32_t>(v.size()));
      if (inserted) {
        const Vec3 m = (v[a] + v[b]) * 0.5;
        v.push_back(m / norm(m));
      }
      return it->second;
    };
    std::vector<Face> next;
    next.reserve(f.size() * 4);
    for (const auto& [a, b, c] : f) {
      const auto ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
      next.push_back({a, ab, ca});
      next.push_back({b, bc, ab});
      next.push_back({c, ca, bc});
      next.push_back({ab, bc, ca});
    }
    f = std::move(next);
  }
  TriangleSurface s;
  s.vertices.reserve(v.size());
  for (const auto& p : v) s.vertices.push_back(center + p * radius);
  s.faces = std::move(f);
  face_properties(s);
  return s;
}

/// Applies x -> center + diag(scale) * x to every vertex and recomputes face data.
inline TriangleSurface scaled_translated(TriangleSurface s, const Vec3& scale, const Vec3& offset) {
  for (auto& p : s.vertices) p = hadamard(p, scale) + offset;
  face_properties(s);
  return s;
}

}  // namespace domino
