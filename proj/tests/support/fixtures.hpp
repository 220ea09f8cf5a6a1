#pragma once

#include <array>
#include <string>
#include <vector>

#include "domino/io/le.hpp"
#include "domino/mesh_io.hpp"

namespace domino::testkit {

/// Binary STL from raw corner triples (stored normals left zero).
inline std::string binary_stl(const std::vector<std::array<Vec3, 3>>& tris) {
  std::string out(80, ' ');
  io::store_le(out, static_cast<std::uint32_t>(tris.size()));
  for (const auto& t : tris) {
    for (int k = 0; k < 3; ++k) io::store_f32(out, 0.0f);
    for (const auto& v : t)
      for (int k = 0; k < 3; ++k) io::store_f32(out, static_cast<float>(v[k]));
    io::store_le(out, std::uint16_t{0});
  }
  return out;
}

/// Unit cube [0,1]^3 as 12 outward-wound triangles.
inline std::vector<std::array<Vec3, 3>> unit_cube_triangles() {
  const Vec3 p[8] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  const int quads[6][4] = {{0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4}, {2, 3, 7, 6}, {1, 2, 6, 5}, {0, 4, 7, 3}};
  std::vector<std::array<Vec3, 3>> tris;
  for (const auto& q : quads) {
    tris.push_back({p[q[0]], p[q[1]], p[q[2]]});
    tris.push_back({p[q[0]], p[q[2]], p[q[3]]});
  }
  return tris;
}

inline TriangleSurface surface_from_triangles(const std::vector<std::array<Vec3, 3>>& tris) {
  return parse_stl(binary_stl(tris));
}

}  // namespace domino::testkit
