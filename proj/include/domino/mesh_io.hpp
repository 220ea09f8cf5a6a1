#pragma once

// Triangle surfaces: STL decoding/encoding and per-face geometry.

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "domino/error.hpp"
#include "domino/io/le.hpp"
#include "domino/vec3.hpp"

namespace domino {

using Face = std::array<std::uint32_t, 3>;

/// Triangulated geometry with derived per-face quantities. The derived arrays
/// are filled by face_properties(); parse_stl() always returns them filled.
struct TriangleSurface {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<double> face_area;
  std::vector<Vec3> face_normal;
  std::vector<Vec3> face_center;
  Vec3 center_of_mass;

  std::size_t face_count() const noexcept { return faces.size(); }
  bool empty() const noexcept { return faces.empty(); }

  double total_area() const {
    double a = 0.0;
    for (double v : face_area) a += v;
    return a;
  }
};

/// Counts gathered while decoding an STL.
struct StlReadReport {
  bool binary = false;
  std::size_t facets_read = 0;
  std::size_t degenerate_dropped = 0;
  std::size_t unique_vertices = 0;
};

inline constexpr double kDegenerateAreaFactor = 1e-12;

/// Fills area, unit normal (from vertex winding), vertex-mean center and the
/// area-weighted center of mass.
inline void face_properties(TriangleSurface& s) {
  const std::size_t n = s.faces.size();
  s.face_area.resize(n);
  s.face_normal.resize(n);
  s.face_center.resize(n);
  Vec3 weighted{};
  double total = 0.0;
  for (std::size_t f = 0; f < n; ++f) {
    const auto& [i0, i1, i2] = s.faces[f];
    if (i0 >= s.vertices.size() || i1 >= s.vertices.size() || i2 >= s.vertices.size())
      throw ContractError("face " + std::to_string(f) + " references a missing vertex");
    const Vec3& a = s.vertices[i0];
    const Vec3& b = s.vertices[i1];
    const Vec3& c = s.vertices[i2];
    const Vec3 cr = cross(b - a, c - a);
    const double len = norm(cr);
    if (!(len > 0.0)) throw Error("internal: zero-area face " + std::to_string(f) + " survived filtering");
    s.face_area[f] = 0.5 * len;
    s.face_normal[f] = cr / len;
    s.face_center[f] = (a + b + c) / 3.0;
    weighted += s.face_center[f] * s.face_area[f];
    total += s.face_area[f];
  }
  s.center_of_mass = total > 0.0 ? weighted / total : Vec3{};
}

namespace detail {

struct BitKey {
  std::array<std::uint64_t, 3> bits;
  auto operator<=>(const BitKey&) const = default;
};

inline BitKey bit_key(const Vec3& v) {
  return {{std::bit_cast<std::uint64_t>(v.x), std::bit_cast<std::uint64_t>(v.y), std::bit_cast<std::uint64_t>(v.z)}};
}

// Builds a surface from raw facet corner triples: exact-bit vertex welding,
// degenerate-face removal, derived quantities.
inline TriangleSurface assemble_surface(const std::vector<std::array<Vec3, 3>>& facets, StlReadReport& report) {
  if (facets.empty()) throw ParseError("STL contains no facets", 0);
  Vec3 lo = facets[0][0], hi = facets[0][0];
  for (const auto& t : facets)
    for (const auto& v : t) {
      lo = cwise_min(lo, v);
      hi = cwise_max(hi, v);
    }
  const double diag2 = squared_norm(hi - lo);
  const double min_area = kDegenerateAreaFactor * diag2;

  TriangleSurface s;
  std::map<BitKey, std::uint32_t> index;
  for (const auto& t : facets) {
    const double area = 0.5 * norm(cross(t[1] - t[0], t[2] - t[0]));
    if (!(area >= min_area) || area == 0.0) {
      ++report.degenerate_dropped;
      continue;
    }
    Face face{};
    for (int k = 0; k < 3; ++k) {
      auto [it, inserted] = index.try_emplace(bit_key(t[k]), static_cast<std::uint32_t>(s.vertices.size()));
      if (inserted) s.vertices.push_back(t[k]);
      face[k] = it->second;
    }
    s.faces.push_back(face);
  }
  if (s.faces.empty()) throw ParseError("STL contains only degenerate facets", 0);
  report.unique_vertices = s.vertices.size();
  face_properties(s);
  return s;
}

inline bool looks_ascii(std::span<const unsigned char> bytes) {
  constexpr std::string_view kSolid = "solid";
  std::size_t i = 0;
  while (i < bytes.size() && std::isspace(bytes[i])) ++i;
  if (bytes.size() - i < kSolid.size()) return false;
  if (!std::equal(kSolid.begin(), kSolid.end(), bytes.begin() + static_cast<std::ptrdiff_t>(i))) return false;
  // Binary files may also begin with "solid"; a consistent binary size wins.
  if (bytes.size() >= 84) {
    const auto count = io::load_le<std::uint32_t>(bytes.data() + 80);
    if (bytes.size() == 84 + 50ull * count) return false;
  }
  return true;
}

class AsciiCursor {
 public:
  explicit AsciiCursor(std::span<const unsigned char> b) : bytes_(b) {}

  std::string_view next() {
    while (pos_ < bytes_.size() && std::isspace(bytes_[pos_])) ++pos_;
    start_ = pos_;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) ++pos_;
    return {reinterpret_cast<const char*>(bytes_.data()) + start_, pos_ - start_};
  }

  void expect(std::string_view word) {
    const auto tok = next();
    if (tok != word)
      throw ParseError("expected '" + std::string(word) + "' but found '" + std::string(tok) + "'", start_);
  }

  double number() {
    const auto tok = next();
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size())
      throw ParseError("invalid number '" + std::string(tok) + "'", start_);
    // STL coordinates are single precision; match the binary path.
    return static_cast<double>(static_cast<float>(v));
  }

  void skip_line() {
    while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
  }
  std::size_t token_start() const { return start_; }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
  std::size_t start_ = 0;
};

inline std::vector<std::array<Vec3, 3>> read_ascii_facets(std::span<const unsigned char> bytes) {
  AsciiCursor cur(bytes);
  cur.expect("solid");
  cur.skip_line();  // optional solid name
  std::vector<std::array<Vec3, 3>> facets;
  for (;;) {
    const auto tok = cur.next();
    if (tok == "endsolid") break;
    if (tok.empty()) throw ParseError("truncated ASCII STL: missing 'endsolid'", cur.token_start());
    if (tok != "facet") throw ParseError("expected 'facet' but found '" + std::string(tok) + "'", cur.token_start());
    cur.expect("normal");
    for (int k = 0; k < 3; ++k) cur.number();
    cur.expect("outer");
    cur.expect("loop");
    std::array<Vec3, 3> t{};
    for (int k = 0; k < 3; ++k) {
      const auto v = cur.next();
      if (v != "vertex") {
        if (v == "endloop")
          throw ParseError("facet has " + std::to_string(k) + " vertices, expected 3", cur.token_start());
        throw ParseError("expected 'vertex' but found '" + std::string(v) + "'", cur.token_start());
      }
      t[k].x = cur.number();
      t[k].y = cur.number();
      t[k].z = cur.number();
    }
    const auto end = cur.next();
    if (end == "vertex") throw ParseError("facet has more than 3 vertices", cur.token_start());
    if (end != "endloop") throw ParseError("expected 'endloop' but found '" + std::string(end) + "'", cur.token_start());
    cur.expect("endfacet");
    facets.push_back(t);
  }
  return facets;
}

inline std::vector<std::array<Vec3, 3>> read_binary_facets(std::span<const unsigned char> bytes) {
  if (bytes.size() < 84) throw ParseError("truncated binary STL header", bytes.size());
  const std::uint64_t count = io::load_le<std::uint32_t>(bytes.data() + 80);
  const std::uint64_t expected = 84 + 50 * count;
  if (bytes.size() < expected) {
    const std::size_t complete = (bytes.size() - 84) / 50;
    throw ParseError("truncated binary STL: header declares " + std::to_string(count) + " facets, file holds " +
                         std::to_string(complete),
                     84 + 50 * complete);
  }
  if (bytes.size() > expected)
    throw ParseError("facet count mismatch: header declares " + std::to_string(count) + " facets but " +
                         std::to_string(bytes.size() - expected) + " trailing bytes remain",
                     expected);
  std::vector<std::array<Vec3, 3>> facets(count);
  for (std::uint64_t f = 0; f < count; ++f) {
    const unsigned char* rec = bytes.data() + 84 + 50 * f + 12;  // skip stored normal
    for (int k = 0; k < 3; ++k) {
      facets[f][k] = {io::load_f32(rec + 12 * k), io::load_f32(rec + 12 * k + 4), io::load_f32(rec + 12 * k + 8)};
    }
  }
  return facets;
}

}  // namespace detail

/// Decodes binary or ASCII STL. Vertices are welded by exact bit equality and
/// faces smaller than 1e-12 * (bbox diagonal)^2 are dropped.
inline TriangleSurface parse_stl(std::span<const unsigned char> bytes, StlReadReport* report = nullptr) {
  StlReadReport local;
  StlReadReport& r = report ? *report : local;
  r = {};
  std::vector<std::array<Vec3, 3>> facets;
  if (detail::looks_ascii(bytes)) {
    facets = detail::read_ascii_facets(bytes);
  } else {
    r.binary = true;
    facets = detail::read_binary_facets(bytes);
  }
  r.facets_read = facets.size();
  return detail::assemble_surface(facets, r);
}

inline TriangleSurface parse_stl(std::string_view bytes, StlReadReport* report = nullptr) {
  return parse_stl(std::span(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()), report);
}

/// Encodes as binary STL (float32 payload, stored normals from face_normal).
inline std::string write_stl_binary(const TriangleSurface& s, std::string_view header = "domino") {
  std::string out(80, '\0');
  std::copy_n(header.begin(), std::min<std::size_t>(header.size(), 80), out.begin());
  io::store_le(out, static_cast<std::uint32_t>(s.faces.size()));
  for (std::size_t f = 0; f < s.faces.size(); ++f) {
    const Vec3 n = f < s.face_normal.size() ? s.face_normal[f] : Vec3{};
    for (int k = 0; k < 3; ++k) io::store_f32(out, static_cast<float>(n[k]));
    for (auto vi : s.faces[f])
      for (int k = 0; k < 3; ++k) io::store_f32(out, static_cast<float>(s.vertices[vi][k]));
    io::store_le(out, std::uint16_t{0});
  }
  return out;
}

}  // namespace domino
