#pragma once

// Point sampling on and around a surface.

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "domino/error.hpp"
#include "domino/mesh_io.hpp"
#include "domino/spatial/grid.hpp"
#include "domino/spatial/sdf.hpp"

namespace domino {

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

struct SurfaceSample {
  Vec3 position;
  Vec3 normal;
  double area_weight = 0.0;
  std::uint32_t face = 0;
};

/// Uniform point on triangle f of s.
inline Vec3 uniform_point_on_face(const TriangleSurface& s, std::size_t f, Rng& rng) {
  double u = uniform01(rng), v = uniform01(rng);
  if (u + v > 1.0) {
    u = 1.0 - u;
    v = 1.0 - v;
  }
  const auto& t = s.faces[f];
  const Vec3& a = s.vertices[t[0]];
  return a + (s.vertices[t[1]] - a) * u + (s.vertices[t[2]] - a) * v;
}

/// Cumulative face-area table for inverse-CDF face selection.
class AreaCdf {
 public:
  explicit AreaCdf(std::span<const double> areas) : cdf_(areas.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < areas.size(); ++i) cdf_[i] = acc += areas[i];
  }
  double total() const { return cdf_.empty() ? 0.0 : cdf_.back(); }
  /// Index i with cdf[i-1] <= u*total < cdf[i].
  std::size_t pick(double u) const {
    const double target = u * total();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

/// i.i.d. area-weighted points; each carries total_area / count.
inline std::vector<SurfaceSample> sample_surface_area_weighted(const TriangleSurface& s, std::size_t count, Rng& rng) {
  if (count < 1) throw ContractError("surface sample count must be >= 1");
  if (s.empty()) throw ContractError("cannot sample an empty surface");
  AreaCdf cdf(s.face_area);
  const double w = cdf.total() / static_cast<double>(count);
  std::vector<SurfaceSample> out(count);
  for (auto& smp : out) {
    const auto f = cdf.pick(uniform01(rng));
    smp = {uniform_point_on_face(s, f, rng), s.face_normal[f], w, static_cast<std::uint32_t>(f)};
  }
  return out;
}

namespace detail {
inline std::uint64_t spread_bits(std::uint64_t v) {
  v &= 0x1fffff;
  v = (v | v << 32) & 0x1f00000000ffffULL;
  v = (v | v << 16) & 0x1f0000ff0000ffULL;
  v = (v | v << 8) & 0x100f00f00f00f00fULL;
  v = (v | v << 4) & 0x10c30c30c30c30c3ULL;
  v = (v | v << 2) & 0x1249249249249249ULL;
  return v;
}
}  // namespace detail

/// Equal-area uniform cloud by systematic sampling of the area CDF, with faces
/// visited in Morton order of their centers. Every point is marginally uniform
/// on the surface and carries total_area / count, but per-face counts deviate
/// from their expectation by less than one point, so surface integrals carry
/// far less sampling noise than with i.i.d. draws.
inline std::vector<SurfaceSample> sample_surface_stratified(const TriangleSurface& s, std::size_t count, Rng& rng) {
  if (count < 1) throw ContractError("surface sample count must be >= 1");
  if (s.empty()) throw ContractError("cannot sample an empty surface");
  BoundingBox box{s.face_center[0], s.face_center[0]};
  for (const auto& c : s.face_center) {
    box.min = cwise_min(box.min, c);
    box.max = cwise_max(box.max, c);
  }
  const Vec3 ext = box.extent();
  std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed(s.face_count());
  for (std::size_t f = 0; f < s.face_count(); ++f) {
    std::uint64_t code = 0;
    for (int a = 0; a < 3; ++a) {
      const double t = ext[a] > 0 ? (s.face_center[f][a] - box.min[a]) / ext[a] : 0.0;
      code |= detail::spread_bits(static_cast<std::uint64_t>(t * 2097151.0)) << a;
    }
    keyed[f] = {code, static_cast<std::uint32_t>(f)};
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<double> areas(keyed.size());
  for (std::size_t i = 0; i < keyed.size(); ++i) areas[i] = s.face_area[keyed[i].second];
  AreaCdf cdf(areas);
  const double w = cdf.total() / static_cast<double>(count);
  const double offset = uniform01(rng);
  std::vector<SurfaceSample> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = (static_cast<double>(i) + offset) / static_cast<double>(count);
    const auto f = keyed[cdf.pick(u)].second;
    out[i] = {uniform_point_on_face(s, f, rng), s.face_normal[f], w, f};
  }
  return out;
}

inline constexpr std::size_t kMaxVolumeOversampling = 100;

/// Uniform points in `box` outside the body (inside test by ray-parity vote).
/// `draws`, when given, receives the number of candidates drawn.
inline std::vector<Vec3> sample_volume_uniform(const BoundingBox& box, const SurfaceLocator& locator, std::size_t count,
                                               Rng& rng, std::size_t* draws = nullptr) {
  if (count < 1) throw ContractError("volume sample count must be >= 1");
  std::vector<Vec3> out;
  out.reserve(count);
  const std::size_t budget = kMaxVolumeOversampling * count;
  std::size_t drawn = 0;
  while (out.size() < count) {
    if (drawn == budget)
      throw RuntimeFailure("volume rejection sampling exhausted: accepted " + std::to_string(out.size()) + " of " +
                           std::to_string(count) + " after " + std::to_string(drawn) + " draws");
    ++drawn;
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = box.min[a] + (box.max[a] - box.min[a]) * uniform01(rng);
    if (!locator.empty() && locator.inside(p).inside) continue;
    out.push_back(p);
  }
  if (draws) *draws = drawn;
  return out;
}

inline std::vector<Vec3> sample_volume_uniform(const BoundingBox& box, const TriangleSurface& surface, std::size_t count,
                                               Rng& rng, std::size_t* draws = nullptr) {
  SurfaceLocator locator(surface);
  return sample_volume_uniform(box, locator, count, rng, draws);
}

}  // namespace domino
