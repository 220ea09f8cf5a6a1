#pragma once

// Uniform-grid spatial hash for fixed-radius neighbor queries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "domino/error.hpp"
#include "domino/vec3.hpp"

namespace domino {

struct Neighbor {
  std::uint32_t index = 0;
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Orders neighbors by distance, then by point index.
inline bool nearer(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
}

class NeighborIndex {
 public:
  NeighborIndex() = default;

  /// `cell_edge` is normally the query radius the index is built for.
  NeighborIndex(std::span<const Vec3> points, double cell_edge)
      : points_(points.begin(), points.end()), cell_edge_(cell_edge) {
    if (!(cell_edge > 0.0)) throw ContractError("neighbor index cell edge must be positive");
    buckets_.reserve(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) buckets_[key(cell_of(points_[i]))].push_back(static_cast<std::uint32_t>(i));
  }

  std::span<const Vec3> points() const { return points_; }
  double cell_edge() const { return cell_edge_; }
  std::size_t bucket_count() const { return buckets_.size(); }

  /// Every point within `radius` of `center`, nearest first, at most
  /// `max_count` of them.
  std::vector<Neighbor> ball_query(const Vec3& center, double radius, std::size_t max_count) const {
    std::vector<Neighbor> out;
    ball_query(center, radius, max_count, out);
    return out;
  }

  void ball_query(const Vec3& center, double radius, std::size_t max_count, std::vector<Neighbor>& out) const {
    if (!(radius > 0.0)) throw ContractError("ball query radius must be positive");
    if (max_count < 1) throw ContractError("ball query max_count must be >= 1");
    out.clear();
    if (points_.empty()) return;
    const auto c = cell_of(center);
    const auto reach = static_cast<std::int64_t>(std::ceil(radius / cell_edge_));
    for (std::int64_t dx = -reach; dx <= reach; ++dx)
      for (std::int64_t dy = -reach; dy <= reach; ++dy)
        for (std::int64_t dz = -reach; dz <= reach; ++dz) {
          const auto it = buckets_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
          if (it == buckets_.end()) continue;
          for (auto idx : it->second) {
            const double d = distance(center, points_[idx]);
            if (d <= radius) out.push_back({idx, d});
          }
        }
    if (out.size() > max_count) {
      std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(max_count), out.end(), nearer);
      out.resize(max_count);
    } else {
      std::sort(out.begin(), out.end(), nearer);
    }
  }

 private:
  using Cell = std::array<std::int64_t, 3>;

  Cell cell_of(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x / cell_edge_)), static_cast<std::int64_t>(std::floor(p.y / cell_edge_)),
            static_cast<std::int64_t>(std::floor(p.z / cell_edge_))};
  }
  static std::uint64_t key(const Cell& c) {
    constexpr std::int64_t kBias = 1 << 20;
    constexpr std::uint64_t kMask = (1u << 21) - 1;
    return ((static_cast<std::uint64_t>(c[0] + kBias) & kMask) << 42) |
           ((static_cast<std::uint64_t>(c[1] + kBias) & kMask) << 21) | (static_cast<std::uint64_t>(c[2] + kBias) & kMask);
  }

  std::vector<Vec3> points_;
  double cell_edge_ = 1.0;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets_;
};

}  // namespace domino
