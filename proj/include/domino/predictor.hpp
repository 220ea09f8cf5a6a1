#pragma once

// Local encoding around each query point, the computational stencil, and the
// basis/fusion networks with inverse-distance aggregation.

#include <algorithm>
#include <bit>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "domino/encoder.hpp"
#include "domino/nn/mlp.hpp"
#include "domino/spatial.hpp"

namespace domino {

enum class Mode { kSurface, kVolume };

inline const char* mode_name(Mode m) { return m == Mode::kSurface ? "surface" : "volume"; }

inline const std::vector<std::string>& variables(Mode m) {
  static const std::vector<std::string> surface{"p", "tau_x", "tau_y", "tau_z"};
  static const std::vector<std::string> volume{"p", "u_x", "u_y", "u_z", "nu_t"};
  return m == Mode::kSurface ? surface : volume;
}

inline std::size_t variable_index(Mode m, const std::string& name) {
  const auto& v = variables(m);
  const auto it = std::find(v.begin(), v.end(), name);
  if (it == v.end()) throw ValidationError(std::string("unknown ") + mode_name(m) + " variable '" + name + "'");
  return static_cast<std::size_t>(it - v.begin());
}

inline constexpr std::size_t kStencilFeatures = 10;

struct PredictorConfig {
  int l = 3;
  int n_f = 16;
  int local_hidden = 32;
  std::vector<std::size_t> basis_widths{32, 32};  // after the 10 input features
  std::vector<std::size_t> fusion_hidden{32};
  int p = 5;
  double stencil_cells = 2.0;  // r_s in units of the smallest domain cell edge
  double idw_epsilon = 1e-2;   // fraction of r_s
  nn::Activation activation = nn::Activation::kRelu;

  void validate() const {
    if (l < 1 || l % 2 == 0) throw ValidationError("predictor.l must be odd and >= 1");
    if (n_f < 1 || local_hidden < 1) throw ValidationError("predictor.n_f and predictor.local_hidden must be >= 1");
    if (basis_widths.empty()) throw ValidationError("predictor.basis_widths must not be empty");
    for (auto w : basis_widths)
      if (w == 0) throw ValidationError("predictor.basis_widths entries must be > 0");
    for (auto w : fusion_hidden)
      if (w == 0) throw ValidationError("predictor.fusion_hidden entries must be > 0");
    if (p < 0) throw ValidationError("predictor.p must be >= 0");
    if (!(stencil_cells > 0.0)) throw ValidationError("predictor.stencil_cells must be positive");
    if (!(idw_epsilon > 0.0)) throw ValidationError("predictor.idw_epsilon must be positive");
  }

  nn::MlpSpec local_spec(std::size_t global_channels) const {
    const std::size_t probes = static_cast<std::size_t>(l) * l * l;
    return {{probes * global_channels, static_cast<std::size_t>(local_hidden), static_cast<std::size_t>(n_f)}, activation};
  }
  nn::MlpSpec basis_spec() const {
    std::vector<std::size_t> w{kStencilFeatures};
    w.insert(w.end(), basis_widths.begin(), basis_widths.end());
    return {w, activation};
  }
  nn::MlpSpec fusion_spec() const {
    std::vector<std::size_t> w{basis_widths.back() + static_cast<std::size_t>(n_f)};
    w.insert(w.end(), fusion_hidden.begin(), fusion_hidden.end());
    w.push_back(1);
    return {w, activation};
  }
  double stencil_radius(const GridGeometry& domain) const {
    const Vec3 h = domain.cell_size();
    return stencil_cells * std::min({h.x, h.y, h.z});
  }
};

/// l^3 probe positions centred on `center`, spaced one cell apart per axis,
/// enumerated x-major.
inline std::vector<Vec3> probe_positions(const GridGeometry& grid, const Vec3& center, int l) {
  const Vec3 h = grid.cell_size();
  const int half = l / 2;
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(l) * l * l);
  for (int i = -half; i <= half; ++i)
    for (int j = -half; j <= half; ++j)
      for (int k = -half; k <= half; ++k) out.push_back(center + Vec3{i * h.x, j * h.y, k * h.z});
  return out;
}

/// Samples the global encoding on an l^3 lattice around each centre and maps
/// the flattened sample through `local` to an n_f vector. Probes outside the
/// domain read the boundary values.
inline nn::Var extract_local_encoding(nn::Tape& t, nn::ParamStore& store, const std::string& local, const nn::MlpSpec& spec,
                                      nn::Var global, const GridGeometry& domain, std::span<const Vec3> centers, int l) {
  if (l < 1 || l % 2 == 0) throw ContractError("local encoding lattice size must be odd and >= 1");
  const std::size_t probes = static_cast<std::size_t>(l) * l * l;
  std::vector<Vec3> pos;
  pos.reserve(centers.size() * probes);
  for (std::size_t i = 0; i < centers.size(); ++i) {
    if (!domain.box.contains(centers[i])) {
      const Vec3& c = centers[i];
      throw ValidationError("query point " + std::to_string(i) + " (" + std::to_string(c.x) + ", " + std::to_string(c.y) + ", " +
                            std::to_string(c.z) + ") lies outside the domain box");
    }
    for (const Vec3& p : probe_positions(domain, centers[i], l)) pos.push_back(p);
  }
  const nn::Var sampled = nn::grid_sample(t, global, domain, pos);
  const nn::Var flat = nn::reshape(t, sampled, {centers.size(), probes * t.cols(global)});
  return nn::mlp_forward(t, spec, store, local, flat);
}

/// Stencil of p+1 points per centre (the centre first).
struct StencilBatch {
  std::size_t p = 0;
  std::vector<Vec3> centers;
  std::vector<Vec3> points;        // centers.size() * (p+1)
  std::vector<double> features;    // points.size() * 10
  std::vector<double> distances;   // points.size()
  std::size_t size() const { return centers.size(); }
};

/// Deterministic per-point generator seed from the point's coordinates, so a
/// stencil depends only on (seed, point) and not on batching or order.
inline std::uint64_t point_seed(std::uint64_t seed, const Vec3& p) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(seed);
  for (double c : {p.x, p.y, p.z}) h = mix(h ^ std::bit_cast<std::uint64_t>(c));
  return h;
}

/// Geometry lookups needed to build stencils for one body.
class StencilSampler {
 public:
  StencilSampler(const TriangleSurface& surface, const GeometryFrame& frame, double radius)
      : surface_(&surface), frame_(&frame), radius_(radius) {
    if (!(radius > 0.0)) throw ContractError("stencil radius must be positive");
    if (!surface.empty()) faces_ = NeighborIndex(surface.face_center, radius);
  }

  double radius() const { return radius_; }

  /// Surface mode needs one normal per centre; volume mode ignores `normals`.
  StencilBatch build(Mode mode, std::span<const Vec3> centers, std::span<const Vec3> normals, std::size_t p,
                     std::uint64_t seed) const {
    if (mode == Mode::kSurface) {
      if (surface_->empty()) throw ContractError("surface stencil on an empty surface");
      if (normals.size() != centers.size()) throw ContractError("surface stencil needs one normal per centre");
    }
    StencilBatch b;
    b.p = p;
    b.centers.assign(centers.begin(), centers.end());
    const std::size_t k = p + 1;
    b.points.reserve(centers.size() * k);
    b.features.reserve(centers.size() * k * kStencilFeatures);
    b.distances.reserve(centers.size() * k);
    std::vector<Neighbor> cand;
    std::vector<double> cand_area;
    for (std::size_t i = 0; i < centers.size(); ++i) {
      const Vec3& c = centers[i];
      Rng rng(point_seed(seed, c));
      const Vec3 n0 = mode == Mode::kSurface ? normals[i] : Vec3{};
      push_point(b, c, c, n0);
      if (p == 0) continue;
      if (mode == Mode::kVolume) {
        for (std::size_t j = 0; j < p; ++j) push_point(b, c, c + uniform_in_ball(rng) * radius_, {});
        continue;
      }
      candidate_faces(c, p, cand);
      cand_area.clear();
      for (const auto& nb : cand) cand_area.push_back(surface_->face_area[nb.index]);
      const AreaCdf cdf(cand_area);
      for (std::size_t j = 0; j < p; ++j) {
        const std::size_t f = cand[cdf.pick(uniform01(rng))].index;
        push_point(b, c, uniform_point_on_face(*surface_, f, rng), surface_->face_normal[f]);
      }
    }
    return b;
  }

 private:
  static Vec3 uniform_in_ball(Rng& rng) {
    std::normal_distribution<double> g;
    const Vec3 dir = normalized_or_zero(Vec3{g(rng), g(rng), g(rng)});
    return dir * std::cbrt(uniform01(rng));
  }

  /// Faces whose centres lie within the stencil radius; when fewer than p do,
  /// the p nearest faces instead.
  void candidate_faces(const Vec3& c, std::size_t p, std::vector<Neighbor>& out) const {
    constexpr std::size_t kMaxCandidates = 64;
    faces_.ball_query(c, radius_, kMaxCandidates, out);
    if (out.size() >= p) return;
    const std::size_t want = std::min(p, surface_->face_count());
    out.clear();
    for (std::size_t f = 0; f < surface_->face_count(); ++f)
      out.push_back({static_cast<std::uint32_t>(f), distance(c, surface_->face_center[f])});
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(want), out.end(), nearer);
    out.resize(want);
  }

  void push_point(StencilBatch& b, const Vec3& center, const Vec3& x, const Vec3& normal) const {
    b.points.push_back(x);
    b.distances.push_back(distance(x, center));
    const Vec3 dir = normalized_or_zero(x - frame_->center_of_mass);
    const double sdf = sample_channel(frame_->sdf, kSdf, x);
    b.features.insert(b.features.end(), {x.x, x.y, x.z, sdf, dir.x, dir.y, dir.z, normal.x, normal.y, normal.z});
  }

  const TriangleSurface* surface_;
  const GeometryFrame* frame_;
  double radius_;
  NeighborIndex faces_;
};

/// Inverse-distance weights 1/(d + eps) for every stencil point.
inline std::vector<double> idw_weights(std::span<const double> distances, double eps) {
  std::vector<double> w(distances.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 / (distances[i] + eps);
  return w;
}

/// basis(features) ++ local encoding -> fusion -> one scalar per stencil point,
/// then the inverse-distance weighted mean over each stencil.
inline nn::Var aggregate_predict(nn::Tape& t, nn::ParamStore& store, const std::string& head, const PredictorConfig& cfg,
                                 nn::Var features, nn::Var local, std::span<const double> distances, std::size_t p,
                                 double eps) {
  const std::size_t k = p + 1;
  if (t.rows(features) != t.rows(local) * k || distances.size() != t.rows(features))
    throw ContractError("stencil features, local encodings and distances disagree in size");
  const nn::Var latent = nn::mlp_forward(t, cfg.basis_spec(), store, head + ".basis", features);
  const nn::Var joined = nn::concat_cols(t, {latent, k == 1 ? local : nn::repeat_rows(t, local, k)});
  const nn::Var s = nn::mlp_forward(t, cfg.fusion_spec(), store, head + ".fusion", joined);
  return nn::weighted_group_mean(t, s, idw_weights(distances, eps), k);
}

}  // namespace domino
