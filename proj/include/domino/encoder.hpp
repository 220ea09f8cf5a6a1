#pragma once

// Global geometry encoding: multi-scale point convolution onto the surface-box
// and domain grids, CNN propagation of the surface-box features into the
// domain, and assembly with the signed distance channels.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "domino/nn/conv_block.hpp"
#include "domino/nn/mlp.hpp"
#include "domino/spatial.hpp"

namespace domino {

struct EncoderConfig {
  int m = 8;
  int f = 4;
  std::vector<double> radii{0.05, 0.15, 0.40};  // fractions of the surface-box diagonal
  int n_y = 16;
  int kernel_hidden = 16;
  int n_iter = 3;
  std::optional<double> tau;
  nn::Activation activation = nn::Activation::kRelu;

  std::size_t scales() const { return radii.size(); }
  std::size_t learned_channels() const { return static_cast<std::size_t>(f) * radii.size(); }
  std::size_t channels() const { return 2 * learned_channels() + 4; }
  nn::MlpSpec kernel_spec() const {
    return {{7, static_cast<std::size_t>(kernel_hidden), static_cast<std::size_t>(f)}, activation};
  }

  void validate() const {
    if (m < 8 || m % 2 != 0) throw ValidationError("encoder.m must be even and >= 8, got " + std::to_string(m));
    if (f < 1) throw ValidationError("encoder.f must be >= 1");
    if (radii.empty()) throw ValidationError("encoder.radii must not be empty");
    for (std::size_t i = 0; i < radii.size(); ++i) {
      if (!(radii[i] > 0.0)) throw ValidationError("encoder.radii must be positive");
      if (i > 0 && !(radii[i] > radii[i - 1])) throw ValidationError("encoder.radii must be strictly increasing");
    }
    if (n_y < 1) throw ValidationError("encoder.n_y must be >= 1");
    if (kernel_hidden < 1) throw ValidationError("encoder.kernel_hidden must be >= 1");
    if (n_iter < 1) throw ValidationError("encoder.n_iter must be >= 1");
    if (tau && !(*tau > 0.0)) throw ValidationError("encoder.tau must be positive when set");
  }
};

/// Everything about one geometry that does not depend on learned parameters.
struct GeometryFrame {
  BoundingBox surface_box;
  BoundingBox domain_box;
  GridGeometry surface_grid;
  GridGeometry domain_grid;
  StructuredGrid sdf;  // on domain_grid, channels {sdf, dx, dy, dz}
  Vec3 center_of_mass;

  double radius(const EncoderConfig& cfg, std::size_t scale) const { return cfg.radii[scale] * surface_box.diagonal(); }
};

inline GeometryFrame make_geometry_frame(const TriangleSurface& surface, const BoundingBox& surface_box,
                                         const BoundingBox& domain_box, int m) {
  if (!surface_box.valid() || !domain_box.valid()) throw ContractError("geometry frame needs non-degenerate boxes");
  GeometryFrame g{surface_box, domain_box, GridGeometry(surface_box, m), GridGeometry(domain_box, m), {}, surface.center_of_mass};
  g.sdf = compute_sdf_grid(surface, g.domain_grid);
  return g;
}

inline GeometryFrame make_geometry_frame(const TriangleSurface& surface, int m, FlowAxis flow = {}, const TrimFactors& trim = {}) {
  if (surface.empty()) throw ContractError("geometry frame of an empty surface needs explicit boxes");
  const BoundingBox sb = bounding_box(surface);
  return make_geometry_frame(surface, sb, make_domain_box(sb, flow, trim), m);
}

/// Ball-query pairs feeding the point-convolution kernel, grouped by grid node.
struct ProjectionPairs {
  std::vector<double> features;      // [pairs, 7]: x_i, x_j, d_ij
  std::vector<std::size_t> offsets;  // node -> first pair, size nodes+1
};

inline ProjectionPairs gather_projection_pairs(const NeighborIndex& index, const GridGeometry& grid, double radius, int n_y) {
  ProjectionPairs pairs;
  const std::size_t nodes = grid.node_count();
  pairs.offsets.reserve(nodes + 1);
  pairs.offsets.push_back(0);
  std::vector<Neighbor> found;
  const auto pts = index.points();
  for (std::size_t n = 0; n < nodes; ++n) {
    const Vec3 x = grid.node(n);
    if (!pts.empty()) index.ball_query(x, radius, static_cast<std::size_t>(n_y), found);
    else found.clear();
    for (const auto& nb : found) {
      const Vec3& y = pts[nb.index];
      pairs.features.insert(pairs.features.end(), {x.x, x.y, x.z, y.x, y.y, y.z, nb.distance});
    }
    pairs.offsets.push_back(pairs.features.size() / 7);
  }
  return pairs;
}

/// y_i = sum over the (at most n_y) nearest points within `radius` of node i
/// of kernel(x_i, x_j, d_ij). Nodes without neighbours get zero.
inline nn::Var project_points_to_grid(nn::Tape& t, nn::ParamStore& store, const std::string& kernel, const nn::MlpSpec& spec,
                                      const NeighborIndex& index, const GridGeometry& grid, double radius, int n_y) {
  ProjectionPairs pairs = gather_projection_pairs(index, grid, radius, n_y);
  const std::size_t n_pairs = pairs.offsets.back();
  if (n_pairs == 0) return t.constant({grid.node_count(), spec.out()}, std::vector<double>(grid.node_count() * spec.out(), 0.0));
  const nn::Var in = t.constant({n_pairs, 7}, std::move(pairs.features));
  return nn::segment_sum(t, nn::mlp_forward(t, spec, store, kernel, in), std::move(pairs.offsets));
}

/// All scales side by side: [nodes, f * scales].
inline nn::Var project_multiscale(nn::Tape& t, nn::ParamStore& store, const std::string& prefix, const EncoderConfig& cfg,
                                  std::span<const Vec3> cloud, const GridGeometry& grid, const GeometryFrame& frame) {
  std::vector<nn::Var> parts;
  for (std::size_t s = 0; s < cfg.scales(); ++s) {
    const double r = frame.radius(cfg, s);
    const NeighborIndex index(cloud, r);
    parts.push_back(project_points_to_grid(t, store, prefix + ".r" + std::to_string(s), cfg.kernel_spec(), index, grid, r, cfg.n_y));
  }
  return parts.size() == 1 ? parts.front() : nn::concat_cols(t, parts);
}

struct Propagation {
  nn::Var state;
  int iterations = 0;
  std::vector<double> residuals;  // after each block application
};

/// Root-mean-square difference over nodes inside `support` and all channels.
inline double support_residual(const std::vector<double>& a, const std::vector<double>& b, const GridGeometry& grid,
                               const BoundingBox& support, std::size_t channels) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    if (!support.contains(grid.node(n))) continue;
    for (std::size_t c = 0; c < channels; ++c) {
      const double d = a[n * channels + c] - b[n * channels + c];
      sum += d * d;
    }
    count += channels;
  }
  return count == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(count));
}

/// Resamples the surface-box features into the domain grid (zero outside the
/// surface box), then applies `block` up to n_iter times, stopping early once
/// the residual against the resampled features drops below tau.
template <class Block>
Propagation propagate_surface_to_domain(nn::Tape& t, nn::Var surface_features, const GeometryFrame& frame, int n_iter,
                                        std::optional<double> tau, Block&& block) {
  if (frame.surface_grid.res != frame.domain_grid.res) throw ContractError("surface and domain grids must share a resolution");
  const std::vector<Vec3> nodes = frame.domain_grid.nodes();
  const nn::Var seed = nn::grid_sample(t, surface_features, frame.surface_grid, nodes, frame.surface_box);
  const std::size_t c = t.cols(seed);
  Propagation out{seed, 0, {}};
  for (int it = 0; it < n_iter; ++it) {
    out.state = block(t, out.state);
    ++out.iterations;
    out.residuals.push_back(support_residual(t.value(out.state), t.value(seed), frame.domain_grid, frame.surface_box, c));
    if (tau && out.residuals.back() < *tau) break;
  }
  return out;
}

inline Propagation propagate_surface_to_domain(nn::Tape& t, nn::ParamStore& store, const std::string& block_prefix,
                                               nn::Var surface_features, const GeometryFrame& frame, int n_iter,
                                               std::optional<double> tau) {
  const nn::GridDims dims = frame.domain_grid.res;
  return propagate_surface_to_domain(t, surface_features, frame, n_iter, tau, [&](nn::Tape& tp, nn::Var x) {
    return nn::conv_block_forward(tp, store, block_prefix, x, dims);
  });
}

/// [direct | propagated | sdf | grad sdf] on the domain grid.
inline nn::Var assemble_global_encoding(nn::Tape& t, const EncoderConfig& cfg, nn::Var direct, nn::Var propagated,
                                        const StructuredGrid& sdf) {
  const std::size_t n = sdf.geometry.node_count();
  if (sdf.channels != 4) throw ContractError("sdf grid must have 4 channels");
  if (t.cols(direct) != cfg.learned_channels() || t.cols(propagated) != cfg.learned_channels())
    throw ContractError("encoding channels " + std::to_string(t.cols(direct)) + "/" + std::to_string(t.cols(propagated)) +
                        " do not match f*|radii| = " + std::to_string(cfg.learned_channels()));
  if (t.rows(direct) != n || t.rows(propagated) != n) throw ContractError("encoding grids differ in node count");
  return nn::concat_cols(t, {direct, propagated, t.constant({n, 4}, sdf.data)});
}

inline void init_encoder(nn::ParamStore& store, const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  for (std::size_t s = 0; s < cfg.scales(); ++s) {
    nn::init_mlp(store, "enc.direct.r" + std::to_string(s), cfg.kernel_spec(), rng);
    nn::init_mlp(store, "enc.surface.r" + std::to_string(s), cfg.kernel_spec(), rng);
  }
  nn::init_conv_block(store, "enc.block", cfg.learned_channels(), rng);
}

struct EncoderDiagnostics {
  int iterations = 0;
  std::vector<double> residuals;
};

/// Full encoder for one geometry cloud. An empty cloud carries no geometry
/// features, so the learned channels are zero and propagation is skipped.
inline nn::Var encode_geometry(nn::Tape& t, nn::ParamStore& store, const EncoderConfig& cfg, const GeometryFrame& frame,
                               std::span<const Vec3> cloud, EncoderDiagnostics* diag = nullptr) {
  const std::size_t n = frame.domain_grid.node_count();
  if (cloud.empty()) {
    const nn::Var zero = t.constant({n, cfg.learned_channels()}, std::vector<double>(n * cfg.learned_channels(), 0.0));
    if (diag) *diag = {};
    return assemble_global_encoding(t, cfg, zero, zero, frame.sdf);
  }
  const nn::Var direct = project_multiscale(t, store, "enc.direct", cfg, cloud, frame.domain_grid, frame);
  const nn::Var on_surface_box = project_multiscale(t, store, "enc.surface", cfg, cloud, frame.surface_grid, frame);
  Propagation prop = propagate_surface_to_domain(t, store, "enc.block", on_surface_box, frame, cfg.n_iter, cfg.tau);
  if (diag) *diag = {prop.iterations, prop.residuals};
  return assemble_global_encoding(t, cfg, direct, prop.state, frame.sdf);
}

}  // namespace domino
