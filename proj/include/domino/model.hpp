#pragma once

// The assembled model: shared encoder, surface and volume heads, target
// normalisation, and batched field prediction.

#include <algorithm>
#include <iterator>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "domino/encoder.hpp"
#include "domino/predictor.hpp"

namespace domino {

struct ModelConfig {
  EncoderConfig encoder;
  PredictorConfig predictor;
  FlowAxis flow;
  TrimFactors trim;
  std::size_t cloud_points = 1024;  // geometry nodes fed to the encoder (at most)

  void validate() const {
    encoder.validate();
    predictor.validate();
    if (flow.axis < 0 || flow.axis > 2 || (flow.sign != 1 && flow.sign != -1))
      throw ValidationError("flow axis must be 0..2 with sign +1 or -1");
    if (!(trim.upstream >= 0.0 && trim.downstream >= 0.0 && trim.lateral >= 0.0))
      throw ValidationError("trim factors must be non-negative");
    if (cloud_points < 1) throw ValidationError("cloud_points must be >= 1");
  }
};

/// Per-variable affine normalisation: model space = (physical - mean) / scale.
struct FieldStats {
  std::vector<double> mean;
  std::vector<double> scale;

  static FieldStats identity(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)}; }
  double to_model(std::size_t var, double v) const { return (v - mean[var]) / scale[var]; }
  double to_physical(std::size_t var, double v) const { return v * scale[var] + mean[var]; }
};

struct DominoModel {
  ModelConfig config;
  nn::ParamStore params;
  FieldStats surface_stats = FieldStats::identity(4);
  FieldStats volume_stats = FieldStats::identity(5);

  FieldStats& stats(Mode m) { return m == Mode::kSurface ? surface_stats : volume_stats; }
  const FieldStats& stats(Mode m) const { return m == Mode::kSurface ? surface_stats : volume_stats; }
};

inline std::string head_prefix(Mode m, const std::string& var) { return std::string("pred.") + mode_name(m) + "." + var; }
inline std::string local_prefix(Mode m) { return std::string("pred.") + mode_name(m) + ".local"; }

inline DominoModel init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  DominoModel model{cfg, {}, FieldStats::identity(4), FieldStats::identity(5)};
  Rng rng(seed);
  init_encoder(model.params, cfg.encoder, rng);
  for (Mode m : {Mode::kSurface, Mode::kVolume}) {
    nn::init_mlp(model.params, local_prefix(m), cfg.predictor.local_spec(cfg.encoder.channels()), rng);
    for (const auto& v : variables(m)) {
      nn::init_mlp(model.params, head_prefix(m, v) + ".basis", cfg.predictor.basis_spec(), rng);
      nn::init_mlp(model.params, head_prefix(m, v) + ".fusion", cfg.predictor.fusion_spec(), rng);
    }
  }
  return model;
}

/// Zeroes the last layer of every fusion network, so every prediction equals
/// the normalisation mean.
inline void zero_output_layers(DominoModel& model) {
  for (Mode m : {Mode::kSurface, Mode::kVolume})
    for (const auto& v : variables(m))
      nn::zero_final_layer(model.params, head_prefix(m, v) + ".fusion", model.config.predictor.fusion_spec());
}

/// Parameter-independent preprocessing of one body. Holds internal pointers,
/// so it is neither copyable nor movable.
class PreparedGeometry {
 public:
  PreparedGeometry(TriangleSurface surface, const ModelConfig& cfg)
      : surface_(std::move(surface)),
        frame_(make_geometry_frame(surface_, cfg.encoder.m, cfg.flow, cfg.trim)),
        stencils_(surface_, frame_, cfg.predictor.stencil_radius(frame_.domain_grid)) {}
  PreparedGeometry(const PreparedGeometry&) = delete;
  PreparedGeometry& operator=(const PreparedGeometry&) = delete;

  const TriangleSurface& surface() const { return surface_; }
  const GeometryFrame& frame() const { return frame_; }
  const StencilSampler& stencils() const { return stencils_; }

  /// Uniform subsample of mesh vertices without replacement.
  std::vector<Vec3> cloud(std::size_t count, Rng& rng) const {
    if (count >= surface_.vertices.size()) return surface_.vertices;
    std::vector<Vec3> out;
    out.reserve(count);
    std::sample(surface_.vertices.begin(), surface_.vertices.end(), std::back_inserter(out), count, rng);
    return out;
  }

 private:
  TriangleSurface surface_;
  GeometryFrame frame_;
  StencilSampler stencils_;
};

/// Normalised predictions [N, |variables(mode)|] for one stencil batch.
inline nn::Var forward_mode(nn::Tape& t, DominoModel& model, nn::Var global, const PreparedGeometry& geom, Mode mode,
                            const StencilBatch& stencil) {
  const auto& pc = model.config.predictor;
  const nn::Var local = extract_local_encoding(t, model.params, local_prefix(mode), pc.local_spec(t.cols(global)), global,
                                               geom.frame().domain_grid, stencil.centers, pc.l);
  const nn::Var feats = t.constant({stencil.points.size(), kStencilFeatures}, stencil.features);
  const double eps = pc.idw_epsilon * geom.stencils().radius();
  std::vector<nn::Var> cols;
  for (const auto& v : variables(mode))
    cols.push_back(aggregate_predict(t, model.params, head_prefix(mode, v), pc, feats, local, stencil.distances, stencil.p, eps));
  return nn::concat_cols(t, cols);
}

/// Runs the encoder once for a geometry and then predicts fields for any
/// number of query points in fixed-size batches.
class FieldPredictor {
 public:
  static constexpr std::uint64_t kStencilSalt = 0x5715c11;

  FieldPredictor(DominoModel& model, const PreparedGeometry& geom, std::uint64_t seed) : model_(&model), geom_(&geom), seed_(seed) {
    Rng rng(seed);
    const auto cloud = geom.cloud(model.config.cloud_points, rng);
    nn::Tape t(false);
    const nn::Var g = encode_geometry(t, model.params, model.config.encoder, geom.frame(), cloud);
    global_shape_ = t.shape(g);
    global_ = t.value(g);
  }

  const std::vector<double>& global_encoding() const { return global_; }

  /// Writes physical-unit predictions row-major into `out`
  /// (positions.size() x |variables(mode)|). Memory use scales with `batch`.
  void predict_into(Mode mode, std::span<const Vec3> positions, std::span<const Vec3> normals, std::span<double> out,
                    std::size_t batch) const {
    const std::size_t nv = variables(mode).size();
    if (out.size() != positions.size() * nv) throw ContractError("prediction output buffer has the wrong size");
    if (mode == Mode::kSurface && normals.size() != positions.size()) throw ContractError("surface prediction needs normals");
    if (batch == 0) throw ContractError("batch size must be positive");
    const FieldStats& st = model_->stats(mode);
    for (std::size_t b0 = 0; b0 < positions.size(); b0 += batch) {
      const std::size_t n = std::min(batch, positions.size() - b0);
      const auto pos = positions.subspan(b0, n);
      const auto nrm = mode == Mode::kSurface ? normals.subspan(b0, n) : std::span<const Vec3>{};
      const StencilBatch stencil =
          geom_->stencils().build(mode, pos, nrm, static_cast<std::size_t>(model_->config.predictor.p), seed_ ^ kStencilSalt);
      nn::Tape t(false);
      const nn::Var g = t.constant(global_shape_, global_);
      const auto& v = t.value(forward_mode(t, *model_, g, *geom_, mode, stencil));
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < nv; ++j) out[(b0 + i) * nv + j] = st.to_physical(j, v[i * nv + j]);
    }
  }

  std::vector<double> predict(Mode mode, std::span<const Vec3> positions, std::span<const Vec3> normals, std::size_t batch) const {
    std::vector<double> out(positions.size() * variables(mode).size());
    predict_into(mode, positions, normals, out, batch);
    return out;
  }

  /// One named variable only.
  std::vector<double> predict_variable(Mode mode, const std::string& name, std::span<const Vec3> positions,
                                       std::span<const Vec3> normals, std::size_t batch) const {
    const std::size_t j = variable_index(mode, name);
    const std::size_t nv = variables(mode).size();
    const auto all = predict(mode, positions, normals, batch);
    std::vector<double> out(positions.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = all[i * nv + j];
    return out;
  }

 private:
  DominoModel* model_;
  const PreparedGeometry* geom_;
  std::uint64_t seed_;
  nn::Shape global_shape_;
  std::vector<double> global_;
};

}  // namespace domino
