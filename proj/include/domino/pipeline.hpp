#pragma once

// Training (loss, per-epoch resampling, plateau schedule, checkpoints) and the
// engineering-metric evaluation of a model over a set of samples.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "domino/datagen.hpp"
#include "domino/metrics.hpp"
#include "domino/model.hpp"
#include "domino/nn/optim.hpp"

namespace domino {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Mixes several integers into one generator seed.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (auto p : parts) {
    h ^= p + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    h ^= h >> 31;
  }
  return h;
}

// ---------------------------------------------------------------- loss

struct LossReport {
  std::vector<double> volume;
  std::vector<double> surface;
  std::vector<double> surface_area_weighted;
  double total = 0.0;
};

struct Loss {
  nn::Var total;
  LossReport report;
};

/// Per-variable MSE terms on row-major [N, vars] predictions and targets.
/// `area_weights` scales both fields of the area-weighted surface terms. A
/// side with zero rows contributes no terms.
inline Loss compute_loss(nn::Tape& t, nn::Var pred_surface, std::span<const double> true_surface,
                         std::span<const double> area_weights, nn::Var pred_volume, std::span<const double> true_volume) {
  const std::size_t ns = t.value(pred_surface).empty() ? 0 : t.rows(pred_surface);
  const std::size_t nv = t.value(pred_volume).empty() ? 0 : t.rows(pred_volume);
  auto width = [&](nn::Var v) -> std::size_t { return t.shape(v).size() < 2 ? 1 : t.shape(v)[1]; };
  const std::size_t cs = width(pred_surface), cv = width(pred_volume);
  if (true_surface.size() != t.value(pred_surface).size() || area_weights.size() != ns)
    throw ContractError("compute_loss: surface predictions, targets and areas are not aligned");
  if (true_volume.size() != t.value(pred_volume).size()) throw ContractError("compute_loss: volume predictions and targets are not aligned");
  if (ns + nv == 0) throw ContractError("compute_loss: no points");
  auto finite = [](std::span<const double> v, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!std::isfinite(v[i])) throw RuntimeFailure(std::string("non-finite ") + what + " at element " + std::to_string(i) + " (poisoned batch)");
  };
  finite(t.value(pred_surface), "surface prediction");
  finite(true_surface, "surface target");
  finite(area_weights, "surface area");
  finite(t.value(pred_volume), "volume prediction");
  finite(true_volume, "volume target");

  auto target_col = [](std::span<const double> m, std::size_t rows, std::size_t cols, std::size_t j) {
    std::vector<double> c(rows);
    for (std::size_t i = 0; i < rows; ++i) c[i] = m[i * cols + j];
    return c;
  };
  Loss out;
  std::vector<nn::Var> terms;
  if (nv > 0)
    for (std::size_t j = 0; j < cv; ++j) {
      terms.push_back(nn::mse(t, nn::column(t, pred_volume, j), target_col(true_volume, nv, cv, j)));
      out.report.volume.push_back(t.value(terms.back())[0]);
    }
  if (ns > 0) {
    const std::vector<double> a(area_weights.begin(), area_weights.end());
    for (std::size_t j = 0; j < cs; ++j) {
      terms.push_back(nn::mse(t, nn::column(t, pred_surface, j), target_col(true_surface, ns, cs, j)));
      out.report.surface.push_back(t.value(terms.back())[0]);
    }
    for (std::size_t j = 0; j < cs; ++j) {
      terms.push_back(nn::mse(t, nn::column(t, pred_surface, j), target_col(true_surface, ns, cs, j), a));
      out.report.surface_area_weighted.push_back(t.value(terms.back())[0]);
    }
  }
  out.total = nn::add_n(t, terms);
  out.report.total = t.value(out.total)[0];
  return out;
}

// ---------------------------------------------------------------- normalisation

/// Mean and standard deviation of every variable over the given samples
/// (scale 1 for a constant variable).
inline void fit_normalization(DominoModel& model, std::span<const SampleBundle* const> train) {
  if (train.empty()) throw ValidationError("normalisation needs at least one training sample");
  auto fit = [&](auto fields_of, std::size_t nvars) {
    FieldStats st = FieldStats::identity(nvars);
    for (std::size_t v = 0; v < nvars; ++v) {
      double n = 0, s = 0, s2 = 0;
      for (const auto* b : train)
        for (double x : fields_of(*b)[v]) ++n, s += x;
      if (n == 0) continue;
      const double mean = s / n;
      for (const auto* b : train)
        for (double x : fields_of(*b)[v]) s2 += (x - mean) * (x - mean);
      const double sd = std::sqrt(s2 / n);
      st.mean[v] = mean;
      st.scale[v] = sd > 0.0 ? sd : 1.0;
    }
    return st;
  };
  model.surface_stats = fit([](const SampleBundle& b) -> const auto& { return b.surface.fields; }, 4);
  model.volume_stats = fit([](const SampleBundle& b) -> const auto& { return b.volume.fields; }, 5);
}

// ---------------------------------------------------------------- training

struct TrainConfig {
  int epochs = 500;
  double lr = 1e-3;
  double min_lr = 1e-6;
  double lr_factor = 0.5;
  int patience = 10;
  double plateau_threshold = 1e-4;
  std::size_t surface_points = 256;  // per sample per epoch
  std::size_t volume_points = 128;
  std::size_t validation_surface_points = 32;  // held out per sample
  std::size_t validation_volume_points = 32;
  int checkpoint_every = 0;  // 0: only best-validation checkpoints
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw ValidationError("training.epochs must be >= 1");
    if (!(lr >= 0.0)) throw ValidationError("training.lr must be >= 0");
    if (!(min_lr >= 0.0) || min_lr > lr) throw ValidationError("training.min_lr must lie in [0, training.lr]");
    if (!(lr_factor > 0.0 && lr_factor < 1.0)) throw ValidationError("training.lr_factor must lie in (0, 1)");
    if (patience < 1) throw ValidationError("training.patience must be >= 1");
    if (!(plateau_threshold >= 0.0)) throw ValidationError("training.plateau_threshold must be >= 0");
    if (surface_points + volume_points == 0) throw ValidationError("training needs surface or volume points");
    if (validation_surface_points + validation_volume_points == 0) throw ValidationError("validation needs surface or volume points");
    if (checkpoint_every < 0) throw ValidationError("training.checkpoint_every must be >= 0");
  }
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;       // mean over samples
  double validation_loss = 0.0;  // mean over samples, after the epoch's updates
};

/// Everything besides the parameters (and their Adam moments) that a resumed
/// run needs.
struct TrainProgress {
  int epochs_done = 0;
  nn::PlateauScheduler scheduler;
  double best_validation = std::numeric_limits<double>::infinity();
  std::vector<EpochRecord> history;
};

enum class CheckpointReason { kPeriodic, kBest };

using CheckpointSink = std::function<void(const DominoModel&, const TrainProgress&, CheckpointReason)>;

/// Training state of one sample: geometry preprocessing and the split of its
/// surface and volume rows into a training pool and a fixed validation set.
class TrainingSample {
 public:
  TrainingSample(const SampleBundle& b, const ModelConfig& mc, const TrainConfig& tc, std::size_t index)
      : bundle_(&b), geom_(b.geometry, mc) {
    if (b.surface.position.empty() && b.volume.position.empty()) throw ValidationError("sample '" + b.spec.id + "' has no field data");
    Rng rng(derive_seed({tc.seed, 0x7a11d, index}));
    split_rows(b.surface.position.size(), tc.validation_surface_points, rng, surface_pool_, val_surface_);
    split_rows(b.volume.position.size(), tc.validation_volume_points, rng, volume_pool_, val_volume_);
    std::vector<double> pool_area;
    for (auto i : surface_pool_) pool_area.push_back(b.surface.area[i]);
    surface_cdf_ = std::make_unique<AreaCdf>(pool_area);
    const double total = std::accumulate(b.surface.area.begin(), b.surface.area.end(), 0.0);
    mean_area_ = b.surface.area.empty() ? 1.0 : total / static_cast<double>(b.surface.area.size());
    val_cloud_ = geom_.cloud(mc.cloud_points, rng);
    val_stencil_seed_ = rng();
  }

  const SampleBundle& bundle() const { return *bundle_; }
  const PreparedGeometry& geometry() const { return geom_; }

  /// Area-weighted draw (with replacement) from the surface training pool.
  std::vector<std::uint32_t> draw_surface(std::size_t n, Rng& rng) const {
    std::vector<std::uint32_t> rows;
    if (surface_pool_.empty()) return rows;
    for (std::size_t i = 0; i < n; ++i) rows.push_back(surface_pool_[surface_cdf_->pick(uniform01(rng))]);
    return rows;
  }
  /// Uniform draw (with replacement) from the volume training pool.
  std::vector<std::uint32_t> draw_volume(std::size_t n, Rng& rng) const {
    std::vector<std::uint32_t> rows;
    if (volume_pool_.empty()) return rows;
    std::uniform_int_distribution<std::size_t> pick(0, volume_pool_.size() - 1);
    for (std::size_t i = 0; i < n; ++i) rows.push_back(volume_pool_[pick(rng)]);
    return rows;
  }

  const std::vector<std::uint32_t>& validation_surface() const { return val_surface_; }
  const std::vector<std::uint32_t>& validation_volume() const { return val_volume_; }
  const std::vector<Vec3>& validation_cloud() const { return val_cloud_; }
  std::uint64_t validation_stencil_seed() const { return val_stencil_seed_; }
  double mean_area() const { return mean_area_; }

 private:
  static void split_rows(std::size_t n, std::size_t want_val, Rng& rng, std::vector<std::uint32_t>& pool,
                         std::vector<std::uint32_t>& val) {
    if (n == 0) return;
    // Keep at least three quarters of the rows for training.
    const std::size_t k = std::min(want_val, n / 4);
    std::vector<std::uint32_t> all(n);
    std::iota(all.begin(), all.end(), 0u);
    std::vector<char> held(n, 0);
    std::sample(all.begin(), all.end(), std::back_inserter(val), k, rng);
    for (auto i : val) held[i] = 1;
    for (auto i : all)
      if (!held[i]) pool.push_back(i);
  }

  const SampleBundle* bundle_;
  PreparedGeometry geom_;
  std::vector<std::uint32_t> surface_pool_, volume_pool_, val_surface_, val_volume_;
  std::unique_ptr<AreaCdf> surface_cdf_;
  double mean_area_ = 1.0;
  std::vector<Vec3> val_cloud_;
  std::uint64_t val_stencil_seed_ = 0;
};

/// Forward pass and loss for the given rows of one sample.
inline Loss sample_loss(nn::Tape& t, DominoModel& model, const TrainingSample& s, std::span<const Vec3> cloud,
                        std::span<const std::uint32_t> surface_rows, std::span<const std::uint32_t> volume_rows,
                        std::uint64_t stencil_seed) {
  const SampleBundle& b = s.bundle();
  const auto& geom = s.geometry();
  const std::size_t p = static_cast<std::size_t>(model.config.predictor.p);
  const nn::Var global = encode_geometry(t, model.params, model.config.encoder, geom.frame(), cloud);

  std::vector<Vec3> spos, snrm, vpos;
  std::vector<double> strue, svar_area, vtrue;
  for (auto r : surface_rows) {
    spos.push_back(b.surface.position[r]);
    snrm.push_back(b.surface.normal[r]);
    svar_area.push_back(b.surface.area[r] / s.mean_area());
    for (std::size_t v = 0; v < 4; ++v) strue.push_back(model.surface_stats.to_model(v, b.surface.fields[v][r]));
  }
  for (auto r : volume_rows) {
    vpos.push_back(b.volume.position[r]);
    for (std::size_t v = 0; v < 5; ++v) vtrue.push_back(model.volume_stats.to_model(v, b.volume.fields[v][r]));
  }
  const nn::Var ps = spos.empty() ? t.constant({0, 4}, {})
                                  : forward_mode(t, model, global, geom, Mode::kSurface,
                                                 geom.stencils().build(Mode::kSurface, spos, snrm, p, stencil_seed));
  const nn::Var pv = vpos.empty() ? t.constant({0, 5}, {})
                                  : forward_mode(t, model, global, geom, Mode::kVolume,
                                                 geom.stencils().build(Mode::kVolume, vpos, {}, p, stencil_seed));
  return compute_loss(t, ps, strue, svar_area, pv, vtrue);
}

class Trainer {
 public:
  /// Fits the normalisation on `train` unless `fit_stats` is false (resume).
  Trainer(DominoModel& model, std::vector<const SampleBundle*> train, TrainConfig cfg, bool fit_stats = true)
      : model_(&model), cfg_(std::move(cfg)) {
    cfg_.validate();
    model.config.validate();
    if (train.empty()) throw ValidationError("training needs at least one sample");
    if (fit_stats) fit_normalization(model, train);
    for (std::size_t i = 0; i < train.size(); ++i) samples_.push_back(std::make_unique<TrainingSample>(*train[i], model.config, cfg_, i));
    progress_.scheduler = {cfg_.lr, cfg_.min_lr, cfg_.lr_factor, cfg_.patience, cfg_.plateau_threshold};
  }

  const TrainConfig& config() const { return cfg_; }
  const TrainProgress& progress() const { return progress_; }
  std::size_t sample_count() const { return samples_.size(); }

  void resume(TrainProgress p) {
    if (p.epochs_done != static_cast<int>(p.history.size())) throw ValidationError("checkpoint history does not match its epoch count");
    progress_ = std::move(p);
  }

  /// One optimisation step on one sample; returns its loss report.
  LossReport step(std::size_t sample, int epoch, double lr) {
    const TrainingSample& s = *samples_[sample];
    Rng rng(derive_seed({cfg_.seed, static_cast<std::uint64_t>(epoch), sample}));
    const auto cloud = s.geometry().cloud(model_->config.cloud_points, rng);
    const auto srows = s.draw_surface(cfg_.surface_points, rng);
    const auto vrows = s.draw_volume(cfg_.volume_points, rng);
    const std::uint64_t stencil_seed = rng();
    model_->params.zero_grad();
    nn::Tape t;
    Loss loss;
    try {
      loss = sample_loss(t, *model_, s, cloud, srows, vrows, stencil_seed);
    } catch (const RuntimeFailure& e) {
      throw RuntimeFailure("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    if (!std::isfinite(loss.report.total))
      throw RuntimeFailure("training diverged at epoch " + std::to_string(epoch) + ": loss is " + std::to_string(loss.report.total));
    t.backward(loss.total);
    nn::adam_step(model_->params, lr);
    return loss.report;
  }

  /// Mean total loss over every sample's held-out point set.
  double validation_loss() {
    double acc = 0.0;
    for (const auto& s : samples_) {
      nn::Tape t(false);
      acc += sample_loss(t, *model_, *s, s->validation_cloud(), s->validation_surface(), s->validation_volume(),
                         s->validation_stencil_seed())
                 .report.total;
    }
    return acc / static_cast<double>(samples_.size());
  }

  EpochRecord run_epoch(const CheckpointSink& sink = {}) {
    const int epoch = progress_.epochs_done;
    const double lr = progress_.scheduler.lr;
    std::vector<std::size_t> order(samples_.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(derive_seed({cfg_.seed, static_cast<std::uint64_t>(epoch), 0x5bu}));
    std::shuffle(order.begin(), order.end(), shuffle);
    double acc = 0.0;
    for (auto i : order) acc += step(i, epoch, lr).total;
    EpochRecord rec{epoch, lr, acc / static_cast<double>(samples_.size()), validation_loss()};
    if (!std::isfinite(rec.validation_loss))
      throw RuntimeFailure("training diverged at epoch " + std::to_string(epoch) + ": validation loss is not finite");
    progress_.scheduler.step(rec.validation_loss);
    progress_.history.push_back(rec);
    progress_.epochs_done = epoch + 1;
    if (sink) {
      if (cfg_.checkpoint_every > 0 && progress_.epochs_done % cfg_.checkpoint_every == 0) sink(*model_, progress_, CheckpointReason::kPeriodic);
      if (rec.validation_loss < progress_.best_validation) {
        progress_.best_validation = rec.validation_loss;
        sink(*model_, progress_, CheckpointReason::kBest);
      }
    } else {
      progress_.best_validation = std::min(progress_.best_validation, rec.validation_loss);
    }
    return rec;
  }

  /// Runs the remaining epochs up to config().epochs.
  const TrainProgress& run(const CheckpointSink& sink = {}, const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    while (progress_.epochs_done < cfg_.epochs) {
      const EpochRecord r = run_epoch(sink);
      if (on_epoch) on_epoch(r);
    }
    return progress_;
  }

 private:
  DominoModel* model_;
  TrainConfig cfg_;
  std::vector<std::unique_ptr<TrainingSample>> samples_;
  TrainProgress progress_;
};

inline std::vector<const SampleBundle*> samples_with_split(std::span<const SampleBundle> all, Split split) {
  std::vector<const SampleBundle*> out;
  for (const auto& b : all)
    if (b.split == split) out.push_back(&b);
  return out;
}

// ---------------------------------------------------------------- evaluation

/// Where surface predictions are made: mesh face centres, or an equal-area
/// uniform cloud of `count` points.
struct PointSource {
  enum class Kind { kMesh, kCloud } kind = Kind::kMesh;
  std::size_t count = 0;

  static PointSource parse(const std::string& s) {
    if (s == "mesh") return {};
    if (s.rfind("cloud:", 0) == 0) {
      const std::string n = s.substr(6);
      if (!n.empty() && n.find_first_not_of("0123456789") == std::string::npos && n.size() < 10 && std::stoul(n) > 0)
        return {Kind::kCloud, std::stoul(n)};
    }
    throw ValidationError("--points must be 'mesh' or 'cloud:N' with N >= 1, got '" + s + "'");
  }
  std::string name() const { return kind == Kind::kMesh ? "mesh" : "cloud:" + std::to_string(count); }
};

/// Surface evaluation points with the face each one lies on.
struct SurfaceQuery {
  std::vector<Vec3> position, normal;
  std::vector<double> area;
  std::vector<std::uint32_t> face;
};

/// Mesh: one point per face centre with the face area. Cloud: stratified
/// uniform points, each with area A/N and its face's normal.
inline SurfaceQuery surface_query(const SampleBundle& b, const PointSource& src, Rng& rng) {
  if (b.surface.position.size() != b.geometry.face_count())
    throw ValidationError("sample '" + b.spec.id + "': surface table must hold one row per mesh face");
  SurfaceQuery q;
  if (src.kind == PointSource::Kind::kMesh) {
    q.position = b.surface.position;
    q.normal = b.surface.normal;
    q.area = b.surface.area;
    q.face.resize(q.position.size());
    std::iota(q.face.begin(), q.face.end(), 0u);
    return q;
  }
  for (const auto& smp : sample_surface_stratified(b.geometry, src.count, rng)) {
    q.position.push_back(smp.position);
    q.normal.push_back(smp.normal);
    q.area.push_back(smp.area_weight);
    q.face.push_back(smp.face);
  }
  return q;
}

/// Fills physical-unit predictions (row-major [N,4] surface and [M,5] volume)
/// for one sample.
using FieldFunction = std::function<void(std::size_t sample_index, const SampleBundle&, const SurfaceQuery&,
                                         std::vector<double>& surface, std::vector<double>& volume)>;

inline FieldFunction model_fields(DominoModel& model, std::size_t batch, std::uint64_t seed) {
  return [&model, batch, seed](std::size_t, const SampleBundle& b, const SurfaceQuery& q, std::vector<double>& surface,
                               std::vector<double>& volume) {
    const PreparedGeometry geom(b.geometry, model.config);
    const FieldPredictor fp(model, geom, seed);
    surface = fp.predict(Mode::kSurface, q.position, q.normal, batch);
    volume = fp.predict(Mode::kVolume, b.volume.position, {}, batch);
  };
}

/// Test fixture: returns the stored truth (the face's value for surface points).
inline FieldFunction identity_fields() {
  return [](std::size_t, const SampleBundle& b, const SurfaceQuery& q, std::vector<double>& surface, std::vector<double>& volume) {
    surface.clear();
    volume.clear();
    for (auto f : q.face)
      for (std::size_t v = 0; v < 4; ++v) surface.push_back(b.surface.fields[v][f]);
    for (std::size_t i = 0; i < b.volume.position.size(); ++i)
      for (std::size_t v = 0; v < 5; ++v) volume.push_back(b.volume.fields[v][i]);
  };
}

struct SampleMetrics {
  std::string id;
  Split split = Split::kTestIn;
  std::vector<double> surface_l2;       // NaN where undefined (all-zero truth, no points)
  std::vector<double> surface_l2_area;
  std::vector<double> volume_l2;
  double drag_true = 0.0;
  double drag_pred = 0.0;
  std::size_t surface_points = 0;
  std::size_t volume_points = 0;
};

struct GroupSummary {
  std::size_t count = 0;
  std::vector<double> surface_l2 = std::vector<double>(4, kNaN);  // means over samples
  std::vector<double> surface_l2_area = std::vector<double>(4, kNaN);
  std::vector<double> volume_l2 = std::vector<double>(5, kNaN);
  double r2 = kNaN;
  double spearman = kNaN;
};

struct MetricsReport {
  PointSource points;
  std::vector<SampleMetrics> samples;
  std::vector<std::size_t> design_trend;  // sample indices, ascending true drag
  GroupSummary all, in_distribution, out_of_distribution;
};

/// Relative L2 that reports NaN instead of failing on an all-zero truth.
inline double relative_l2_or_nan(std::span<const double> truth, std::span<const double> pred, std::span<const double> w = {}) {
  if (truth.empty()) return kNaN;
  try {
    return relative_l2(truth, pred, w);
  } catch (const ValidationError&) {
    return kNaN;
  }
}

/// Relative L2 of predicting every point with the field's own mean.
inline double constant_mean_l2(std::span<const double> truth) {
  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
  const std::vector<double> pred(truth.size(), mean);
  return relative_l2(truth, pred);
}

inline GroupSummary summarize(const std::vector<SampleMetrics>& all, const std::function<bool(const SampleMetrics&)>& keep) {
  GroupSummary g;
  std::vector<const SampleMetrics*> s;
  for (const auto& m : all)
    if (keep(m)) s.push_back(&m);
  g.count = s.size();
  auto mean_of = [&](auto member, std::size_t nvars) {
    std::vector<double> out(nvars, kNaN);
    for (std::size_t v = 0; v < nvars; ++v) {
      double acc = 0;
      std::size_t n = 0;
      for (const auto* m : s)
        if (std::isfinite((m->*member)[v])) acc += (m->*member)[v], ++n;
      if (n > 0) out[v] = acc / static_cast<double>(n);
    }
    return out;
  };
  g.surface_l2 = mean_of(&SampleMetrics::surface_l2, 4);
  g.surface_l2_area = mean_of(&SampleMetrics::surface_l2_area, 4);
  g.volume_l2 = mean_of(&SampleMetrics::volume_l2, 5);
  std::vector<double> t, p;
  for (const auto* m : s) t.push_back(m->drag_true), p.push_back(m->drag_pred);
  if (s.size() >= 2) {
    try {
      g.r2 = r_squared(t, p);
    } catch (const ValidationError&) {
    }
    g.spearman = spearman(t, p);
  }
  return g;
}

struct EvalConfig {
  PointSource points;
  std::size_t batch = 4096;
  std::uint64_t seed = 0;
  FlowAxis flow;
};

/// Per-sample relative L2 and drag, drag R^2 and rank correlation, and the
/// design-trend table, overall and per distribution tag.
inline MetricsReport evaluate(std::span<const SampleBundle* const> samples, const FieldFunction& fields, const EvalConfig& cfg) {
  if (samples.empty()) throw ValidationError("evaluation needs at least one sample");
  if (cfg.batch == 0) throw ValidationError("evaluation batch size must be >= 1");
  MetricsReport rep;
  rep.points = cfg.points;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const SampleBundle& b = *samples[i];
    Rng rng(derive_seed({cfg.seed, 0xc10dU, i}));
    const SurfaceQuery q = surface_query(b, cfg.points, rng);
    std::vector<double> ps, pv;
    fields(i, b, q, ps, pv);
    if (ps.size() != q.position.size() * 4 || pv.size() != b.volume.position.size() * 5)
      throw ContractError("field function returned the wrong number of values");
    SampleMetrics m;
    m.id = b.spec.id;
    m.split = b.split;
    m.surface_points = q.position.size();
    m.volume_points = b.volume.position.size();
    std::vector<double> tcol(q.position.size()), pcol(q.position.size());
    for (std::size_t v = 0; v < 4; ++v) {
      for (std::size_t k = 0; k < q.position.size(); ++k) {
        tcol[k] = b.surface.fields[v][q.face[k]];
        pcol[k] = ps[k * 4 + v];
      }
      m.surface_l2.push_back(relative_l2_or_nan(tcol, pcol));
      m.surface_l2_area.push_back(relative_l2_or_nan(tcol, pcol, q.area));
    }
    std::vector<double> pp(q.position.size()), pt(q.position.size());
    for (std::size_t k = 0; k < q.position.size(); ++k) {
      pp[k] = ps[k * 4];
      pt[k] = ps[k * 4 + 1 + static_cast<std::size_t>(cfg.flow.axis)];
    }
    m.drag_pred = integrate_drag(q.normal, q.area, pp, pt, cfg.flow);
    m.drag_true = b.drag;
    const std::size_t nv = b.volume.position.size();
    std::vector<double> vp(nv);
    for (std::size_t v = 0; v < 5; ++v) {
      for (std::size_t k = 0; k < nv; ++k) vp[k] = pv[k * 5 + v];
      m.volume_l2.push_back(relative_l2_or_nan(b.volume.fields[v], vp));
    }
    rep.samples.push_back(std::move(m));
  }
  rep.design_trend.resize(rep.samples.size());
  std::iota(rep.design_trend.begin(), rep.design_trend.end(), 0);
  std::stable_sort(rep.design_trend.begin(), rep.design_trend.end(),
                   [&](std::size_t a, std::size_t b) { return rep.samples[a].drag_true < rep.samples[b].drag_true; });
  rep.all = summarize(rep.samples, [](const SampleMetrics&) { return true; });
  rep.in_distribution = summarize(rep.samples, [](const SampleMetrics& m) { return m.split != Split::kTestOut; });
  rep.out_of_distribution = summarize(rep.samples, [](const SampleMetrics& m) { return m.split == Split::kTestOut; });
  return rep;
}

}  // namespace domino
