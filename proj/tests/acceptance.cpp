// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <malloc.h>

#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "domino/io/artifacts.hpp"
#include "domino/pipeline.hpp"
#include "domino/shapes.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

// ---------------------------------------------------------------- allocation accounting
//
// Every heap allocation (operator new and Eigen temporaries alike) goes
// through malloc, so interposing it sees the whole working set.

extern "C" {
void* __libc_malloc(std::size_t);
void* __libc_calloc(std::size_t, std::size_t);
void* __libc_realloc(void*, std::size_t);
void* __libc_memalign(std::size_t, std::size_t);
void __libc_free(void*);
}

namespace {

std::atomic<long long> g_live{0};
std::atomic<long long> g_peak{0};

void note_alloc(void* p) {
  if (!p) return;
  const long long now = g_live.fetch_add(static_cast<long long>(malloc_usable_size(p))) + static_cast<long long>(malloc_usable_size(p));
  long long peak = g_peak.load();
  while (now > peak && !g_peak.compare_exchange_weak(peak, now)) {
  }
}

void note_free(void* p) {
  if (p) g_live.fetch_sub(static_cast<long long>(malloc_usable_size(p)));
}

}  // namespace

extern "C" {
void* malloc(std::size_t n) {
  void* p = __libc_malloc(n);
  note_alloc(p);
  return p;
}
void* calloc(std::size_t n, std::size_t s) {
  void* p = __libc_calloc(n, s);
  note_alloc(p);
  return p;
}
void* realloc(void* old, std::size_t n) {
  note_free(old);
  void* p = __libc_realloc(old, n);
  note_alloc(p ? p : (n == 0 ? nullptr : old));
  return p;
}
void free(void* p) {
  note_free(p);
  __libc_free(p);
}
void* memalign(std::size_t a, std::size_t n) {
  void* p = __libc_memalign(a, n);
  note_alloc(p);
  return p;
}
void* aligned_alloc(std::size_t a, std::size_t n) { return memalign(a, n); }
int posix_memalign(void** out, std::size_t a, std::size_t n) {
  void* p = memalign(a, n);
  if (!p) return 12;  // ENOMEM
  *out = p;
  return 0;
}
}

using namespace domino;
using namespace domino::testkit;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<const SampleBundle*> pointers(const std::vector<SampleBundle>& v, bool test_only) {
  std::vector<const SampleBundle*> out;
  for (const auto& b : v)
    if (!test_only || b.split != Split::kTrain) out.push_back(&b);
  return out;
}

ModelConfig tiny_smooth_model() {
  ModelConfig c;
  c.encoder.f = 2;
  c.encoder.radii = {0.1, 0.3};
  c.encoder.kernel_hidden = 6;
  c.encoder.n_iter = 2;
  c.encoder.activation = nn::Activation::kGelu;
  c.predictor.n_f = 4;
  c.predictor.local_hidden = 8;
  c.predictor.basis_widths = {8, 8};
  c.predictor.fusion_hidden = {8};
  c.predictor.p = 3;
  c.predictor.activation = nn::Activation::kGelu;
  c.cloud_points = 60;
  return c;
}

// ---------------------------------------------------------------- 1

void gradient_integrity(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  DatasetConfig dc;
  dc.subdivision = 2;
  dc.volume_points = 200;
  Rng rng(101);
  const auto data = make_dataset(1, 1, 1, dc, {}, {}, rng);
  const ModelConfig mc = tiny_smooth_model();
  DominoModel model = init_model(mc, 102);
  const auto train = samples_with_split(data, Split::kTrain);
  fit_normalization(model, train);
  TrainConfig tc;
  tc.validation_surface_points = 4;
  tc.validation_volume_points = 4;
  const TrainingSample sample(*train[0], mc, tc, 0);
  Rng draw(103);
  const auto cloud = sample.geometry().cloud(mc.cloud_points, draw);
  const auto srows = sample.draw_surface(4, draw);
  const auto vrows = sample.draw_volume(4, draw);

  // Full composition: kernel MLPs and ball-query sums, conv blocks, local
  // encodings, basis and fusion MLPs, distance-weighted aggregation, loss.
  const auto rep = check_param_gradients(
      model.params, [&](nn::Tape& t) { return sample_loss(t, model, sample, cloud, srows, vrows, 104).total; }, 6);
  o.detail << "model+loss max rel err " << rep.max_rel_error << " over " << rep.checked << " entries";
  o.check(rep.max_rel_error < 1e-5, "composed gradient " + rep.worst);

  // Loss alone with respect to its prediction inputs.
  std::normal_distribution<double> g;
  std::mt19937_64 r(105);
  std::vector<double> ps(6 * 4), ts(6 * 4), a(6), pv(5 * 5), tv(5 * 5);
  for (auto* v : {&ps, &ts, &pv, &tv})
    for (auto& x : *v) x = g(r);
  for (auto& x : a) x = 0.5 + std::abs(g(r));
  const auto lr = check_input_gradients(ps, {6, 4}, [&](nn::Tape& t, nn::Var in) {
    return compute_loss(t, in, ts, a, t.constant({5, 5}, pv), tv).total;
  });
  o.detail << ", loss inputs " << lr.max_rel_error;
  o.check(lr.max_rel_error < 1e-5, "loss gradient " + lr.worst);
  const double secs = seconds_since(t0);
  o.detail << ", " << secs << " s";
  o.check(secs < 120, "runtime");
}

// ---------------------------------------------------------------- 2

void oracle_equivalence(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(201);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> pts(1000);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  std::size_t mismatched = 0;
  for (double radius : {0.05, 0.15}) {
    const NeighborIndex idx(pts, radius);
    for (int q = 0; q < 100; ++q) {
      const Vec3 c{u(rng), u(rng), u(rng)};
      if (idx.ball_query(c, radius, 1000) != brute_ball_query(pts, c, radius, 1000)) ++mismatched;
    }
  }
  o.detail << "ball query mismatches " << mismatched << "/200";
  o.check(mismatched == 0, "ball query");

  const auto body = scaled_translated(make_icosphere(2), {0.6, 0.4, 0.3}, {0.05, -0.1, 0.02});
  const GridGeometry grid({{-1.1, -0.9, -0.8}, {1.2, 0.95, 0.85}}, 16);
  const auto sdf = compute_sdf_grid(body, grid);
  std::size_t sdf_bad = 0;
  for (std::size_t n = 0; n < grid.node_count(); ++n)
    if (std::abs(sdf.at(n, kSdf)) != brute_unsigned_distance(body, grid.node(n))) ++sdf_bad;
  o.detail << ", sdf mismatches " << sdf_bad << "/" << grid.node_count();
  o.check(sdf_bad == 0, "sdf");

  nn::ParamStore store;
  Rng init(202);
  const nn::MlpSpec spec{{7, 16, 4}, nn::Activation::kRelu};
  nn::init_mlp(store, "k", spec, init);
  std::vector<Vec3> cloud(400);
  for (auto& p : cloud) p = {2 * u(rng) - 1, 2 * u(rng) - 1, 2 * u(rng) - 1};
  const GridGeometry pg({{-1.2, -1, -1}, {1.2, 1, 1}}, 8);
  std::size_t proj_bad = 0;
  for (double r : {0.15, 0.4}) {
    const NeighborIndex index(cloud, r);
    nn::Tape t(false);
    const auto got = t.value(project_points_to_grid(t, store, "k", spec, index, pg, r, 12));
    const auto want = brute_projection(cloud, pg, r, 12, store, "k", spec);
    for (std::size_t i = 0; i < got.size(); ++i) proj_bad += got[i] != want[i];
  }
  o.detail << ", projection mismatches " << proj_bad;
  o.check(proj_bad == 0, "projection");
  const double secs = seconds_since(t0);
  o.detail << ", " << secs << " s";
  o.check(secs < 60, "runtime");
}

// ---------------------------------------------------------------- 3

void metric_correctness(Outcome& o) {
  const std::vector<double> t{3, 4}, zero{0, 0}, w{2, 1}, p{3, 0};
  o.check(relative_l2(t, zero) == 1.0, "(3,4) vs 0");
  o.check(relative_l2(t, zero, w) == 1.0, "weighted (3,4) vs 0");
  o.check(std::abs(relative_l2(t, p, w) - 4.0 / std::sqrt(52.0)) < 1e-15, "weighted (3,4) vs (3,0)");
  o.check(relative_l2(t, t) == 0.0, "identity");

  nn::Tape tape;
  const std::vector<double> target{2.0}, area{2.0};
  const auto loss = compute_loss(tape, tape.constant({1, 1}, {3.0}), target, area, tape.constant({0, 5}, {}), {}).report;
  o.check(loss.surface[0] == 1.0 && loss.surface_area_weighted[0] == 4.0 && loss.total == 5.0, "area-weighted loss example");

  const auto sphere = make_icosphere(3);
  const double U = 1.0;
  std::vector<double> cp, zeros(sphere.face_count(), 0.0);
  for (const auto& c : sphere.face_center) {
    const Vec3 q = normalized_or_zero(c);
    cp.push_back(0.5 * U * U * (1.0 - 2.25 * (1.0 - q.x * q.x)));
  }
  const double ref = 0.5 * U * U * std::numbers::pi;
  const double dalembert = std::abs(integrate_drag(sphere.face_normal, sphere.face_area, cp, zeros)) / ref;
  o.detail << "potential-flow drag " << dalembert << " of 1/2 U^2 pi R^2";
  o.check(dalembert < 0.01, "d'Alembert");

  const auto ell = scaled_translated(make_icosphere(3), {1.3, 0.7, 0.5}, {0.2, 0.1, -0.3});
  const std::vector<double> uniform(ell.face_count(), 2.5), no_shear(ell.face_count(), 0.0);
  const double closed = std::abs(integrate_drag(ell.face_normal, ell.face_area, uniform, no_shear)) / (2.5 * ell.total_area());
  o.detail << ", uniform-pressure drag " << closed << " relative";
  o.check(closed < 1e-6, "closed surface");
}

// ---------------------------------------------------------------- 4

void overfit(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(401);
  const auto data = make_dataset(1, 1, 1, DatasetConfig{}, {}, {}, rng);
  DominoModel model = init_model(ModelConfig{}, 402);
  TrainConfig tc;
  tc.epochs = 200;
  tc.seed = 403;
  Trainer tr(model, samples_with_split(data, Split::kTrain), tc);
  const auto& h = tr.run().history;
  const double ratio = h.front().validation_loss / h.back().validation_loss;
  const auto train = samples_with_split(data, Split::kTrain);
  const MetricsReport rep = evaluate(train, model_fields(model, 4096, 0), {});
  const double l2p = rep.samples[0].surface_l2[0];
  o.detail << "loss " << h.front().validation_loss << " -> " << h.back().validation_loss << " (" << ratio << "x), surface p rel L2 " << l2p
           << ", " << seconds_since(t0) << " s";
  o.check(ratio >= 10.0, "loss decrease");
  o.check(l2p < 0.05, "surface pressure L2");
}

// ---------------------------------------------------------------- 5, 6

struct Generalization {
  std::vector<SampleBundle> data;
  DominoModel model;
  double seconds = 0;
};

Generalization train_generalization() {
  const auto t0 = std::chrono::steady_clock::now();
  Generalization g;
  Rng rng(2024);
  g.data = make_dataset(16, 4, 2, DatasetConfig{}, {}, {}, rng);
  g.model = init_model(ModelConfig{}, 11);
  TrainConfig tc;
  tc.epochs = 500;
  tc.seed = 12;
  Trainer tr(g.model, samples_with_split(g.data, Split::kTrain), tc);
  tr.run();
  g.seconds = seconds_since(t0);
  return g;
}

void generalization(Outcome& o, Generalization& g) {
  const auto test = pointers(g.data, true);
  const MetricsReport rep = evaluate(test, model_fields(g.model, 4096, 0), {});
  std::size_t beaten = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& m = rep.samples[i];
    const double base_p = constant_mean_l2(test[i]->surface.fields[0]);
    const double base_u = constant_mean_l2(test[i]->volume.fields[1]);
    o.detail << m.id << " p " << m.surface_l2[0] << "/" << base_p << " ux " << m.volume_l2[1] << "/" << base_u << "; ";
    const bool ok = m.surface_l2[0] < base_p && m.volume_l2[1] < base_u;
    beaten += ok;
    o.check(ok, m.id + " baseline");
  }
  o.detail << "spearman " << rep.all.spearman << ", trained in " << g.seconds << " s";
  o.check(rep.all.spearman >= 0.7, "spearman");
  o.check(g.seconds < 1800, "runtime");
}

void mesh_independence(Outcome& o, Generalization& g) {
  const auto test = pointers(g.data, true);
  EvalConfig mesh_cfg, cloud_cfg;
  cloud_cfg.points = {PointSource::Kind::kCloud, test[0]->geometry.face_count()};
  const MetricsReport mesh = evaluate(test, model_fields(g.model, 4096, 0), mesh_cfg);
  const MetricsReport cloud = evaluate(test, model_fields(g.model, 4096, 0), cloud_cfg);
  double worst = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    o.check(cloud.samples[i].surface_points == mesh.samples[i].surface_points, "same point count");
    worst = std::max(worst, std::abs(mesh.samples[i].drag_pred - cloud.samples[i].drag_pred) / std::abs(mesh.samples[i].drag_pred));
  }
  const double dr2 = std::abs(mesh.all.r2 - cloud.all.r2);
  o.detail << "worst mesh/cloud drag difference " << worst << ", R^2 mesh " << mesh.all.r2 << " cloud " << cloud.all.r2;
  o.check(worst < 0.05, "per-sample drag");
  o.check(dr2 < 0.05, "R^2 difference");
}

// ---------------------------------------------------------------- 7

void scalability(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(701);
  const auto data = make_dataset(1, 1, 1, DatasetConfig{}, {}, {}, rng);
  DominoModel model = init_model(ModelConfig{}, 702);
  fit_normalization(model, samples_with_split(data, Split::kTrain));
  const PreparedGeometry geom(data[0].geometry, model.config);
  const FieldPredictor fp(model, geom, 703);
  const std::size_t n = 1000000, batch = 10000;
  const auto queries = sample_volume_uniform(geom.frame().domain_box, geom.surface(), n, rng);

  auto footprint = [&](std::span<const Vec3> q, std::vector<double>& out) {
    out.assign(q.size() * 5, 0.0);
    const long long base = g_live.load();
    g_peak.store(base);
    fp.predict_into(Mode::kVolume, q, {}, out, batch);
    return g_peak.load() - base;
  };
  std::vector<double> small, large;
  const long long f_small = footprint(std::span(queries).first(batch), small);
  const long long f_large = footprint(queries, large);
  o.detail << "peak extra bytes " << f_large << " for 1e6 points vs " << f_small << " for 1e4 (" << double(f_large) / double(f_small) << "x)";
  o.check(f_large <= 2 * f_small, "memory bound");

  std::size_t unequal = 0;
  for (std::size_t i = 0; i < small.size(); ++i) unequal += small[i] != large[i];
  const std::size_t off = 512345, len = 20000;
  const auto mid = fp.predict(Mode::kVolume, std::span(queries).subspan(off, len), {}, 777);
  for (std::size_t i = 0; i < mid.size(); ++i) unequal += mid[i] != large[off * 5 + i];
  o.detail << ", unequal outputs " << unequal << ", " << seconds_since(t0) << " s";
  o.check(unequal == 0, "batch equality");
}

// ---------------------------------------------------------------- 8

void determinism(Outcome& o) {
  Rng rng(801);
  const auto data = make_dataset(2, 1, 1, DatasetConfig{}, {}, {}, rng);
  const auto train = samples_with_split(data, Split::kTrain);
  TrainConfig full_cfg;
  full_cfg.epochs = 6;
  full_cfg.seed = 802;
  auto run = [&](int epochs) {
    TrainConfig c = full_cfg;
    c.epochs = epochs;
    auto model = std::make_unique<DominoModel>(init_model(ModelConfig{}, 803));
    auto tr = std::make_unique<Trainer>(*model, train, c);
    tr->run();
    return std::pair{std::move(model), std::move(tr)};
  };
  const auto a = run(6), b = run(6);
  const auto& ha = a.second->progress().history;
  const auto& hb = b.second->progress().history;
  bool identical = ha.size() == hb.size();
  for (std::size_t i = 0; identical && i < ha.size(); ++i)
    identical = std::bit_cast<std::uint64_t>(ha[i].train_loss) == std::bit_cast<std::uint64_t>(hb[i].train_loss) &&
                std::bit_cast<std::uint64_t>(ha[i].validation_loss) == std::bit_cast<std::uint64_t>(hb[i].validation_loss);
  o.check(identical, "bit-identical history");

  const auto half = run(3);
  const std::string bytes = io::checkpoint_to_container(*half.first, full_cfg, half.second->progress()).serialize();
  io::Checkpoint ck = io::checkpoint_from_container(io::ArrayContainer::parse(bytes));
  Trainer resumed(ck.model, train, full_cfg, false);
  resumed.resume(ck.progress);
  const auto& hr = resumed.run().history;
  double worst = 0;
  for (std::size_t i = 0; i < ha.size(); ++i)
    worst = std::max({worst, std::abs(hr[i].train_loss - ha[i].train_loss), std::abs(hr[i].validation_loss - ha[i].validation_loss)});
  o.detail << "two runs " << (identical ? "bit-identical" : "differ") << ", resume max loss difference " << worst;
  o.check(hr.size() == ha.size() && worst <= 1e-9, "resume");
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<void(Outcome&)>& fn) {
    Outcome o;
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "]";
    }
    failures += !o.pass;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.str().c_str());
    std::fflush(stdout);
  };

  report(1, "gradient integrity", gradient_integrity);
  report(2, "oracle equivalence", oracle_equivalence);
  report(3, "metric correctness", metric_correctness);
  report(4, "overfit smoke test", overfit);
  std::optional<Generalization> g;
  auto with_model = [&](auto fn) {
    return [&, fn](Outcome& o) {
      if (!g) g = train_generalization();
      fn(o, *g);
    };
  };
  report(5, "generalization", with_model(generalization));
  report(6, "mesh independence", with_model(mesh_independence));
  report(7, "scalability", scalability);
  report(8, "determinism", determinism);
  return failures == 0 ? 0 : 1;
}
