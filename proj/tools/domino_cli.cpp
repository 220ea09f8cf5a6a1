// domino: datagen | train | evaluate | export-slices
//
// Exit codes: 0 success, 1 invalid configuration or input, 2 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "domino/config.hpp"
#include "domino/io/artifacts.hpp"
#include "domino/report.hpp"

namespace fs = std::filesystem;
using namespace domino;

namespace {

RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(parse_json(io::read_file(path), "config '" + path + "'"));
}

void write_text(const fs::path& p, const std::string& s) { io::write_file(p.string(), s); }

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw RuntimeFailure("cannot create directory '" + p.string() + "': " + ec.message());
}

/// Every bundle listed in <dir>/manifest.json, in manifest order.
std::vector<SampleBundle> load_dataset(const fs::path& dir) {
  const Json m = parse_json(io::read_file((dir / "manifest.json").string()), "dataset manifest");
  if (!m.contains("samples") || !m["samples"].is_array()) throw ValidationError("dataset manifest has no 'samples' array");
  std::vector<SampleBundle> out;
  for (const auto& s : m["samples"]) {
    if (!s.contains("file") || !s["file"].is_string()) throw ValidationError("dataset manifest entry without 'file'");
    out.push_back(io::bundle_from_container(io::load_container((dir / s["file"].get<std::string>()).string())));
  }
  return out;
}

int cmd_datagen(const std::string& config, const std::string& out) {
  const RunConfig cfg = load_run_config(config);
  Rng rng(derive_seed({cfg.seed, 0xda7au}));
  const auto data = make_dataset(cfg.n_train, cfg.n_test_in, cfg.n_test_out, cfg.dataset, cfg.model.flow, cfg.model.trim, rng);
  make_dir(out);
  Json samples = Json::array();
  for (const auto& b : data) {
    const std::string file = b.spec.id + ".dmno";
    io::save_container((fs::path(out) / file).string(), io::bundle_to_container(b));
    samples.push_back({{"id", b.spec.id}, {"split", split_name(b.split)}, {"drag", b.drag}, {"file", file}});
  }
  const Json manifest{{"seed", cfg.seed}, {"config", to_json(cfg)}, {"samples", samples}};
  write_text(fs::path(out) / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << data.size() << " samples to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& config, const std::string& data_dir, const std::string& out, const std::string& resume) {
  const RunConfig cfg = load_run_config(config);
  const auto data = load_dataset(data_dir);
  const auto train = samples_with_split(data, Split::kTrain);
  if (train.empty()) throw ValidationError("dataset has no training samples");
  const TrainConfig tc = cfg.train_config();
  make_dir(out);

  DominoModel model;
  std::optional<TrainProgress> start;
  if (!resume.empty()) {
    io::Checkpoint ck = io::checkpoint_from_container(io::load_container(resume));
    if (ck.kind != io::CheckpointKind::kModel) throw ValidationError("cannot resume from an identity-oracle checkpoint");
    if (ck.training.seed != tc.seed) throw ValidationError("resume checkpoint was trained with a different seed");
    model = std::move(ck.model);
    start = std::move(ck.progress);
  } else {
    model = init_model(cfg.model, derive_seed({cfg.seed, 0x1417u}));
  }
  Trainer trainer(model, train, tc, !start.has_value());
  if (start) trainer.resume(std::move(*start));

  const fs::path dir(out);
  auto sink = [&](const DominoModel& m, const TrainProgress& p, CheckpointReason why) {
    const auto c = io::checkpoint_to_container(m, tc, p);
    if (why == CheckpointReason::kBest) {
      io::save_container((dir / "checkpoint_best.dmno").string(), c);
    } else {
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint_epoch_%04d.dmno", p.epochs_done);
      io::save_container((dir / name).string(), c);
    }
  };
  const TrainProgress& p = trainer.run(sink, [](const EpochRecord& r) {
    std::cout << "epoch " << r.epoch << " lr " << fmt_double(r.lr) << " train " << fmt_double(r.train_loss) << " validation "
              << fmt_double(r.validation_loss) << "\n";
  });
  io::save_container((dir / "checkpoint_last.dmno").string(), io::checkpoint_to_container(model, tc, p));
  write_text(dir / "loss_history.csv", history_csv(p.history));

  // Final metrics on the held-out in-distribution samples.
  const auto val = samples_with_split(data, Split::kTestIn);
  Json summary{{"seed", cfg.seed}, {"epochs", p.epochs_done}, {"final_lr", p.scheduler.lr}, {"best_validation_loss", p.best_validation}};
  if (!val.empty()) {
    EvalConfig ec;
    ec.batch = cfg.eval_batch;
    ec.flow = model.config.flow;
    const MetricsReport rep = evaluate(val, model_fields(model, ec.batch, ec.seed), ec);
    write_text(dir / "validation_metrics.csv", metrics_csv(rep));
    write_text(dir / "validation_metrics.json", metrics_json(rep).dump(2) + "\n");
  }
  write_text(dir / "train_manifest.json", summary.dump(2) + "\n");
  return 0;
}

std::vector<const SampleBundle*> choose(const std::vector<SampleBundle>& data, const std::string& split) {
  std::vector<const SampleBundle*> out;
  for (const auto& b : data) {
    const bool keep = split == "all" || (split == "test" && b.split != Split::kTrain) || split == split_name(b.split);
    if (keep) out.push_back(&b);
  }
  if (out.empty()) throw ValidationError("no samples with split '" + split + "'");
  return out;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& data_dir, const std::string& points, const std::string& out,
                 const std::string& split, std::size_t batch, std::uint64_t seed) {
  const PointSource src = PointSource::parse(points);
  io::Checkpoint ck = io::checkpoint_from_container(io::load_container(checkpoint));
  const auto data = load_dataset(data_dir);
  EvalConfig ec;
  ec.points = src;
  ec.batch = batch;
  ec.seed = seed;
  FieldFunction fields;
  if (ck.kind == io::CheckpointKind::kIdentityOracle) {
    fields = identity_fields();
  } else {
    ec.flow = ck.model.config.flow;
    fields = model_fields(ck.model, batch, seed);
  }
  const MetricsReport rep = evaluate(choose(data, split), fields, ec);
  make_dir(out);
  write_text(fs::path(out) / "metrics.csv", metrics_csv(rep));
  write_text(fs::path(out) / "drag.csv", drag_csv(rep));
  write_text(fs::path(out) / "metrics.json", metrics_json(rep).dump(2) + "\n");
  std::cout << "drag R^2 " << fmt_double(rep.all.r2) << " over " << rep.samples.size() << " samples\n";
  return 0;
}

/// Writes coordinates and per-variable truth, prediction and error rows.
std::string slice_csv(const std::vector<Vec3>& pts, const std::vector<double>& truth, const std::vector<double>& pred) {
  std::ostringstream o;
  o << "x,y,z";
  for (const auto& v : variables(Mode::kVolume)) o << ',' << v << "_true," << v << "_pred," << v << "_error";
  o << '\n';
  for (std::size_t i = 0; i < pts.size(); ++i) {
    o << fmt_double(pts[i].x) << ',' << fmt_double(pts[i].y) << ',' << fmt_double(pts[i].z);
    for (std::size_t v = 0; v < 5; ++v) {
      const double t = truth[i * 5 + v], p = pred[i * 5 + v];
      o << ',' << fmt_double(t) << ',' << fmt_double(p) << ',' << fmt_double(p - t);
    }
    o << '\n';
  }
  return o.str();
}

int cmd_export(const std::string& checkpoint, const std::string& data_dir, const std::string& sample, const std::string& plane,
               double offset, const std::string& out, int resolution, const std::vector<double>& stations, std::size_t batch) {
  if (plane != "xy" && plane != "xz") throw ValidationError("--plane must be xy or xz");
  if (resolution < 2) throw ValidationError("--resolution must be >= 2");
  io::Checkpoint ck = io::checkpoint_from_container(io::load_container(checkpoint));
  const auto data = load_dataset(data_dir);
  const SampleBundle* b = nullptr;
  for (const auto& d : data)
    if (d.spec.id == sample) b = &d;
  if (!b) throw ValidationError("no sample '" + sample + "' in " + data_dir);

  const ModelConfig mc = ck.kind == io::CheckpointKind::kModel ? ck.model.config : ModelConfig{};
  const PreparedGeometry geom(b->geometry, mc);
  const BoundingBox& box = geom.frame().domain_box;
  const int normal_axis = plane == "xy" ? 2 : 1;
  const int second = plane == "xy" ? 1 : 2;
  if (!(offset >= box.min[normal_axis] && offset <= box.max[normal_axis]))
    throw ValidationError("--offset " + fmt_double(offset) + " lies outside the domain box [" + fmt_double(box.min[normal_axis]) + ", " +
                          fmt_double(box.max[normal_axis]) + "]");

  auto lerp = [&](int axis, int i) {
    return box.min[axis] + (box.max[axis] - box.min[axis]) * (static_cast<double>(i) + 0.5) / static_cast<double>(resolution);
  };
  const AnalyticFlow flow(b->spec);
  std::optional<FieldPredictor> predictor;
  if (ck.kind == io::CheckpointKind::kModel) predictor.emplace(ck.model, geom, 0);
  auto fields = [&](const std::vector<Vec3>& pts, std::vector<double>& truth, std::vector<double>& pred) {
    truth.clear();
    for (const auto& x : pts) {
      try {
        const auto f = flow.volume(x);
        truth.insert(truth.end(), f.begin(), f.end());
      } catch (const ValidationError&) {  // inside the body
        truth.insert(truth.end(), 5, kNaN);
      }
    }
    pred = predictor ? predictor->predict(Mode::kVolume, pts, {}, batch) : truth;
  };

  std::vector<Vec3> raster;
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j) {
      Vec3 x;
      x[0] = lerp(0, i);
      x[second] = lerp(second, j);
      x[normal_axis] = offset;
      raster.push_back(x);
    }
  std::vector<double> truth, pred;
  fields(raster, truth, pred);
  write_text(out, slice_csv(raster, truth, pred));

  // Line probes across the in-plane lateral axis at x-stations measured in
  // body lengths downstream of the body centre.
  const BoundingBox body = bounding_box(b->geometry);
  const double length = body.max.x - body.min.x;
  const double cx = 0.5 * (body.min.x + body.max.x);
  const fs::path stem = fs::path(out).replace_extension();
  for (std::size_t s = 0; s < stations.size(); ++s) {
    const double x0 = cx + stations[s] * length;
    if (!(x0 >= box.min.x && x0 <= box.max.x)) throw ValidationError("line probe station " + fmt_double(stations[s]) + " lies outside the domain box");
    std::vector<Vec3> line;
    for (int j = 0; j < resolution; ++j) {
      Vec3 x;
      x[0] = x0;
      x[second] = lerp(second, j);
      x[normal_axis] = offset;
      line.push_back(x);
    }
    fields(line, truth, pred);
    write_text(stem.string() + "_line" + std::to_string(s) + ".csv", slice_csv(line, truth, pred));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry-conditioned surrogate for surface and volume flow fields"};
  app.require_subcommand(1);

  std::string config, out, data, checkpoint, points = "mesh", split = "test", sample, plane, resume;
  std::size_t batch = 4096;
  std::uint64_t seed = 0;
  double offset = 0.0;
  int resolution = ExportConfig{}.resolution;
  std::vector<double> stations = ExportConfig{}.stations;

  auto* gen = app.add_subcommand("datagen", "Generate the synthetic analytic-flow dataset");
  gen->add_option("--config", config, "Run configuration (JSON)")->required();
  gen->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", config, "Run configuration (JSON)")->required();
  train->add_option("--data", data, "Dataset directory")->required();
  train->add_option("--out", out, "Output directory")->required();
  train->add_option("--resume", resume, "Checkpoint to continue from");

  auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", data, "Dataset directory")->required();
  eval->add_option("--points", points, "mesh | cloud:N");
  eval->add_option("--out", out, "Output directory")->required();
  eval->add_option("--split", split, "test | train | test_in | test_out | all");
  eval->add_option("--batch", batch, "Query batch size");
  eval->add_option("--seed", seed, "Evaluation seed");

  auto* slices = app.add_subcommand("export-slices", "Export plane rasters and line probes");
  slices->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  slices->add_option("--data", data, "Dataset directory")->required();
  slices->add_option("--sample", sample, "Sample id")->required();
  slices->add_option("--plane", plane, "xy | xz")->required();
  slices->add_option("--offset", offset, "Plane offset along its normal axis")->required();
  slices->add_option("--out", out, "Raster CSV; line probes go next to it")->required();
  slices->add_option("--resolution", resolution, "Raster points per side");
  slices->add_option("--stations", stations, "Line-probe stations in body lengths downstream of the centre")->delimiter(',');
  slices->add_option("--batch", batch, "Query batch size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    if (*gen) return cmd_datagen(config, out);
    if (*train) return cmd_train(config, data, out, resume);
    if (*eval) return cmd_evaluate(checkpoint, data, points, out, split, batch, seed);
    if (*slices) return cmd_export(checkpoint, data, sample, plane, offset, out, resolution, stations, batch);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
