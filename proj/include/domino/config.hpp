#pragma once

// Run configuration as JSON. Every section is optional; absent keys keep
// their defaults and unknown keys are rejected with their full path.

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "domino/datagen.hpp"
#include "domino/model.hpp"
#include "domino/pipeline.hpp"

namespace domino {

using Json = nlohmann::json;

struct ExportConfig {
  int resolution = 64;                       // raster points per side
  std::vector<double> stations{0.5, 1.0, 2.0};  // line probes, body lengths downstream of the body centre
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t n_train = 16;
  std::size_t n_test_in = 4;
  std::size_t n_test_out = 2;
  DatasetConfig dataset;
  ModelConfig model;
  TrainConfig training;
  std::size_t eval_batch = 4096;
  std::string eval_points = "mesh";
  ExportConfig exports;

  void validate() const {
    dataset.validate();
    model.validate();
    training.validate();
    if (n_train < 1 || n_test_in < 1 || n_test_out < 1) throw ValidationError("dataset.n_train, n_test_in and n_test_out must be >= 1");
    if (eval_batch < 1) throw ValidationError("evaluation.batch must be >= 1");
    PointSource::parse(eval_points);
    if (exports.resolution < 2) throw ValidationError("export.resolution must be >= 2");
  }

  TrainConfig train_config() const {
    TrainConfig t = training;
    t.seed = derive_seed({seed, 0x7a1u});
    return t;
  }
};

namespace detail {

inline const char* activation_name(nn::Activation a) {
  switch (a) {
    case nn::Activation::kRelu: return "relu";
    case nn::Activation::kGelu: return "gelu";
    case nn::Activation::kNone: return "none";
  }
  return "relu";
}

/// Reads the members of one JSON object, remembering which were used.
class JsonReader {
 public:
  JsonReader(const Json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ValidationError("config " + where() + " must be a JSON object");
  }

  bool has(const std::string& key) const { return j_->contains(key); }

  JsonReader child(const std::string& key) {
    used_.insert(key);
    return JsonReader(j_->at(key), join(key));
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    used_.insert(key);
    out = convert<T>(j_->at(key), join(key));
  }

  /// Rejects every key that was not read.
  void finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!used_.count(it.key())) throw ValidationError("unknown config key '" + join(it.key()) + "'");
  }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "root" : "'" + path_ + "'"; }

  template <class T>
  static T convert(const Json& v, const std::string& path) {
    auto bad = [&](const char* what) { return ValidationError("config key '" + path + "' must be " + what); };
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw bad("a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw bad("a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, int>) {
      if (!v.is_number_integer()) throw bad("an integer");
      const auto x = v.get<std::int64_t>();
      if (x < INT32_MIN || x > INT32_MAX) throw bad("a 32-bit integer");
      return static_cast<int>(x);
    } else if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned()) throw bad("a non-negative integer");
      return static_cast<T>(v.get<std::uint64_t>());
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw bad("a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::optional<double>>) {
      if (v.is_null()) return std::nullopt;
      return convert<double>(v, path);
    } else if constexpr (std::is_same_v<T, nn::Activation>) {
      const auto s = convert<std::string>(v, path);
      if (s == "relu") return nn::Activation::kRelu;
      if (s == "gelu") return nn::Activation::kGelu;
      throw bad("\"relu\" or \"gelu\"");
    } else if constexpr (std::is_same_v<T, Vec3>) {
      if (!v.is_array() || v.size() != 3) throw bad("an array of 3 numbers");
      return Vec3{convert<double>(v[0], path), convert<double>(v[1], path), convert<double>(v[2], path)};
    } else {
      if (!v.is_array()) throw bad("an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(convert<typename T::value_type>(v[i], path + "[" + std::to_string(i) + "]"));
      return out;
    }
  }

  const Json* j_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace detail

inline Json to_json(const ModelConfig& m) {
  const auto& e = m.encoder;
  const auto& p = m.predictor;
  return Json{
      {"cloud_points", m.cloud_points},
      {"encoder",
       {{"m", e.m},
        {"f", e.f},
        {"radii", e.radii},
        {"n_y", e.n_y},
        {"kernel_hidden", e.kernel_hidden},
        {"n_iter", e.n_iter},
        {"tau", e.tau ? Json(*e.tau) : Json(nullptr)},
        {"activation", detail::activation_name(e.activation)}}},
      {"predictor",
       {{"l", p.l},
        {"n_f", p.n_f},
        {"local_hidden", p.local_hidden},
        {"basis_widths", p.basis_widths},
        {"fusion_hidden", p.fusion_hidden},
        {"p", p.p},
        {"stencil_cells", p.stencil_cells},
        {"idw_epsilon", p.idw_epsilon},
        {"activation", detail::activation_name(p.activation)}}},
      {"flow", {{"axis", m.flow.axis}, {"sign", m.flow.sign}}},
      {"trim", {{"upstream", m.trim.upstream}, {"downstream", m.trim.downstream}, {"lateral", m.trim.lateral}}},
  };
}

inline void read_model_config(detail::JsonReader r, ModelConfig& m) {
  r.get("cloud_points", m.cloud_points);
  if (r.has("encoder")) {
    auto e = r.child("encoder");
    e.get("m", m.encoder.m);
    e.get("f", m.encoder.f);
    e.get("radii", m.encoder.radii);
    e.get("n_y", m.encoder.n_y);
    e.get("kernel_hidden", m.encoder.kernel_hidden);
    e.get("n_iter", m.encoder.n_iter);
    e.get("tau", m.encoder.tau);
    e.get("activation", m.encoder.activation);
    e.finish();
  }
  if (r.has("predictor")) {
    auto p = r.child("predictor");
    p.get("l", m.predictor.l);
    p.get("n_f", m.predictor.n_f);
    p.get("local_hidden", m.predictor.local_hidden);
    p.get("basis_widths", m.predictor.basis_widths);
    p.get("fusion_hidden", m.predictor.fusion_hidden);
    p.get("p", m.predictor.p);
    p.get("stencil_cells", m.predictor.stencil_cells);
    p.get("idw_epsilon", m.predictor.idw_epsilon);
    p.get("activation", m.predictor.activation);
    p.finish();
  }
  if (r.has("flow")) {
    auto f = r.child("flow");
    f.get("axis", m.flow.axis);
    f.get("sign", m.flow.sign);
    f.finish();
  }
  if (r.has("trim")) {
    auto t = r.child("trim");
    t.get("upstream", m.trim.upstream);
    t.get("downstream", m.trim.downstream);
    t.get("lateral", m.trim.lateral);
    t.finish();
  }
  r.finish();
}

inline ModelConfig model_config_from_json(const Json& j) {
  ModelConfig m;
  read_model_config(detail::JsonReader(j, "model"), m);
  m.validate();
  return m;
}

inline Json to_json(const TrainConfig& t) {
  return Json{{"epochs", t.epochs},
              {"lr", t.lr},
              {"min_lr", t.min_lr},
              {"lr_factor", t.lr_factor},
              {"patience", t.patience},
              {"plateau_threshold", t.plateau_threshold},
              {"surface_points", t.surface_points},
              {"volume_points", t.volume_points},
              {"validation_surface_points", t.validation_surface_points},
              {"validation_volume_points", t.validation_volume_points},
              {"checkpoint_every", t.checkpoint_every}};
}

inline void read_train_config(detail::JsonReader r, TrainConfig& t) {
  r.get("epochs", t.epochs);
  r.get("lr", t.lr);
  r.get("min_lr", t.min_lr);
  r.get("lr_factor", t.lr_factor);
  r.get("patience", t.patience);
  r.get("plateau_threshold", t.plateau_threshold);
  r.get("surface_points", t.surface_points);
  r.get("volume_points", t.volume_points);
  r.get("validation_surface_points", t.validation_surface_points);
  r.get("validation_volume_points", t.validation_volume_points);
  r.get("checkpoint_every", t.checkpoint_every);
  r.finish();
}

inline Json to_json(const RunConfig& c) {
  const auto& d = c.dataset;
  auto vec = [](const Vec3& v) { return Json::array({v.x, v.y, v.z}); };
  return Json{
      {"seed", c.seed},
      {"dataset",
       {{"n_train", c.n_train},
        {"n_test_in", c.n_test_in},
        {"n_test_out", c.n_test_out},
        {"subdivision", d.subdivision},
        {"U", d.U},
        {"axes_min", vec(d.axes_min)},
        {"axes_max", vec(d.axes_max)},
        {"center_jitter", d.center_jitter},
        {"ood_stretch", d.ood_stretch},
        {"volume_points", d.volume_points},
        {"max_retries", d.max_retries}}},
      {"model", to_json(c.model)},
      {"training", to_json(c.training)},
      {"evaluation", {{"batch", c.eval_batch}, {"points", c.eval_points}}},
      {"export", {{"resolution", c.exports.resolution}, {"stations", c.exports.stations}}},
  };
}

inline RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  detail::JsonReader r(j, "");
  r.get("seed", c.seed);
  if (r.has("dataset")) {
    auto d = r.child("dataset");
    d.get("n_train", c.n_train);
    d.get("n_test_in", c.n_test_in);
    d.get("n_test_out", c.n_test_out);
    d.get("subdivision", c.dataset.subdivision);
    d.get("U", c.dataset.U);
    d.get("axes_min", c.dataset.axes_min);
    d.get("axes_max", c.dataset.axes_max);
    d.get("center_jitter", c.dataset.center_jitter);
    d.get("ood_stretch", c.dataset.ood_stretch);
    d.get("volume_points", c.dataset.volume_points);
    d.get("max_retries", c.dataset.max_retries);
    d.finish();
  }
  if (r.has("model")) read_model_config(r.child("model"), c.model);
  if (r.has("training")) read_train_config(r.child("training"), c.training);
  if (r.has("evaluation")) {
    auto e = r.child("evaluation");
    e.get("batch", c.eval_batch);
    e.get("points", c.eval_points);
    e.finish();
  }
  if (r.has("export")) {
    auto x = r.child("export");
    x.get("resolution", c.exports.resolution);
    x.get("stations", c.exports.stations);
    x.finish();
  }
  r.finish();
  c.validate();
  return c;
}

/// Parses JSON text; syntax errors become ValidationError.
inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(what + " is not valid JSON: " + e.what());
  }
}

}  // namespace domino
