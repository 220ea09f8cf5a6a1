#pragma once

// Sample bundles and checkpoints stored as array containers.

#include <string>
#include <vector>

#include "domino/config.hpp"
#include "domino/io/container.hpp"

namespace domino::io {

namespace detail {

inline std::vector<double> flatten(const std::vector<Vec3>& v) {
  std::vector<double> out;
  out.reserve(v.size() * 3);
  for (const auto& p : v) out.insert(out.end(), {p.x, p.y, p.z});
  return out;
}

inline std::vector<Vec3> points(const ArrayContainer& c, const std::string& name) {
  const Array& a = c.at(name);
  if (a.dims.size() != 2 || a.dims[1] != 3) throw ValidationError("entry '" + name + "' must have shape [n, 3]");
  const auto& v = c.f64(name);
  std::vector<Vec3> out(v.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {v[3 * i], v[3 * i + 1], v[3 * i + 2]};
  return out;
}

inline Vec3 vec3(const ArrayContainer& c, const std::string& name) {
  const auto& v = c.f64(name);
  if (v.size() != 3) throw ValidationError("entry '" + name + "' must hold 3 values");
  return {v[0], v[1], v[2]};
}

inline std::uint32_t u32_scalar(const ArrayContainer& c, const std::string& name) {
  const auto& v = c.u32(name);
  if (v.size() != 1) throw ValidationError("entry '" + name + "' is not a scalar");
  return v[0];
}

/// One per-row variable column; a missing column names the variable.
inline std::vector<double> field(const ArrayContainer& c, const std::string& sample, const std::string& name, std::size_t rows) {
  if (!c.contains(name)) throw ValidationError("sample '" + sample + "' is missing variable '" + name + "'");
  const auto& v = c.f64(name);
  if (v.size() != rows) throw ValidationError("sample '" + sample + "': variable '" + name + "' has the wrong length");
  return v;
}

}  // namespace detail

inline ArrayContainer bundle_to_container(const SampleBundle& b) {
  ArrayContainer c;
  c.put_text("id", b.spec.id);
  c.put("split", {1}, std::vector<std::uint32_t>{static_cast<std::uint32_t>(b.split)});
  c.put("spec.semi_axes", {3}, std::vector<double>{b.spec.semi_axes.x, b.spec.semi_axes.y, b.spec.semi_axes.z});
  c.put("spec.center", {3}, std::vector<double>{b.spec.center.x, b.spec.center.y, b.spec.center.z});
  c.put("spec.subdivision", {1}, std::vector<std::uint32_t>{static_cast<std::uint32_t>(b.spec.subdivision)});
  c.put_scalar("spec.U", b.spec.U);
  c.put_scalar("drag", b.drag);
  const auto& g = b.geometry;
  c.put("geometry.vertices", {g.vertices.size(), 3}, detail::flatten(g.vertices));
  std::vector<std::uint32_t> faces;
  for (const auto& f : g.faces) faces.insert(faces.end(), f.begin(), f.end());
  c.put("geometry.faces", {g.faces.size(), 3}, std::move(faces));
  const std::size_t ns = b.surface.position.size();
  c.put("surface.position", {ns, 3}, detail::flatten(b.surface.position));
  c.put("surface.normal", {ns, 3}, detail::flatten(b.surface.normal));
  c.put("surface.area", {ns}, b.surface.area);
  for (std::size_t v = 0; v < 4; ++v) c.put("surface." + variables(Mode::kSurface)[v], {ns}, b.surface.fields[v]);
  const std::size_t nv = b.volume.position.size();
  c.put("volume.position", {nv, 3}, detail::flatten(b.volume.position));
  for (std::size_t v = 0; v < 5; ++v) c.put("volume." + variables(Mode::kVolume)[v], {nv}, b.volume.fields[v]);
  return c;
}

/// Inverse of bundle_to_container. The volume table is optional; surface
/// variables are not.
inline SampleBundle bundle_from_container(const ArrayContainer& c) {
  SampleBundle b;
  b.spec.id = c.text("id");
  const auto split = detail::u32_scalar(c, "split");
  if (split > 2) throw ValidationError("sample '" + b.spec.id + "' has an unknown split tag");
  b.split = static_cast<Split>(split);
  b.spec.semi_axes = detail::vec3(c, "spec.semi_axes");
  b.spec.center = detail::vec3(c, "spec.center");
  b.spec.subdivision = static_cast<int>(detail::u32_scalar(c, "spec.subdivision"));
  b.spec.U = c.scalar("spec.U");
  b.drag = c.scalar("drag");
  b.geometry.vertices = detail::points(c, "geometry.vertices");
  const auto& f = c.u32("geometry.faces");
  if (c.at("geometry.faces").dims.size() != 2 || c.at("geometry.faces").dims[1] != 3)
    throw ValidationError("entry 'geometry.faces' must have shape [n, 3]");
  for (std::size_t i = 0; i < f.size(); i += 3) {
    for (std::size_t k = 0; k < 3; ++k)
      if (f[i + k] >= b.geometry.vertices.size()) throw ValidationError("sample '" + b.spec.id + "': face index out of range");
    b.geometry.faces.push_back({f[i], f[i + 1], f[i + 2]});
  }
  face_properties(b.geometry);
  b.surface.position = detail::points(c, "surface.position");
  const std::size_t ns = b.surface.position.size();
  b.surface.normal = detail::points(c, "surface.normal");
  b.surface.area = detail::field(c, b.spec.id, "surface.area", ns);
  if (b.surface.normal.size() != ns) throw ValidationError("sample '" + b.spec.id + "': surface normals have the wrong length");
  for (std::size_t v = 0; v < 4; ++v) b.surface.fields[v] = detail::field(c, b.spec.id, "surface." + variables(Mode::kSurface)[v], ns);
  if (c.contains("volume.position")) {
    b.volume.position = detail::points(c, "volume.position");
    const std::size_t nv = b.volume.position.size();
    for (std::size_t v = 0; v < 5; ++v) b.volume.fields[v] = detail::field(c, b.spec.id, "volume." + variables(Mode::kVolume)[v], nv);
  }
  return b;
}

// ---------------------------------------------------------------- checkpoints

enum class CheckpointKind : std::uint32_t { kModel = 0, kIdentityOracle = 1 };

struct Checkpoint {
  CheckpointKind kind = CheckpointKind::kModel;
  DominoModel model;
  TrainConfig training;
  TrainProgress progress;
};

inline ArrayContainer checkpoint_to_container(const DominoModel& model, const TrainConfig& training, const TrainProgress& progress) {
  ArrayContainer c;
  c.put("kind", {1}, std::vector<std::uint32_t>{static_cast<std::uint32_t>(CheckpointKind::kModel)});
  c.put_text("config.model", to_json(model.config).dump());
  c.put_text("config.training", to_json(training).dump());
  c.put("config.training_seed", {2}, std::vector<std::uint32_t>{static_cast<std::uint32_t>(training.seed), static_cast<std::uint32_t>(training.seed >> 32)});
  for (const auto& [name, p] : model.params) {
    const std::vector<std::uint64_t> dims(p.tensor.shape.begin(), p.tensor.shape.end());
    c.put("param." + name, dims, p.tensor.values);
    c.put("adam.m." + name, dims, p.first_moment);
    c.put("adam.v." + name, dims, p.second_moment);
    c.put_scalar("adam.step." + name, static_cast<double>(p.step));
  }
  c.put("stats.surface.mean", {4}, model.surface_stats.mean);
  c.put("stats.surface.scale", {4}, model.surface_stats.scale);
  c.put("stats.volume.mean", {5}, model.volume_stats.mean);
  c.put("stats.volume.scale", {5}, model.volume_stats.scale);
  const auto& s = progress.scheduler;
  c.put("progress.state", {7},
        std::vector<double>{static_cast<double>(progress.epochs_done), s.lr, s.best, static_cast<double>(s.bad_epochs),
                            progress.best_validation, s.min_lr, s.factor});
  std::vector<double> hist;
  for (const auto& r : progress.history) hist.insert(hist.end(), {static_cast<double>(r.epoch), r.lr, r.train_loss, r.validation_loss});
  c.put("progress.history", {progress.history.size(), 4}, std::move(hist));
  return c;
}

/// Test fixture checkpoint whose "predictions" are the stored truth.
inline ArrayContainer identity_oracle_container() {
  ArrayContainer c;
  c.put("kind", {1}, std::vector<std::uint32_t>{static_cast<std::uint32_t>(CheckpointKind::kIdentityOracle)});
  return c;
}

inline Checkpoint checkpoint_from_container(const ArrayContainer& c) {
  Checkpoint ck;
  const auto kind = detail::u32_scalar(c, "kind");
  if (kind > 1) throw ValidationError("unknown checkpoint kind " + std::to_string(kind));
  ck.kind = static_cast<CheckpointKind>(kind);
  if (ck.kind == CheckpointKind::kIdentityOracle) return ck;

  const ModelConfig mc = model_config_from_json(parse_json(c.text("config.model"), "checkpoint model config"));
  read_train_config(domino::detail::JsonReader(parse_json(c.text("config.training"), "checkpoint training config"), "training"),
                    ck.training);
  const auto& seed = c.u32("config.training_seed");
  if (seed.size() != 2) throw ValidationError("entry 'config.training_seed' must hold 2 words");
  ck.training.seed = static_cast<std::uint64_t>(seed[0]) | static_cast<std::uint64_t>(seed[1]) << 32;

  // The layout comes from the config; every parameter must be present with
  // the expected shape and no extra ones may exist.
  ck.model = init_model(mc, 0);
  std::size_t found = 0;
  for (const auto& name : c.names())
    if (name.rfind("param.", 0) == 0) ++found;
  if (found != ck.model.params.size()) throw ValidationError("checkpoint parameters do not match its model config");
  for (auto& [name, p] : ck.model.params) {
    const Array& a = c.at("param." + name);
    if (!std::equal(a.dims.begin(), a.dims.end(), p.tensor.shape.begin(), p.tensor.shape.end()))
      throw ValidationError("checkpoint parameter '" + name + "' has the wrong shape");
    p.tensor.values = c.f64("param." + name);
    p.first_moment = c.f64("adam.m." + name);
    p.second_moment = c.f64("adam.v." + name);
    if (p.first_moment.size() != p.tensor.size() || p.second_moment.size() != p.tensor.size())
      throw ValidationError("checkpoint optimizer state of '" + name + "' has the wrong size");
    p.step = static_cast<std::uint64_t>(c.scalar("adam.step." + name));
  }
  auto stats = [&](const std::string& mode, std::size_t n) {
    FieldStats s{c.f64("stats." + mode + ".mean"), c.f64("stats." + mode + ".scale")};
    if (s.mean.size() != n || s.scale.size() != n) throw ValidationError("checkpoint " + mode + " statistics have the wrong size");
    return s;
  };
  ck.model.surface_stats = stats("surface", 4);
  ck.model.volume_stats = stats("volume", 5);

  const auto& st = c.f64("progress.state");
  if (st.size() != 7) throw ValidationError("entry 'progress.state' must hold 7 values");
  ck.progress.epochs_done = static_cast<int>(st[0]);
  ck.progress.scheduler = {st[1], st[5], st[6], ck.training.patience, ck.training.plateau_threshold};
  ck.progress.scheduler.best = st[2];
  ck.progress.scheduler.bad_epochs = static_cast<int>(st[3]);
  ck.progress.best_validation = st[4];
  const auto& h = c.f64("progress.history");
  if (h.size() % 4 != 0) throw ValidationError("entry 'progress.history' must have 4 columns");
  for (std::size_t i = 0; i < h.size(); i += 4) ck.progress.history.push_back({static_cast<int>(h[i]), h[i + 1], h[i + 2], h[i + 3]});
  if (ck.progress.history.size() != static_cast<std::size_t>(ck.progress.epochs_done))
    throw ValidationError("checkpoint history does not match its epoch count");
  return ck;
}

}  // namespace domino::io
