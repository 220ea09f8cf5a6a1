#pragma once

// Synthetic benchmark: ellipsoidal bodies with closed-form surrogate flow.
// Velocity and pressure are potential flow past a unit sphere, evaluated in
// the frame that maps the ellipsoid onto that sphere. Shear and turbulent
// viscosity are synthetic patterns with the right variable roles.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "domino/metrics.hpp"
#include "domino/shapes.hpp"
#include "domino/spatial.hpp"

namespace domino {

inline constexpr double kShearCoefficient = 0.01;   // mu_s
inline constexpr double kWakeViscosity = 0.1;

struct ShapeSpec {
  Vec3 semi_axes{1, 1, 1};
  Vec3 center{};
  int subdivision = 3;
  double U = 1.0;
  std::string id;

  void validate() const {
    if (!(semi_axes.x > 0 && semi_axes.y > 0 && semi_axes.z > 0)) throw ValidationError("shape '" + id + "': semi-axes must be > 0");
    if (subdivision < 1) throw ValidationError("shape '" + id + "': subdivision must be >= 1");
    if (!(U > 0)) throw ValidationError("shape '" + id + "': freestream speed must be > 0");
  }
};

inline TriangleSurface generate_shape(const ShapeSpec& spec) {
  spec.validate();
  return scaled_translated(make_icosphere(spec.subdivision), spec.semi_axes, spec.center);
}

/// Smallest distance from the origin to a face plane of the unit icosphere:
/// mesh-exterior points can sit this far inside the analytic sphere.
inline double icosphere_inradius(int subdivision) {
  const TriangleSurface s = make_icosphere(subdivision);
  double r = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < s.face_count(); ++f) r = std::min(r, std::abs(dot(s.face_normal[f], s.vertices[s.faces[f][0]])));
  return r;
}

struct FlowPoint {
  Vec3 velocity;
  double pressure = 0.0;
};

/// Potential flow past the unit sphere, freestream U along +x, at sphere-frame
/// position q (|q| > 0): u = U[(1 + 1/(2r^3)) x - (3/2) q_x q / r^5].
inline FlowPoint sphere_potential_flow(const Vec3& q, double U) {
  const double r2 = squared_norm(q);
  const double r = std::sqrt(r2);
  const double r3 = r2 * r, r5 = r3 * r2;
  const Vec3 u = Vec3{U * (1.0 + 0.5 / r3), 0, 0} - q * (1.5 * U * q.x / r5);
  return {u, 0.5 * (U * U - squared_norm(u))};
}

/// Physical-frame helpers for one shape.
class AnalyticFlow {
 public:
  explicit AnalyticFlow(const ShapeSpec& spec) : spec_(spec), min_radius_(icosphere_inradius(spec.subdivision)) { spec.validate(); }

  Vec3 to_sphere(const Vec3& x) const {
    const Vec3 d = x - spec_.center;
    return {d.x / spec_.semi_axes.x, d.y / spec_.semi_axes.y, d.z / spec_.semi_axes.z};
  }
  /// Maps a sphere-frame velocity to the physical frame, preserving
  /// no-penetration and the freestream: diag(1, b/a, c/a) u.
  Vec3 to_physical_velocity(const Vec3& u) const {
    const Vec3& s = spec_.semi_axes;
    return {u.x, u.y * s.y / s.x, u.z * s.z / s.x};
  }

  double wake_viscosity(const Vec3& x) const {
    const Vec3& s = spec_.semi_axes;
    const Vec3 d = x - spec_.center;
    const double w = std::max(s.y, s.z);
    const double behind = std::max(0.0, d.x - s.x);
    if (behind == 0.0) return 0.0;
    return kWakeViscosity * spec_.U * std::exp(-(d.y * d.y + d.z * d.z) / (w * w)) * behind / (2.0 * s.x);
  }

  /// Volume fields {p, u_x, u_y, u_z, nu_t}. Points inside the body (beyond
  /// the faceting tolerance) are rejected.
  std::array<double, 5> volume(const Vec3& x) const {
    const Vec3 q = to_sphere(x);
    const double r = norm(q);
    if (r < min_radius_ * (1.0 - 1e-9))
      throw ValidationError("volume point (" + std::to_string(x.x) + ", " + std::to_string(x.y) + ", " + std::to_string(x.z) +
                            ") lies inside body '" + spec_.id + "'");
    const FlowPoint f = sphere_potential_flow(q, spec_.U);
    const Vec3 u = to_physical_velocity(f.velocity);
    return {f.pressure, u.x, u.y, u.z, wake_viscosity(x)};
  }

  /// Surface fields {p, tau_x, tau_y, tau_z} at a point on (or near) the body:
  /// p = U^2/2 (1 - 9/4 sin^2 theta), tau = mu_s U sin(theta) t.
  std::array<double, 4> surface(const Vec3& x) const {
    const Vec3 q = normalized_or_zero(to_sphere(x));
    const double cos_t = std::clamp(q.x, -1.0, 1.0);
    const double sin2 = std::max(0.0, 1.0 - cos_t * cos_t);
    const double U = spec_.U;
    const double p = 0.5 * U * U * (1.0 - 2.25 * sin2);
    const Vec3 tangent_q = Vec3{1, 0, 0} - q * q.x;  // direction of the surface velocity
    const Vec3 t = normalized_or_zero(to_physical_velocity(tangent_q));
    const Vec3 tau = t * (kShearCoefficient * U * std::sqrt(sin2));
    return {p, tau.x, tau.y, tau.z};
  }

 private:
  ShapeSpec spec_;
  double min_radius_;
};

struct SurfaceTable {
  std::vector<Vec3> position, normal;
  std::vector<double> area;
  std::array<std::vector<double>, 4> fields;  // p, tau_x, tau_y, tau_z
  std::size_t size() const { return position.size(); }
};

struct VolumeTable {
  std::vector<Vec3> position;
  std::array<std::vector<double>, 5> fields;  // p, u_x, u_y, u_z, nu_t
  std::size_t size() const { return position.size(); }
};

inline SurfaceTable surface_fields(const ShapeSpec& spec, std::span<const Vec3> pos, std::span<const Vec3> normals,
                                   std::span<const double> areas) {
  if (normals.size() != pos.size() || areas.size() != pos.size()) throw ContractError("surface_fields: length mismatch");
  const AnalyticFlow flow(spec);
  SurfaceTable t;
  t.position.assign(pos.begin(), pos.end());
  t.normal.assign(normals.begin(), normals.end());
  t.area.assign(areas.begin(), areas.end());
  for (auto& f : t.fields) f.reserve(pos.size());
  for (const auto& x : pos) {
    const auto v = flow.surface(x);
    for (int k = 0; k < 4; ++k) t.fields[k].push_back(v[k]);
  }
  return t;
}

inline VolumeTable volume_fields(const ShapeSpec& spec, std::span<const Vec3> pos) {
  const AnalyticFlow flow(spec);
  VolumeTable t;
  t.position.assign(pos.begin(), pos.end());
  for (auto& f : t.fields) f.reserve(pos.size());
  for (const auto& x : pos) {
    const auto v = flow.volume(x);
    for (int k = 0; k < 5; ++k) t.fields[k].push_back(v[k]);
  }
  return t;
}

inline double surface_drag(const SurfaceTable& s, FlowAxis flow = {}) {
  return integrate_drag(s.normal, s.area, s.fields[0], s.fields[1 + flow.axis], flow);
}

enum class Split { kTrain = 0, kTestIn = 1, kTestOut = 2 };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kTestIn: return "test_in";
    case Split::kTestOut: return "test_out";
  }
  return "?";
}

struct SampleBundle {
  ShapeSpec spec;
  TriangleSurface geometry;
  SurfaceTable surface;  // one row per face centre
  VolumeTable volume;
  double drag = 0.0;
  Split split = Split::kTrain;
};

/// Builds the geometry and both tables; volume points are uniform in the
/// domain box outside the body.
inline SampleBundle generate_sample(const ShapeSpec& spec, std::size_t volume_points, FlowAxis flow, const TrimFactors& trim,
                                    Rng& rng) {
  SampleBundle b;
  b.spec = spec;
  b.geometry = generate_shape(spec);
  b.surface = surface_fields(spec, b.geometry.face_center, b.geometry.face_normal, b.geometry.face_area);
  const BoundingBox domain = make_domain_box(bounding_box(b.geometry), flow, trim);
  b.volume = volume_fields(spec, sample_volume_uniform(domain, b.geometry, volume_points, rng));
  b.drag = surface_drag(b.surface, flow);
  return b;
}

struct DatasetConfig {
  int subdivision = 3;
  double U = 0.02;
  Vec3 axes_min{0.6, 0.3, 0.3};
  Vec3 axes_max{1.4, 1.0, 1.0};
  double center_jitter = 0.1;
  double ood_stretch = 0.35;  // how far past the range out-of-distribution axes go, as a fraction of the range
  std::size_t volume_points = 8192;
  int max_retries = 200;

  void validate() const {
    if (subdivision < 1) throw ValidationError("datagen.subdivision must be >= 1");
    if (!(U > 0)) throw ValidationError("datagen.U must be > 0");
    for (int a = 0; a < 3; ++a)
      if (!(axes_min[a] > 0 && axes_max[a] > axes_min[a])) throw ValidationError("datagen axis ranges must satisfy 0 < min < max");
    if (!(center_jitter >= 0)) throw ValidationError("datagen.center_jitter must be >= 0");
    if (!(ood_stretch > 0)) throw ValidationError("datagen.ood_stretch must be > 0");
    if (volume_points < 1) throw ValidationError("datagen.volume_points must be >= 1");
    if (max_retries < 1) throw ValidationError("datagen.max_retries must be >= 1");
  }
};

/// Calls `attempt` until `accept` holds for its result, at most `max_tries`
/// times; then fails with `what`.
template <class Attempt, class Accept>
auto retry_until(int max_tries, const std::string& what, Attempt&& attempt, Accept&& accept) {
  for (int i = 0; i < max_tries; ++i) {
    auto v = attempt();
    if (accept(v)) return v;
  }
  throw RuntimeFailure(what + " after " + std::to_string(max_tries) + " attempts");
}

/// Train shapes are drawn inside the axis ranges. In-distribution test shapes
/// interpolate between two train shapes; out-of-distribution ones go beyond
/// the ranges (alternately larger and smaller). Draws are retried until every
/// tag agrees with the drag rule: a test sample is out-of-distribution exactly
/// when its drag lies outside the train min-max.
inline std::vector<SampleBundle> make_dataset(std::size_t n_train, std::size_t n_test_in, std::size_t n_test_out,
                                              const DatasetConfig& cfg, FlowAxis flow, const TrimFactors& trim, Rng& rng) {
  cfg.validate();
  if (flow.axis != 0 || flow.sign != 1) throw ValidationError("the analytic benchmark flows along +x; set flow axis 0, sign +1");
  if (n_train < 1 || n_test_in < 1 || n_test_out < 1) throw ValidationError("dataset counts must be >= 1");
  auto draw_axes = [&](double lo_frac, double hi_frac) {
    Vec3 a;
    for (int k = 0; k < 3; ++k) {
      const double span = cfg.axes_max[k] - cfg.axes_min[k];
      a[k] = std::max(cfg.axes_min[k] + span * (lo_frac + (hi_frac - lo_frac) * uniform01(rng)), 0.05 * cfg.axes_min[k]);
    }
    return a;
  };
  auto draw_center = [&] {
    Vec3 c;
    for (int k = 0; k < 3; ++k) c[k] = cfg.center_jitter * (2.0 * uniform01(rng) - 1.0);
    return c;
  };
  auto make = [&](Split split, std::size_t index, const Vec3& axes, const Vec3& center) {
    ShapeSpec s;
    s.semi_axes = axes;
    s.center = center;
    s.subdivision = cfg.subdivision;
    s.U = cfg.U;
    s.id = std::string(split_name(split)) + "_" + std::to_string(index);
    SampleBundle b = generate_sample(s, cfg.volume_points, flow, trim, rng);
    b.split = split;
    return b;
  };

  std::vector<SampleBundle> out;
  for (std::size_t i = 0; i < n_train; ++i) out.push_back(make(Split::kTrain, i, draw_axes(0.0, 1.0), draw_center()));
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& b : out) {
    lo = std::min(lo, b.drag);
    hi = std::max(hi, b.drag);
  }
  auto inside = [&](const SampleBundle& b) { return b.drag >= lo && b.drag <= hi; };
  for (std::size_t i = 0; i < n_test_in; ++i) {
    out.push_back(retry_until(cfg.max_retries, "in-distribution test shape left the train drag range",
                              [&] {
                                const auto& a = out[static_cast<std::size_t>(uniform01(rng) * n_train) % n_train].spec;
                                const auto& b = out[static_cast<std::size_t>(uniform01(rng) * n_train) % n_train].spec;
                                const double t = uniform01(rng);
                                return make(Split::kTestIn, i, a.semi_axes + (b.semi_axes - a.semi_axes) * t,
                                            a.center + (b.center - a.center) * t);
                              },
                              inside));
  }
  for (std::size_t i = 0; i < n_test_out; ++i) {
    const bool larger = i % 2 == 0;
    out.push_back(retry_until(cfg.max_retries, "out-of-distribution shape stayed inside the train drag range",
                              [&] {
                                return make(Split::kTestOut, i,
                                            larger ? draw_axes(1.0, 1.0 + cfg.ood_stretch) : draw_axes(-cfg.ood_stretch, 0.0),
                                            draw_center());
                              },
                              [&](const SampleBundle& b) { return !inside(b); }));
  }
  return out;
}

}  // namespace domino
