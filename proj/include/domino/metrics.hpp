#pragma once

// Engineering metrics: relative L2 error, drag integration, R^2, Spearman.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "domino/error.hpp"
#include "domino/spatial/grid.hpp"

namespace domino {

enum class L2Form {
  kResidual,  // sqrt(sum (t-p)^2) / sqrt(sum t^2)
  kPrinted,   // sqrt(sum t^2 - sum p^2) / sqrt(sum t^2); can be undefined
};

/// Relative L2 error. With weights, both fields are multiplied by them first.
inline double relative_l2(std::span<const double> truth, std::span<const double> pred, std::span<const double> weights = {},
                          L2Form form = L2Form::kResidual) {
  if (truth.size() != pred.size()) throw ContractError("relative_l2: length mismatch");
  if (!weights.empty() && weights.size() != truth.size()) throw ContractError("relative_l2: weight length mismatch");
  double num = 0.0, den = 0.0, pp = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    const double t = w * truth[i], p = w * pred[i];
    num += (t - p) * (t - p);
    den += t * t;
    pp += p * p;
  }
  if (den == 0.0) throw ValidationError("relative_l2: truth is all zero");
  if (form == L2Form::kPrinted) return std::sqrt(den - pp) / std::sqrt(den);  // NaN when pred outweighs truth
  return std::sqrt(num) / std::sqrt(den);
}

/// F = sign * sum_i (p_i n_i[axis] + tau_i[axis]) a_i.
inline double integrate_drag(std::span<const Vec3> normals, std::span<const double> areas, std::span<const double> pressure,
                             std::span<const double> shear_axis, FlowAxis flow = {}) {
  const std::size_t n = normals.size();
  if (areas.size() != n || pressure.size() != n || shear_axis.size() != n) throw ContractError("integrate_drag: length mismatch");
  double f = 0.0;
  for (std::size_t i = 0; i < n; ++i) f += (pressure[i] * normals[i][flow.axis] + shear_axis[i]) * areas[i];
  return flow.sign * f;
}

/// Coefficient of determination of `pred` against `truth`.
inline double r_squared(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size() || truth.empty()) throw ContractError("r_squared: bad lengths");
  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  if (ss_tot == 0.0) throw ValidationError("r_squared: truth has zero variance");
  return 1.0 - ss_res / ss_tot;
}

/// Ranks starting at 1; ties get their average rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// Spearman rank correlation (Pearson correlation of average ranks).
inline double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ContractError("spearman: need two equal-length series of size >= 2");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n, mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace domino
