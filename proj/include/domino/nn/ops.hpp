#pragma once

// Dense differentiable operations on rank-2 [rows, cols] tensors.

#include <Eigen/Core>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "domino/nn/tape.hpp"

namespace domino::nn {

namespace detail {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

inline ConstMap cmat(const double* v, std::size_t r, std::size_t c) {
  return ConstMap(v, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
inline MutMap mmat(double* v, std::size_t r, std::size_t c) {
  return MutMap(v, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
}  // namespace detail

/// [n,k] x [k,m] -> [n,m]
inline Var matmul(Tape& t, Var a, Var b) {
  const std::size_t n = t.rows(a), k = t.cols(a), m = t.cols(b);
  if (k != t.rows(b))
    throw ContractError("matmul inner dimension mismatch: " + to_string(t.shape(a)) + " x " + to_string(t.shape(b)));
  // Each output row accumulates over k in ascending order, independent of n,
  // so a row's value does not depend on which batch it was computed in.
  std::vector<double> out(n * m, 0.0);
  const double* av = t.value(a).data();
  const double* bv = t.value(b).data();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * m;
    for (std::size_t q = 0; q < k; ++q) {
      const double s = av[i * k + q];
      const double* brow = bv + q * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += s * brow[j];
    }
  }
  const Var y = t.push({n, m}, std::move(out), t.any_requires_grad({a, b}));
  t.on_backward(y, [=](Tape& tp) {
    const auto gy = detail::cmat(tp.grad(y).data(), n, m);
    if (tp.requires_grad(a))
      detail::mmat(tp.grad(a).data(), n, k).noalias() += gy * detail::cmat(tp.value(b).data(), k, m).transpose();
    if (tp.requires_grad(b))
      detail::mmat(tp.grad(b).data(), k, m).noalias() += detail::cmat(tp.value(a).data(), n, k).transpose() * gy;
  });
  return y;
}

/// x[n,m] + b[m] broadcast over rows.
inline Var add_bias(Tape& t, Var x, Var b) {
  const std::size_t n = t.rows(x), m = t.cols(x);
  if (t.value(b).size() != m) throw ContractError("bias width " + std::to_string(t.value(b).size()) + " != " + std::to_string(m));
  std::vector<double> out = t.value(x);
  const auto& bv = t.value(b);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] += bv[c];
  const Var y = t.push(t.shape(x), std::move(out), t.any_requires_grad({x, b}));
  t.on_backward(y, [=](Tape& tp) {
    const auto& gy = tp.grad(y);
    if (tp.requires_grad(x)) {
      auto& gx = tp.grad(x);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    }
    if (tp.requires_grad(b)) {
      auto& gb = tp.grad(b);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < m; ++c) gb[c] += gy[r * m + c];
    }
  });
  return y;
}

inline Var relu(Tape& t, Var x) {
  std::vector<double> out = t.value(x);
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  const Var y = t.push(t.shape(x), std::move(out), t.any_requires_grad({x}));
  t.on_backward(y, [=](Tape& tp) {
    const auto& gy = tp.grad(y);
    const auto& xv = tp.value(x);
    auto& gx = tp.grad(x);
    for (std::size_t i = 0; i < gy.size(); ++i)
      if (xv[i] > 0.0) gx[i] += gy[i];
  });
  return y;
}

/// Exact (erf) GELU.
inline Var gelu(Tape& t, Var x) {
  std::vector<double> out = t.value(x);
  for (auto& v : out) v = 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2));
  const Var y = t.push(t.shape(x), std::move(out), t.any_requires_grad({x}));
  t.on_backward(y, [=](Tape& tp) {
    const auto& gy = tp.grad(y);
    const auto& xv = tp.value(x);
    auto& gx = tp.grad(x);
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      const double v = xv[i];
      const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
      gx[i] += gy[i] * (cdf + v * inv_sqrt_2pi * std::exp(-0.5 * v * v));
    }
  });
  return y;
}

/// Column-wise concatenation of tensors with equal row counts.
inline Var concat_cols(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols of nothing");
  const std::size_t n = t.rows(parts[0]);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  bool rg = false;
  for (auto p : parts) {
    if (t.rows(p) != n) throw ContractError("concat_cols row mismatch");
    widths.push_back(t.cols(p));
    total += widths.back();
    rg = rg || t.any_requires_grad({p});
  }
  std::vector<double> out(n * total);
  std::size_t off = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& v = t.value(parts[i]);
    for (std::size_t r = 0; r < n; ++r)
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(r * widths[i]), widths[i],
                  out.begin() + static_cast<std::ptrdiff_t>(r * total + off));
    off += widths[i];
  }
  const Var y = t.push({n, total}, std::move(out), rg);
  t.on_backward(y, [=](Tape& tp) {
    const auto& gy = tp.grad(y);
    std::size_t o = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (tp.requires_grad(parts[i])) {
        auto& g = tp.grad(parts[i]);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < widths[i]; ++c) g[r * widths[i] + c] += gy[r * total + o + c];
      }
      o += widths[i];
    }
  });
  return y;
}

/// Repeats each row k times consecutively: [n,c] -> [n*k,c].
inline Var repeat_rows(Tape& t, Var x, std::size_t k) {
  const std::size_t n = t.rows(x), c = t.cols(x);
  std::vector<double> out(n * k * c);
  const auto& xv = t.value(x);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < k; ++j)
      std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(r * c), c, out.begin() + static_cast<std::ptrdiff_t>((r * k + j) * c));
  const Var y = t.push({n * k, c}, std::move(out), t.any_requires_grad({x}));
  t.on_backward(y, [=](Tape& tp) {
    const auto& gy = tp.grad(y);
    auto& gx = tp.grad(x);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < k; ++j)
        for (std::size_t q = 0; q < c; ++q) gx[r * c + q] += gy[(r * k + j) * c + q];
  });
  return y;
}

/// Same values, new shape.
inline Var reshape(Tape& t, Var x, Shape shape) {
  if (element_count(shape) != t.value(x).size())
    throw ContractError("reshape " + to_string(t.shape(x)) + " -> " + to_string(shape));
  const Var y = t.push(std::move(shape), t.value(x), t.any_requires_grad({x}));
  t.on_backward(y, [=](Tape& tp) {
    const auto& gy = tp.grad(y);
    auto& gx = tp.grad(x);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
  });
  return y;
}

/// Column j of an [n,c] matrix as an [n,1] matrix.
inline Var column(Tape& t, Var x, std::size_t j) {
  const std::size_t n = t.rows(x), c = t.cols(x);
  if (j >= c) throw ContractError("column " + std::to_string(j) + " of a " + std::to_string(c) + "-column matrix");
  std::vector<double> out(n);
  const auto& xv = t.value(x);
  for (std::size_t r = 0; r < n; ++r) out[r] = xv[r * c + j];
  const Var y = t.push({n, 1}, std::move(out), t.any_requires_grad({x}));
  t.on_backward(y, [=](Tape& tp) {
    const auto& gy = tp.grad(y);
    auto& gx = tp.grad(x);
    for (std::size_t r = 0; r < n; ++r) gx[r * c + j] += gy[r];
  });
  return y;
}

/// Sums row segments: out[s] = sum of rows offsets[s] .. offsets[s+1]-1.
/// Empty segments give zero rows.
inline Var segment_sum(Tape& t, Var x, std::vector<std::size_t> offsets) {
  const std::size_t c = t.cols(x);
  if (offsets.empty() || offsets.back() != t.rows(x)) throw ContractError("segment offsets do not cover the input rows");
  const std::size_t segs = offsets.size() - 1;
  std::vector<double> out(segs * c, 0.0);
  const auto& xv = t.value(x);
  for (std::size_t s = 0; s < segs; ++s)
    for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r)
      for (std::size_t q = 0; q < c; ++q) out[s * c + q] += xv[r * c + q];
  const Var y = t.push({segs, c}, std::move(out), t.any_requires_grad({x}));
  t.on_backward(y, [=, offsets = std::move(offsets)](Tape& tp) {
    const auto& gy = tp.grad(y);
    auto& gx = tp.grad(x);
    for (std::size_t s = 0; s < segs; ++s)
      for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r)
        for (std::size_t q = 0; q < c; ++q) gx[r * c + q] += gy[s * c + q];
  });
  return y;
}

/// Normalised weighted mean over consecutive groups of `group` rows:
/// out[g] = sum_j w_j x_j / sum_j w_j. Weights are constants.
inline Var weighted_group_mean(Tape& t, Var x, std::vector<double> weights, std::size_t group) {
  const std::size_t rows = t.rows(x), c = t.cols(x);
  if (group == 0 || rows % group != 0 || weights.size() != rows)
    throw ContractError("weighted_group_mean: rows must split into groups with one weight per row");
  const std::size_t n = rows / group;
  std::vector<double> norm_w(rows);
  for (std::size_t g = 0; g < n; ++g) {
    double s = 0.0;
    for (std::size_t j = 0; j < group; ++j) s += weights[g * group + j];
    for (std::size_t j = 0; j < group; ++j) norm_w[g * group + j] = weights[g * group + j] / s;
  }
  std::vector<double> out(n * c, 0.0);
  const auto& xv = t.value(x);
  for (std::size_t g = 0; g < n; ++g)
    for (std::size_t j = 0; j < group; ++j)
      for (std::size_t q = 0; q < c; ++q) out[g * c + q] += norm_w[g * group + j] * xv[(g * group + j) * c + q];
  const Var y = t.push({n, c}, std::move(out), t.any_requires_grad({x}));
  t.on_backward(y, [=, norm_w = std::move(norm_w)](Tape& tp) {
    const auto& gy = tp.grad(y);
    auto& gx = tp.grad(x);
    for (std::size_t g = 0; g < n; ++g)
      for (std::size_t j = 0; j < group; ++j)
        for (std::size_t q = 0; q < c; ++q) gx[(g * group + j) * c + q] += norm_w[g * group + j] * gy[g * c + q];
  });
  return y;
}

/// mean_i (s_i * (x_i - y_i))^2 over all elements; `scale` may be empty (all ones).
inline Var mse(Tape& t, Var pred, std::vector<double> target, std::vector<double> scale = {}) {
  const auto& pv = t.value(pred);
  if (target.size() != pv.size()) throw ContractError("mse target length mismatch");
  if (!scale.empty() && scale.size() != pv.size()) throw ContractError("mse scale length mismatch");
  if (pv.empty()) throw ContractError("mse of an empty batch");
  const double inv_n = 1.0 / static_cast<double>(pv.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double s = scale.empty() ? 1.0 : scale[i];
    const double d = s * pv[i] - s * target[i];
    acc += d * d;
  }
  const Var y = t.push({1}, {acc * inv_n}, t.any_requires_grad({pred}));
  t.on_backward(y, [=, target = std::move(target), scale = std::move(scale)](Tape& tp) {
    const double gy = tp.grad(y)[0];
    const auto& p = tp.value(pred);
    auto& gp = tp.grad(pred);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double s = scale.empty() ? 1.0 : scale[i];
      gp[i] += gy * 2.0 * inv_n * s * (s * p[i] - s * target[i]);
    }
  });
  return y;
}

/// Elementwise sum of equally shaped tensors.
inline Var add_n(Tape& t, const std::vector<Var>& xs) {
  if (xs.empty()) throw ContractError("add_n of nothing");
  std::vector<double> out = t.value(xs[0]);
  bool rg = t.any_requires_grad({xs[0]});
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const auto& v = t.value(xs[i]);
    if (v.size() != out.size()) throw ContractError("add_n size mismatch");
    for (std::size_t k = 0; k < v.size(); ++k) out[k] += v[k];
    rg = rg || t.any_requires_grad({xs[i]});
  }
  const Var y = t.push(t.shape(xs[0]), std::move(out), rg);
  t.on_backward(y, [=](Tape& tp) {
    const auto& gy = tp.grad(y);
    for (auto x : xs) {
      if (!tp.requires_grad(x)) continue;
      auto& gx = tp.grad(x);
      for (std::size_t k = 0; k < gy.size(); ++k) gx[k] += gy[k];
    }
  });
  return y;
}

/// sum_i w_i x_i with constant weights.
inline Var weighted_sum(Tape& t, Var x, std::vector<double> w) {
  const auto& xv = t.value(x);
  if (w.size() != xv.size()) throw ContractError("weighted_sum length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * xv[i];
  const Var y = t.push({1}, {acc}, t.any_requires_grad({x}));
  t.on_backward(y, [=, w = std::move(w)](Tape& tp) {
    const double gy = tp.grad(y)[0];
    auto& gx = tp.grad(x);
    for (std::size_t i = 0; i < w.size(); ++i) gx[i] += gy * w[i];
  });
  return y;
}

}  // namespace domino::nn
