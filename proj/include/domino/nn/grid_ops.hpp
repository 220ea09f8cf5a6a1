#pragma once

// Differentiable operations on channels-last 3-D grids stored as [nodes, channels].

#include <array>
#include <memory>
#include <optional>
#include <span>

#include "domino/nn/ops.hpp"
#include "domino/spatial/grid.hpp"

namespace domino::nn {

using GridDims = std::array<int, 3>;

inline std::size_t node_count(const GridDims& d) { return static_cast<std::size_t>(d[0]) * d[1] * d[2]; }

/// 3x3x3 convolution with zero padding. Weight layout [27*c_in, c_out] with the
/// offset (dx,dy,dz) in {-1,0,1}^3 enumerated dx-major; bias [c_out].
inline Var conv3d(Tape& t, Var x, const GridDims& dims, Var weight, Var bias) {
  const std::size_t n = node_count(dims);
  if (t.rows(x) != n) throw ContractError("conv3d input has " + std::to_string(t.rows(x)) + " rows for a grid of " + std::to_string(n));
  const std::size_t cin = t.cols(x);
  const std::size_t cout = t.cols(weight);
  if (t.rows(weight) != 27 * cin)
    throw ContractError("conv3d weight " + to_string(t.shape(weight)) + " does not match " + std::to_string(cin) + " input channels");
  if (t.value(bias).size() != cout) throw ContractError("conv3d bias width mismatch");

  auto col = std::make_shared<std::vector<double>>(n * 27 * cin, 0.0);
  const auto& xv = t.value(x);
  for (int i = 0; i < dims[0]; ++i)
    for (int j = 0; j < dims[1]; ++j)
      for (int k = 0; k < dims[2]; ++k) {
        const std::size_t row = (static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k;
        double* dst = col->data() + row * 27 * cin;
        int o = 0;
        for (int di = -1; di <= 1; ++di)
          for (int dj = -1; dj <= 1; ++dj)
            for (int dk = -1; dk <= 1; ++dk, ++o) {
              const int a = i + di, b = j + dj, c = k + dk;
              if (a < 0 || b < 0 || c < 0 || a >= dims[0] || b >= dims[1] || c >= dims[2]) continue;
              const std::size_t src = (static_cast<std::size_t>(a) * dims[1] + b) * dims[2] + c;
              std::copy_n(xv.data() + src * cin, cin, dst + o * cin);
            }
      }
  std::vector<double> out(n * cout);
  auto om = detail::mmat(out.data(), n, cout);
  om.noalias() = detail::cmat(col->data(), n, 27 * cin) * detail::cmat(t.value(weight).data(), 27 * cin, cout);
  const auto& bv = t.value(bias);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < cout; ++c) out[r * cout + c] += bv[c];

  const Var y = t.push({n, cout}, std::move(out), t.any_requires_grad({x, weight, bias}));
  if (!t.requires_grad(y)) return y;
  t.on_backward(y, [=](Tape& tp) {
    const auto gy = detail::cmat(tp.grad(y).data(), n, cout);
    if (tp.requires_grad(weight))
      detail::mmat(tp.grad(weight).data(), 27 * cin, cout).noalias() += detail::cmat(col->data(), n, 27 * cin).transpose() * gy;
    if (tp.requires_grad(bias)) {
      auto& gb = tp.grad(bias);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < cout; ++c) gb[c] += gy(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    if (tp.requires_grad(x)) {
      std::vector<double> gcol(n * 27 * cin);
      detail::mmat(gcol.data(), n, 27 * cin).noalias() = gy * detail::cmat(tp.value(weight).data(), 27 * cin, cout).transpose();
      auto& gx = tp.grad(x);
      for (int i = 0; i < dims[0]; ++i)
        for (int j = 0; j < dims[1]; ++j)
          for (int k = 0; k < dims[2]; ++k) {
            const std::size_t row = (static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k;
            const double* src = gcol.data() + row * 27 * cin;
            int o = 0;
            for (int di = -1; di <= 1; ++di)
              for (int dj = -1; dj <= 1; ++dj)
                for (int dk = -1; dk <= 1; ++dk, ++o) {
                  const int a = i + di, b = j + dj, c = k + dk;
                  if (a < 0 || b < 0 || c < 0 || a >= dims[0] || b >= dims[1] || c >= dims[2]) continue;
                  const std::size_t dst = (static_cast<std::size_t>(a) * dims[1] + b) * dims[2] + c;
                  for (std::size_t q = 0; q < cin; ++q) gx[dst * cin + q] += src[o * cin + q];
                }
          }
    }
  });
  return y;
}

inline void require_even(const GridDims& dims, const char* op) {
  for (int a = 0; a < 3; ++a)
    if (dims[a] % 2 != 0) throw ContractError(std::string(op) + " needs even grid dimensions, got " + std::to_string(dims[a]));
}

/// 2x2x2 max pooling; ties resolve to the first corner in dx-major order.
inline Var max_pool2(Tape& t, Var x, const GridDims& dims) {
  require_even(dims, "max_pool2");
  const std::size_t c = t.cols(x);
  const GridDims od{dims[0] / 2, dims[1] / 2, dims[2] / 2};
  const std::size_t on = node_count(od);
  std::vector<double> out(on * c);
  auto arg = std::make_shared<std::vector<std::size_t>>(on * c);
  const auto& xv = t.value(x);
  for (int i = 0; i < od[0]; ++i)
    for (int j = 0; j < od[1]; ++j)
      for (int k = 0; k < od[2]; ++k) {
        const std::size_t orow = (static_cast<std::size_t>(i) * od[1] + j) * od[2] + k;
        for (std::size_t q = 0; q < c; ++q) {
          double best = 0.0;
          std::size_t best_idx = 0;
          bool first = true;
          for (int di = 0; di < 2; ++di)
            for (int dj = 0; dj < 2; ++dj)
              for (int dk = 0; dk < 2; ++dk) {
                const std::size_t src = ((static_cast<std::size_t>(2 * i + di) * dims[1] + 2 * j + dj) * dims[2] + 2 * k + dk) * c + q;
                if (first || xv[src] > best) {
                  best = xv[src];
                  best_idx = src;
                  first = false;
                }
              }
          out[orow * c + q] = best;
          (*arg)[orow * c + q] = best_idx;
        }
      }
  const Var y = t.push({on, c}, std::move(out), t.any_requires_grad({x}));
  t.on_backward(y, [=](Tape& tp) {
    const auto& gy = tp.grad(y);
    auto& gx = tp.grad(x);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[(*arg)[i]] += gy[i];
  });
  return y;
}

/// Nearest-neighbour 2x upsampling; `dims` are the input (coarse) dimensions.
inline Var unpool2(Tape& t, Var x, const GridDims& dims) {
  const std::size_t c = t.cols(x);
  if (t.rows(x) != node_count(dims)) throw ContractError("unpool2 input size does not match its grid");
  const GridDims od{dims[0] * 2, dims[1] * 2, dims[2] * 2};
  const std::size_t on = node_count(od);
  std::vector<double> out(on * c);
  const auto& xv = t.value(x);
  auto src_of = [=](int i, int j, int k) { return (static_cast<std::size_t>(i / 2) * dims[1] + j / 2) * dims[2] + k / 2; };
  for (int i = 0; i < od[0]; ++i)
    for (int j = 0; j < od[1]; ++j)
      for (int k = 0; k < od[2]; ++k) {
        const std::size_t orow = (static_cast<std::size_t>(i) * od[1] + j) * od[2] + k;
        std::copy_n(xv.data() + src_of(i, j, k) * c, c, out.data() + orow * c);
      }
  const Var y = t.push({on, c}, std::move(out), t.any_requires_grad({x}));
  t.on_backward(y, [=](Tape& tp) {
    const auto& gy = tp.grad(y);
    auto& gx = tp.grad(x);
    for (int i = 0; i < od[0]; ++i)
      for (int j = 0; j < od[1]; ++j)
        for (int k = 0; k < od[2]; ++k) {
          const std::size_t orow = (static_cast<std::size_t>(i) * od[1] + j) * od[2] + k;
          const std::size_t s = src_of(i, j, k);
          for (std::size_t q = 0; q < c; ++q) gx[s * c + q] += gy[orow * c + q];
        }
  });
  return y;
}

/// Trilinear interpolation of every channel at each position. With `support`
/// set, positions outside that box read zero.
inline Var grid_sample(Tape& t, Var grid, const GridGeometry& geometry, std::span<const Vec3> positions,
                       std::optional<BoundingBox> support = std::nullopt) {
  if (t.rows(grid) != geometry.node_count()) throw ContractError("grid_sample: grid rows do not match geometry");
  const std::size_t c = t.cols(grid);
  const std::size_t n = positions.size();
  auto stencils = std::make_shared<std::vector<TrilinearStencil>>(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (support && !support->contains(positions[i])) {
      (*stencils)[i].weight.fill(0.0);
      continue;
    }
    (*stencils)[i] = trilinear_stencil(geometry, positions[i]);
  }
  std::vector<double> out(n * c, 0.0);
  const auto& gv = t.value(grid);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& st = (*stencils)[i];
    for (int k = 0; k < 8; ++k) {
      const double w = st.weight[k];
      if (w == 0.0) continue;
      const double* src = gv.data() + st.node[k] * c;
      double* dst = out.data() + i * c;
      for (std::size_t q = 0; q < c; ++q) dst[q] += w * src[q];
    }
  }
  const Var y = t.push({n, c}, std::move(out), t.any_requires_grad({grid}));
  t.on_backward(y, [=](Tape& tp) {
    const auto& gy = tp.grad(y);
    auto& gg = tp.grad(grid);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& st = (*stencils)[i];
      for (int k = 0; k < 8; ++k) {
        const double w = st.weight[k];
        if (w == 0.0) continue;
        for (std::size_t q = 0; q < c; ++q) gg[st.node[k] * c + q] += w * gy[i * c + q];
      }
    }
  });
  return y;
}

}  // namespace domino::nn
