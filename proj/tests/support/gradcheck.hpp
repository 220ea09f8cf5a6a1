#pragma once

// Central finite-difference gradient checker (test-only oracle).

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "domino/nn/tape.hpp"

namespace domino::testkit {

/// |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor keeps
/// entries whose true gradient is ~0 from dividing round-off by round-off.
inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

inline constexpr double kFdStep = 1e-5;
inline constexpr double kRelFloor = 1e-4;

using LossFn = std::function<nn::Var(nn::Tape&)>;

/// Checks d loss / d parameter for every parameter in the store. At most
/// `per_param` entries of each parameter are probed (evenly strided).
inline GradCheckReport check_param_gradients(nn::ParamStore& store, const LossFn& loss, std::size_t per_param = 64,
                                             double h = kFdStep, double floor = kRelFloor) {
  store.zero_grad();
  {
    nn::Tape t;
    t.backward(loss(t));
  }
  GradCheckReport rep;
  auto eval = [&] {
    nn::Tape t(false);
    return t.value(loss(t))[0];
  };
  for (auto& [name, p] : store) {
    const std::size_t n = p.tensor.size();
    const std::size_t stride = std::max<std::size_t>(1, n / per_param);
    for (std::size_t i = 0; i < n; i += stride) {
      const double orig = p.tensor.values[i];
      p.tensor.values[i] = orig + h;
      const double up = eval();
      p.tensor.values[i] = orig - h;
      const double down = eval();
      p.tensor.values[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double err = relative_error(p.tensor.grad[i], numeric, floor);
      ++rep.checked;
      if (err > rep.max_rel_error) {
        rep.max_rel_error = err;
        rep.worst = name + "[" + std::to_string(i) + "] analytic=" + std::to_string(p.tensor.grad[i]) +
                    " numeric=" + std::to_string(numeric);
      }
    }
  }
  store.zero_grad();
  return rep;
}

/// Checks the gradient with respect to an input leaf built from `x`.
inline GradCheckReport check_input_gradients(std::vector<double> x, const nn::Shape& shape,
                                             const std::function<nn::Var(nn::Tape&, nn::Var)>& loss,
                                             double h = kFdStep, double floor = kRelFloor) {
  std::vector<double> analytic;
  {
    nn::Tape t;
    const nn::Var in = t.input(shape, x);
    t.backward(loss(t, in));
    analytic = t.grad(in);
  }
  GradCheckReport rep;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    auto eval = [&](double v) {
      x[i] = v;
      nn::Tape t(false);
      return t.value(loss(t, t.constant(shape, x)))[0];
    };
    const double numeric = (eval(orig + h) - eval(orig - h)) / (2 * h);
    x[i] = orig;
    const double err = relative_error(analytic[i], numeric, floor);
    ++rep.checked;
    if (err > rep.max_rel_error) {
      rep.max_rel_error = err;
      rep.worst = "input[" + std::to_string(i) + "] analytic=" + std::to_string(analytic[i]) + " numeric=" + std::to_string(numeric);
    }
  }
  return rep;
}

/// Fixed random projection weights so scalar losses mix every output.
inline std::vector<double> projection(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> w(n);
  for (auto& v : w) v = u(rng);
  return w;
}

}  // namespace domino::testkit
