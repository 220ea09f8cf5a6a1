#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "domino/nn/param_store.hpp"

namespace domino::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update of every parameter; gradients are zeroed after.
inline void adam_step(ParamStore& store, double lr, const AdamConfig& cfg = {}) {
  for (auto& [name, p] : store)
    if (!p.tensor.has_grad()) throw ContractError("parameter '" + name + "' has no gradient");
  for (auto& [name, p] : store) {
    ++p.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.step));
    auto& v = p.tensor.values;
    auto& g = p.tensor.grad;
    for (std::size_t i = 0; i < v.size(); ++i) {
      p.first_moment[i] = cfg.beta1 * p.first_moment[i] + (1.0 - cfg.beta1) * g[i];
      p.second_moment[i] = cfg.beta2 * p.second_moment[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = p.first_moment[i] / c1;
      const double v_hat = p.second_moment[i] / c2;
      v[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
      g[i] = 0.0;
    }
  }
}

/// Reduce-on-plateau: after `patience` consecutive epochs without a relative
/// improvement larger than `threshold`, multiply the rate by `factor`.
struct PlateauScheduler {
  double lr = 1e-3;
  double min_lr = 1e-6;
  double factor = 0.5;
  int patience = 10;
  double threshold = 1e-4;

  double best = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  double step(double validation_loss) {
    if (validation_loss < best * (1.0 - threshold) || !std::isfinite(best)) {
      best = validation_loss;
      bad_epochs = 0;
    } else if (++bad_epochs >= patience) {
      lr = std::max(lr * factor, min_lr);
      bad_epochs = 0;
    }
    return lr;
  }
};

}  // namespace domino::nn
