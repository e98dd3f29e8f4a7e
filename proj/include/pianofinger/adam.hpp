#pragma once

#include <cmath>

#include "pianofinger/params.hpp"

namespace pianofinger {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update over every parameter; gradients are zeroed
// afterwards. The store's step counter is shared by all parameters.
template <typename T>
inline void adam_step(ParamStore<T>& params, const AdamConfig& cfg) {
  const std::int64_t t = ++params.step();
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T corr1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(t)));
  const T corr2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(t)));
  const T lr = static_cast<T>(cfg.lr);
  const T eps = static_cast<T>(cfg.eps);
  for (std::size_t i = 0; i < params.count(); ++i) {
    Param<T>& p = params[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const T g = p.grad[k];
      p.m[k] = b1 * p.m[k] + (T(1) - b1) * g;
      p.v[k] = b2 * p.v[k] + (T(1) - b2) * g * g;
      const T mhat = p.m[k] / corr1;
      const T vhat = p.v[k] / corr2;
      p.value[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    check_finite(p.value, p.name.c_str());
    p.grad.fill(T(0));
  }
}

}  // namespace pianofinger
