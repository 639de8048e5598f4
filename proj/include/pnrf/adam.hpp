#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <vector>

#include "pnrf/tensor.hpp"
#include "pnrf/util.hpp"

namespace pnrf {

template <class S>
struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moment buffers mirror the parameter list they were created from.
template <class S>
struct AdamState {
  std::vector<std::vector<S>> m;
  std::vector<std::vector<S>> v;
  int64_t t = 0;             // completed update count (bias correction uses t >= 1)
  int64_t skipped = 0;       // steps dropped because of non-finite gradients

  static AdamState init(const std::vector<ParamTensor<S>*>& params) {
    AdamState s;
    for (const ParamTensor<S>* p : params) {
      s.m.emplace_back(p->values.size(), S(0));
      s.v.emplace_back(p->values.size(), S(0));
    }
    return s;
  }
};

inline double lr_at_step(double lr0, double gamma, int64_t t) {
  return lr0 * std::pow(gamma, static_cast<double>(t));
}

// Standard Adam with bias correction. If any gradient entry is non-finite the
// whole update is skipped for this step (counted and warned, parameters and
// moments untouched). Returns whether the update was applied.
template <class S>
bool adam_step(const std::vector<ParamTensor<S>*>& params, AdamState<S>& state, double lr,
               const AdamConfig<S>& cfg = {}) {
  check_arg(params.size() == state.m.size(),
            cat("adam_step: ", params.size(), " params vs ", state.m.size(), " moment buffers"));
  for (size_t i = 0; i < params.size(); ++i) {
    check_arg(state.m[i].size() == params[i]->values.size(),
              cat("adam_step: moment buffer ", i, " size mismatch"));
    if (!params[i]->grad.empty() && !all_finite(params[i]->grad)) {
      ++state.skipped;
      std::cerr << "[pnrf] warning: non-finite gradient, skipping adam update (skipped="
                << state.skipped << ")\n";
      return false;
    }
  }
  const int64_t t = ++state.t;
  const S b1 = static_cast<S>(cfg.beta1);
  const S b2 = static_cast<S>(cfg.beta2);
  const S bc1 = S(1) - static_cast<S>(std::pow(cfg.beta1, static_cast<double>(t)));
  const S bc2 = S(1) - static_cast<S>(std::pow(cfg.beta2, static_cast<double>(t)));
  const S eps = static_cast<S>(cfg.eps);
  const S step = static_cast<S>(lr);
  for (size_t i = 0; i < params.size(); ++i) {
    ParamTensor<S>& p = *params[i];
    if (!p.requires_grad) continue;
    p.ensure_grad();
    std::vector<S>& m = state.m[i];
    std::vector<S>& v = state.v[i];
    for (size_t j = 0; j < p.values.size(); ++j) {
      const S g = p.grad[j];
      m[j] = b1 * m[j] + (S(1) - b1) * g;
      v[j] = b2 * v[j] + (S(1) - b2) * g * g;
      const S mhat = m[j] / bc1;
      const S vhat = v[j] / bc2;
      p.values[j] -= step * mhat / (std::sqrt(vhat) + eps);
    }
  }
  return true;
}

}  // namespace pnrf
