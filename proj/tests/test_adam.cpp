#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <limits>

#include "pnrf/adam.hpp"

using pnrf::AdamConfig;
using pnrf::AdamState;
using pnrf::ParamTensor;
using pnrf::adam_step;
using pnrf::lr_at_step;

TEST_CASE("zero gradient leaves parameters unchanged and decays moments", "[adam]") {
  ParamTensor<double> p({2}, {1.0, -3.0});
  auto state = AdamState<double>::init({&p});
  p.ensure_grad();

  adam_step<double>({&p}, state, 1e-2);
  CHECK(p.values == std::vector<double>{1.0, -3.0});

  // Seed a nonzero moment, then feed zero grads: moments shrink toward 0.
  p.grad = {1.0, 1.0};
  adam_step<double>({&p}, state, 1e-2);
  p.grad = {0.0, 0.0};
  double prev = std::abs(state.m[0][0]);
  for (int i = 0; i < 5; ++i) {
    adam_step<double>({&p}, state, 1e-2);
    CHECK(std::abs(state.m[0][0]) < prev);
    prev = std::abs(state.m[0][0]);
  }
}

TEST_CASE("constant unit gradient reproduces hand-computed iterates", "[adam]") {
  // With g = 1 every step, bias-corrected mhat = vhat = 1 exactly, so each
  // update moves the parameter by lr / (1 + eps).
  ParamTensor<double> p({1}, {0.0});
  auto state = AdamState<double>::init({&p});
  const double lr = 0.1, eps = 1e-8;
  AdamConfig<double> cfg;
  cfg.eps = eps;
  for (int t = 1; t <= 3; ++t) {
    p.ensure_grad();
    p.grad = {1.0};
    adam_step<double>({&p}, state, lr, cfg);
    CHECK(p.values[0] == Catch::Approx(-t * lr / (1.0 + eps)).epsilon(1e-12));
  }
  CHECK(p.values[0] == Catch::Approx(-0.29999999700000003).epsilon(1e-12));

  // A varying gradient sequence against an independent reference loop.
  ParamTensor<double> q({1}, {0.5});
  auto qs = AdamState<double>::init({&q});
  double rm = 0, rv = 0, rp = 0.5;
  const std::vector<double> grads{0.3, -1.2, 0.05, 2.0, -0.4};
  for (size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    rm = 0.9 * rm + 0.1 * g;
    rv = 0.999 * rv + 0.001 * g * g;
    const double mhat = rm / (1.0 - std::pow(0.9, static_cast<double>(t)));
    const double vhat = rv / (1.0 - std::pow(0.999, static_cast<double>(t)));
    rp -= lr * mhat / (std::sqrt(vhat) + eps);

    q.ensure_grad();
    q.grad = {g};
    adam_step<double>({&q}, qs, lr, cfg);
    CHECK(q.values[0] == Catch::Approx(rp).epsilon(1e-13));
  }
}

TEST_CASE("non-finite gradients skip the whole update", "[adam]") {
  ParamTensor<double> p({2}, {1.0, 2.0});
  auto state = AdamState<double>::init({&p});
  p.ensure_grad();
  p.grad = {1.0, std::numeric_limits<double>::quiet_NaN()};
  CHECK_FALSE(adam_step<double>({&p}, state, 1e-2));
  CHECK(p.values == std::vector<double>{1.0, 2.0});
  CHECK(state.m[0] == std::vector<double>{0.0, 0.0});
  CHECK(state.skipped == 1);
  CHECK(state.t == 0);
}

TEST_CASE("effective learning rate follows lr0 * gamma^t", "[adam]") {
  const double lr = lr_at_step(5e-4, 0.998, 1000);
  CHECK(lr == 5e-4 * std::pow(0.998, 1000.0));
  CHECK(lr == Catch::Approx(6.76e-5).epsilon(2e-3));
  CHECK(lr_at_step(5e-4, 0.998, 0) == 5e-4);
}
