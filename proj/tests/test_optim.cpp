#include <cmath>

#include "doctest.h"
#include "relic/errors.hpp"
#include "relic/optim.hpp"
#include "relic/rng.hpp"
#include "relic/tensor.hpp"

using namespace relic;

namespace {

ParamRef make_param(std::vector<double> v, bool is_bias = false) {
  const std::size_t n = v.size();
  return {Tensor::from({n}, std::move(v), true), is_bias};
}

void set_grad(ParamRef& p, const std::vector<double>& g) {
  auto span = p.tensor.grad();
  REQUIRE(span.size() == g.size());
  for (std::size_t i = 0; i < g.size(); ++i) span[i] = g[i];
}

}  // namespace

TEST_SUITE("optim") {
  TEST_CASE("cosine schedule hits its pinned anchor points") {
    ScheduleConfig cfg;
    cfg.base_lr = 0.4;
    cfg.total_steps = 1000;
    cfg.warmup_steps = 100;

    CHECK(cosine_lr(0, cfg) == 0.0);
    CHECK(cosine_lr(100, cfg) == doctest::Approx(0.4).epsilon(1e-15));
    // midpoint of the decay phase: cos(pi/2) -> base/2
    CHECK(cosine_lr(550, cfg) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(cosine_lr(1000, cfg) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(cosine_lr(5000, cfg) == 0.0);  // clamped past the end
  }

  TEST_CASE("cosine schedule is continuous at warmup and non-increasing after") {
    ScheduleConfig cfg;
    cfg.base_lr = 1.0;
    cfg.total_steps = 400;
    cfg.warmup_steps = 40;
    const double jump = std::fabs(cosine_lr(40, cfg) - cosine_lr(39, cfg));
    CHECK(jump <= 2.0 * cfg.base_lr / static_cast<double>(cfg.warmup_steps));
    double prev = cosine_lr(40, cfg);
    for (uint64_t s = 41; s <= 400; ++s) {
      const double lr = cosine_lr(s, cfg);
      CHECK(lr <= prev + 1e-15);
      prev = lr;
    }

    ScheduleConfig bad = cfg;
    bad.warmup_steps = 500;
    CHECK_THROWS_AS(cosine_lr(0, bad), ConfigError);
  }

  TEST_CASE("trust-ratio arithmetic on a unit scalar") {
    std::vector<ParamRef> params = {make_param({1.0})};
    set_grad(params[0], {1.0});
    LarsConfig cfg;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    cfg.trust_coefficient = 1e-3;
    OptState st;
    lars_step(params, 1.0, cfg, st);
    const double delta = 1.0 - params[0].tensor.value()[0];
    CHECK(delta == doctest::Approx(0.001).epsilon(1e-8));
  }

  TEST_CASE("zero learning rate leaves parameters untouched") {
    std::vector<ParamRef> params = {make_param({0.5, -0.25})};
    set_grad(params[0], {3.0, 4.0});
    OptState st;
    lars_step(params, 0.0, LarsConfig{}, st);
    CHECK(params[0].tensor.value()[0] == 0.5);
    CHECK(params[0].tensor.value()[1] == -0.25);
  }

  TEST_CASE("zero-norm parameter falls back to a plain momentum step") {
    std::vector<ParamRef> params = {make_param({0.0, 0.0})};
    set_grad(params[0], {1.0, -2.0});
    LarsConfig cfg;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    OptState st;
    lars_step(params, 0.1, cfg, st);
    CHECK(params[0].tensor.value()[0] == doctest::Approx(-0.1).epsilon(1e-15));
    CHECK(params[0].tensor.value()[1] == doctest::Approx(0.2).epsilon(1e-15));
  }

  TEST_CASE("biases skip weight decay and trust scaling") {
    LarsConfig cfg;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.5;
    cfg.trust_coefficient = 1e-3;

    std::vector<ParamRef> bias = {make_param({2.0}, true)};
    set_grad(bias[0], {1.0});
    OptState st1;
    lars_step(bias, 0.1, cfg, st1);
    CHECK(bias[0].tensor.value()[0] == doctest::Approx(1.9).epsilon(1e-15));

    std::vector<ParamRef> weight = {make_param({2.0}, false)};
    set_grad(weight[0], {1.0});
    OptState st2;
    lars_step(weight, 0.1, cfg, st2);
    // g' = 1 + 0.5*2 = 2, r = 1e-3 * 2 / (2 + 1e-9), step = 0.1 * r * 2
    CHECK(2.0 - weight[0].tensor.value()[0] == doctest::Approx(2e-4).epsilon(1e-8));
  }

  TEST_CASE("huge trust coefficient never yields non-finite parameters") {
    std::vector<ParamRef> params = {make_param({1.0, 1.0})};
    set_grad(params[0], {1e-10, 1e-10});
    LarsConfig cfg;
    cfg.trust_coefficient = 1e308;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    OptState st;
    lars_step(params, 1.0, cfg, st);
    for (double v : params[0].tensor.value()) CHECK(std::isfinite(v));
  }

  TEST_CASE("non-finite gradients abort before any mutation") {
    std::vector<ParamRef> params = {make_param({1.0}), make_param({2.0})};
    set_grad(params[0], {1.0});
    set_grad(params[1], {std::nan("")});
    OptState st;
    CHECK_THROWS_AS(lars_step(params, 0.1, LarsConfig{}, st), NumericError);
    CHECK(params[0].tensor.value()[0] == 1.0);
    CHECK(params[1].tensor.value()[0] == 2.0);

    OptState st2;
    CHECK_THROWS_AS(sgd_nesterov_step(params, 0.1, 0.9, st2), NumericError);
    CHECK(params[0].tensor.value()[0] == 1.0);
  }

  TEST_CASE("config validation") {
    std::vector<ParamRef> params = {make_param({1.0})};
    set_grad(params[0], {1.0});
    OptState st;
    LarsConfig bad;
    bad.momentum = 1.0;
    CHECK_THROWS_AS(lars_step(params, 0.1, bad, st), ConfigError);
    LarsConfig bad2;
    bad2.trust_coefficient = 0.0;
    CHECK_THROWS_AS(lars_step(params, 0.1, bad2, st), ConfigError);
    CHECK_THROWS_AS(lars_step(params, -0.1, LarsConfig{}, st), ConfigError);
    CHECK_THROWS_AS(sgd_nesterov_step(params, 0.1, 1.0, st), ConfigError);
  }

  TEST_CASE("200 steps on a convex quadratic cut the objective at least 100x") {
    auto g = make_stream(stream_id(17, "quad"));
    const std::size_t dim = 8;
    std::vector<double> x0(dim), lambda(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      x0[i] = runif(g, -2.0, 2.0);
      lambda[i] = runif(g, 0.5, 2.0);
    }
    std::vector<ParamRef> params = {make_param(x0)};
    auto objective = [&]() {
      double f = 0.0;
      auto v = params[0].tensor.value();
      for (std::size_t i = 0; i < dim; ++i) f += 0.5 * lambda[i] * v[i] * v[i];
      return f;
    };
    const double f0 = objective();
    OptState st;
    LarsConfig cfg;  // defaults
    for (int step = 0; step < 200; ++step) {
      params[0].tensor.zero_grad();
      auto grad = params[0].tensor.grad();
      auto v = params[0].tensor.value();
      for (std::size_t i = 0; i < dim; ++i) grad[i] = lambda[i] * v[i];
      lars_step(params, 20.0, cfg, st);
    }
    CHECK(objective() <= f0 / 100.0);
    for (double v : params[0].tensor.value()) CHECK(std::isfinite(v));
  }

  TEST_CASE("nesterov momentum: plain step at momentum 0, frozen two-step value") {
    std::vector<ParamRef> plain = {make_param({1.0})};
    set_grad(plain[0], {0.5});
    OptState st0;
    sgd_nesterov_step(plain, 0.2, 0.0, st0);
    CHECK(plain[0].tensor.value()[0] == doctest::Approx(0.9).epsilon(1e-15));

    // two steps on f(x) = x^2/2 from x = 1 with lr 0.1, momentum 0.9:
    //   step 1: m = 1,    x = 1 - 0.1*(1 + 0.9*1)       = 0.81
    //   step 2: m = 1.71, x = 0.81 - 0.1*(0.81 + 1.539) = 0.5751
    std::vector<ParamRef> params = {make_param({1.0})};
    OptState st;
    for (int step = 0; step < 2; ++step) {
      params[0].tensor.zero_grad();
      params[0].tensor.grad()[0] = params[0].tensor.value()[0];
      sgd_nesterov_step(params, 0.1, 0.9, st);
    }
    CHECK(params[0].tensor.value()[0] == doctest::Approx(0.5751).epsilon(1e-12));

    std::vector<ParamRef> frozen = {make_param({3.0})};
    set_grad(frozen[0], {7.0});
    OptState st1;
    sgd_nesterov_step(frozen, 0.0, 0.9, st1);  // lr 0 is a parameter no-op
    CHECK(frozen[0].tensor.value()[0] == 3.0);
  }
}
