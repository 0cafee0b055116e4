#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "scalweight/error.hpp"
#include "scalweight/optimizer.hpp"

using namespace scalweight;

TEST_CASE("momentum sgd follows the hand-traced recursion") {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::SgdMomentum;
  cfg.learning_rate = 0.1;
  cfg.momentum = 0.9;
  Optimizer opt(cfg, 1);

  std::vector<double> p = {1.0};
  const std::vector<double> g = {1.0};
  opt.step(p, g, 1);
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-15));  // v=1
  opt.step(p, g, 1);
  CHECK(p[0] == doctest::Approx(0.71).epsilon(1e-15));  // v=1.9
  opt.step(p, g, 1);
  CHECK(p[0] == doctest::Approx(0.439).epsilon(1e-15));  // v=2.71
}

TEST_CASE("sgd weight decay adds an L2 pull toward zero") {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::SgdMomentum;
  cfg.learning_rate = 0.5;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.1;
  Optimizer opt(cfg, 1);
  std::vector<double> p = {2.0};
  const std::vector<double> g = {0.0};
  opt.step(p, g, 1);
  CHECK(p[0] == doctest::Approx(2.0 - 0.5 * 0.2).epsilon(1e-15));
}

TEST_CASE("adamw first step matches the closed form") {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::AdamW;
  cfg.learning_rate = 0.01;
  cfg.weight_decay = 0.05;
  Optimizer opt(cfg, 2);

  std::vector<double> p = {1.0, -2.0};
  const std::vector<double> g = {0.3, -0.7};
  const std::vector<double> p0 = p;
  opt.step(p, g, 1);
  for (std::size_t i = 0; i < 2; ++i) {
    const double want = scalweight::testing::adamw_first_step(
        p0[i], g[i], cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon,
        cfg.weight_decay);
    CHECK(p[i] == doctest::Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("warmup ramps linearly to the base rate") {
  OptimizerConfig cfg;
  cfg.learning_rate = 0.2;
  cfg.warmup_epochs = 2;
  cfg.total_epochs = 10;
  const std::size_t spe = 5;  // warmup spans 10 steps
  CHECK(lr_at(cfg, 0, spe) == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(lr_at(cfg, 4, spe) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(lr_at(cfg, 9, spe) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(lr_at(cfg, 10, spe) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(lr_at(cfg, 49, spe) == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("cosine decay reaches exactly zero at the horizon") {
  OptimizerConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.schedule = LrSchedule::CosineDecay;
  cfg.total_epochs = 4;
  const std::size_t spe = 10;
  CHECK(lr_at(cfg, 0, spe) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(lr_at(cfg, 20, spe) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(lr_at(cfg, 40, spe) == 0.0);
  CHECK(lr_at(cfg, 1000, spe) == 0.0);
}

TEST_CASE("non-finite gradients reject the step and leave state intact") {
  OptimizerConfig cfg;
  cfg.learning_rate = 0.1;
  Optimizer opt(cfg, 2);
  std::vector<double> p = {1.0, 2.0};
  std::vector<double> g = {0.5, 0.5};
  opt.step(p, g, 1);
  const std::vector<double> after = p;
  const std::size_t step_after = opt.step_index();
  const std::vector<double> slot_after(opt.slot(0).begin(), opt.slot(0).end());

  g[1] = std::nan("");
  CHECK_THROWS_AS(opt.step(p, g, 1), DivergenceError);
  CHECK(p == after);
  CHECK(opt.step_index() == step_after);
  const std::vector<double> slot_now(opt.slot(0).begin(), opt.slot(0).end());
  CHECK(slot_now == slot_after);
}

TEST_CASE("optimizer state slots expose the full buffers") {
  OptimizerConfig sgd;
  Optimizer o1(sgd, 3);
  CHECK(o1.slot_count() == 1);
  CHECK(o1.slot(0).size() == 3);
  CHECK_THROWS_AS(o1.slot(1), ConfigError);

  OptimizerConfig adamw;
  adamw.kind = OptimizerKind::AdamW;
  Optimizer o2(adamw, 3);
  CHECK(o2.slot_count() == 2);
  CHECK(o2.slot(1).size() == 3);
}

TEST_CASE("optimizer config validation rejects bad settings") {
  OptimizerConfig cfg;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.learning_rate = 0.1;
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.momentum = 0.9;
  cfg.total_epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.total_epochs = 2;
  cfg.warmup_epochs = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("optimizer names round-trip") {
  CHECK(optimizer_kind_from_string("sgd_momentum") == OptimizerKind::SgdMomentum);
  CHECK(optimizer_kind_from_string("sgd") == OptimizerKind::SgdMomentum);
  CHECK(optimizer_kind_from_string("adamw") == OptimizerKind::AdamW);
  CHECK(lr_schedule_from_string("cosine") == LrSchedule::CosineDecay);
  CHECK_THROWS_AS(optimizer_kind_from_string("lbfgs"), ConfigError);
  CHECK_THROWS_AS(lr_schedule_from_string("step"), ConfigError);
}
