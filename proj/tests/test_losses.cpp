#include <doctest.h>

#include <cmath>

#include "scalweight/error.hpp"
#include "scalweight/losses.hpp"

using namespace scalweight;

namespace {

Matrix from_rows(std::size_t r, std::size_t c, std::vector<double> v) {
  Matrix m(r, c);
  m.data = std::move(v);
  return m;
}

}  // namespace

TEST_CASE("softmax cross-entropy matches hand-computed values") {
  const Matrix logits = from_rows(1, 3, {1, 2, 3});
  const Matrix labels = from_rows(1, 1, {2});
  const auto lg = loss_and_grad(LossKind::SoftmaxCrossEntropy, logits, labels);

  const double denom = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(lg.loss == doctest::Approx(-std::log(std::exp(3.0) / denom)).epsilon(1e-12));
  CHECK(lg.grad.at(0, 0) == doctest::Approx(std::exp(1.0) / denom).epsilon(1e-12));
  CHECK(lg.grad.at(0, 1) == doctest::Approx(std::exp(2.0) / denom).epsilon(1e-12));
  CHECK(lg.grad.at(0, 2) ==
        doctest::Approx(std::exp(3.0) / denom - 1.0).epsilon(1e-12));
}

TEST_CASE("softmax cross-entropy averages over the batch") {
  const Matrix logits = from_rows(2, 2, {0, 0, 0, 0});
  const Matrix labels = from_rows(2, 1, {0, 1});
  const auto lg = loss_and_grad(LossKind::SoftmaxCrossEntropy, logits, labels);
  CHECK(lg.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // each row: (softmax - onehot) / 2
  CHECK(lg.grad.at(0, 0) == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(lg.grad.at(0, 1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(lg.grad.at(1, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(lg.grad.at(1, 1) == doctest::Approx(-0.25).epsilon(1e-12));
}

TEST_CASE("softmax cross-entropy is shift-invariant for large logits") {
  const Matrix logits = from_rows(1, 2, {1000.0, 1001.0});
  const Matrix labels = from_rows(1, 1, {1});
  const double loss = loss_value(LossKind::SoftmaxCrossEntropy, logits, labels);
  CHECK(loss == doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-12));
  CHECK(std::isfinite(loss));
}

TEST_CASE("cross-entropy rejects out-of-range class ids") {
  const Matrix logits = from_rows(1, 2, {0, 0});
  CHECK_THROWS_AS(loss_value(LossKind::SoftmaxCrossEntropy, logits,
                             from_rows(1, 1, {2})),
                  ConfigError);
  CHECK_THROWS_AS(loss_value(LossKind::SoftmaxCrossEntropy, logits,
                             from_rows(1, 1, {0.5})),
                  ConfigError);
}

TEST_CASE("absolute-error loss sums columns and averages rows") {
  const Matrix outputs = from_rows(1, 2, {1.0, -2.0});
  const Matrix labels = from_rows(1, 2, {0.5, -1.0});
  const auto lg = loss_and_grad(LossKind::L1, outputs, labels);
  CHECK(lg.loss == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(lg.grad.at(0, 0) == 1.0);
  CHECK(lg.grad.at(0, 1) == -1.0);

  // two rows: the same residuals halve the gradient entries
  const Matrix outputs2 = from_rows(2, 1, {1.0, 0.0});
  const Matrix labels2 = from_rows(2, 1, {0.0, 0.0});
  const auto lg2 = loss_and_grad(LossKind::L1, outputs2, labels2);
  CHECK(lg2.loss == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(lg2.grad.at(0, 0) == 0.5);
  CHECK(lg2.grad.at(1, 0) == 0.0);  // exact tie has zero subgradient
}

TEST_CASE("binary cross-entropy matches the logistic closed form") {
  const Matrix logits = from_rows(1, 1, {0.0});
  const Matrix ones = from_rows(1, 1, {1.0});
  const auto lg = loss_and_grad(LossKind::BinaryCrossEntropy, logits, ones);
  CHECK(lg.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(lg.grad.at(0, 0) == doctest::Approx(-0.5).epsilon(1e-12));

  const Matrix big = from_rows(1, 1, {50.0});
  const Matrix zeros = from_rows(1, 1, {0.0});
  const auto lg2 = loss_and_grad(LossKind::BinaryCrossEntropy, big, zeros);
  CHECK(lg2.loss == doctest::Approx(50.0).epsilon(1e-10));
  CHECK(std::isfinite(lg2.grad.at(0, 0)));

  CHECK_THROWS_AS(
      loss_value(LossKind::BinaryCrossEntropy, logits, from_rows(1, 1, {0.5})),
      ConfigError);
}

TEST_CASE("shape mismatches are rejected") {
  const Matrix out = from_rows(2, 2, {0, 0, 0, 0});
  CHECK_THROWS_AS(loss_value(LossKind::L1, out, from_rows(2, 1, {0, 0})),
                  ConfigError);
  CHECK_THROWS_AS(loss_value(LossKind::L1, out, from_rows(1, 2, {0, 0})),
                  ConfigError);
  CHECK_THROWS_AS(loss_value(LossKind::SoftmaxCrossEntropy, out,
                             from_rows(2, 2, {0, 0, 0, 0})),
                  ConfigError);
}

TEST_CASE("top-1 accuracy counts argmax hits") {
  const Matrix logits = from_rows(3, 2, {2, 1, 0, 3, 1, 1});
  const Matrix labels = from_rows(3, 1, {0, 1, 1});
  // row 2 ties; argmax keeps the first index, so the last row misses
  CHECK(evaluate_metric(MetricKind::Top1Accuracy, logits, labels) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("binary accuracy thresholds logits at zero per attribute") {
  const Matrix logits = from_rows(2, 2, {1.0, -1.0, -2.0, 3.0});
  const Matrix labels = from_rows(2, 2, {1, 0, 1, 1});
  CHECK(evaluate_metric(MetricKind::BinaryAccuracy, logits, labels) ==
        doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("metric orientation flips only error-style metrics") {
  CHECK(higher_is_better(MetricKind::Top1Accuracy));
  CHECK(higher_is_better(MetricKind::BinaryAccuracy));
  CHECK_FALSE(higher_is_better(MetricKind::L1Error));
  CHECK(oriented(MetricKind::Top1Accuracy, 0.8) == 0.8);
  CHECK(oriented(MetricKind::L1Error, 0.4) == -0.4);
}

TEST_CASE("loss names round-trip through their string forms") {
  for (LossKind kind : {LossKind::SoftmaxCrossEntropy, LossKind::L1,
                        LossKind::BinaryCrossEntropy}) {
    CHECK(loss_kind_from_string(to_string(kind)) == kind);
    CHECK(default_metric(kind) == default_metric(kind));
  }
  CHECK_THROWS_AS(loss_kind_from_string("huber"), ConfigError);
}
