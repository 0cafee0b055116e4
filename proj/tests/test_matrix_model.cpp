#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "scalweight/matrix.hpp"
#include "scalweight/model.hpp"
#include "scalweight/rng.hpp"

using namespace scalweight;

namespace {

Matrix from_rows(std::size_t r, std::size_t c, std::vector<double> v) {
  Matrix m(r, c);
  m.data = std::move(v);
  return m;
}

}  // namespace

TEST_CASE("matmul_bt multiplies by the transposed right factor") {
  const Matrix a = from_rows(2, 3, {1, 2, 3, 4, 5, 6});
  const Matrix b = from_rows(2, 3, {1, 0, 1, 0, 1, 1});
  const Matrix out = matmul_bt(a, b);
  REQUIRE(out.rows == 2);
  REQUIRE(out.cols == 2);
  CHECK(out.at(0, 0) == 4.0);
  CHECK(out.at(0, 1) == 5.0);
  CHECK(out.at(1, 0) == 10.0);
  CHECK(out.at(1, 1) == 11.0);
}

TEST_CASE("matmul_at multiplies by the transposed left factor") {
  const Matrix a = from_rows(2, 2, {1, 2, 3, 4});
  const Matrix b = from_rows(2, 3, {1, 0, 1, 0, 1, 1});
  const Matrix out = matmul_at(a, b);
  REQUIRE(out.rows == 2);
  REQUIRE(out.cols == 3);
  const std::vector<double> want = {1, 3, 4, 2, 4, 6};
  CHECK(out.data == want);
}

TEST_CASE("matmul matches a hand-multiplied product") {
  const Matrix a = from_rows(2, 2, {1, 2, 3, 4});
  const Matrix b = from_rows(2, 2, {5, 6, 7, 8});
  const Matrix out = matmul(a, b);
  const std::vector<double> want = {19, 22, 43, 50};
  CHECK(out.data == want);
}

TEST_CASE("add_row_inplace broadcasts a vector over every row") {
  Matrix m = from_rows(2, 2, {1, 2, 3, 4});
  const std::vector<double> v = {10, 20};
  add_row_inplace(m, v);
  const std::vector<double> want = {11, 22, 13, 24};
  CHECK(m.data == want);
}

TEST_CASE("vector helpers match hand arithmetic") {
  const std::vector<double> a = {1, 2, 3};
  const std::vector<double> b = {4, -5, 6};
  CHECK(dot(a, b) == 12.0);
  CHECK(norm2(b) == doctest::Approx(std::sqrt(77.0)).epsilon(1e-15));
  std::vector<double> y = {1, 1, 1};
  axpy(2.0, a, y);
  const std::vector<double> want = {3, 5, 7};
  CHECK(y == want);
  scale_inplace(y, 0.5);
  const std::vector<double> want2 = {1.5, 2.5, 3.5};
  CHECK(y == want2);
}

TEST_CASE("parameter count follows the dense-layer closed form") {
  ModelSpec spec;
  spec.input_dim = 5;
  spec.trunk_depth = 2;
  spec.base_width = 8;
  spec.head_depth = 2;
  spec.output_dims = {3, 1};

  SUBCASE("full width") {
    // trunk 5->8 (48) + 8->8 (72); heads (8->8 + 8->k): 99 and 81
    CHECK(param_count_for(spec) == 300);
    CHECK(ModelParams::init(spec, 1).param_count() == 300);
  }
  SUBCASE("half width") {
    spec.width_multiplier = 0.5;
    // hidden 4: trunk 24 + 20; heads 20+15 and 20+5
    CHECK(param_count_for(spec) == 104);
    CHECK(ModelParams::init(spec, 1).param_count() == 104);
  }
  SUBCASE("one shared head layer") {
    spec.shared_head_layers = 1;
    // trunk 120, shared 72, private 8->3 and 8->1
    CHECK(param_count_for(spec) == 228);
    CHECK(ModelParams::init(spec, 1).param_count() == 228);
  }
}

TEST_CASE("task paths stack trunk, shared, and private layers") {
  ModelSpec spec;
  spec.input_dim = 4;
  spec.trunk_depth = 2;
  spec.base_width = 6;
  spec.head_depth = 2;
  spec.shared_head_layers = 1;
  spec.output_dims = {3, 2};
  const ModelParams params = ModelParams::init(spec, 7);

  for (std::size_t t = 0; t < 2; ++t) {
    const auto path = params.task_path(t);
    REQUIRE(path.size() == 4);  // 2 trunk + 1 shared + 1 private
    CHECK(path[0].in == 4);
    CHECK(path[0].out == 6);
    CHECK(path[3].out == spec.output_dims[t]);
    // every layer feeds the next
    for (std::size_t i = 1; i < path.size(); ++i)
      CHECK(path[i].in == path[i - 1].out);
    // relu everywhere except the head output
    for (std::size_t i = 0; i + 1 < path.size(); ++i) CHECK(path[i].relu);
    CHECK_FALSE(path[3].relu);
  }
  // the shared head layer is literally the same parameter block
  CHECK(params.task_path(0)[2].w_off == params.task_path(1)[2].w_off);
  // private heads are distinct blocks
  CHECK(params.task_path(0)[3].w_off != params.task_path(1)[3].w_off);
}

TEST_CASE("initialization is seed-deterministic with zero biases") {
  ModelSpec spec;
  spec.input_dim = 3;
  spec.trunk_depth = 1;
  spec.base_width = 4;
  spec.output_dims = {2};
  const ModelParams a = ModelParams::init(spec, 42);
  const ModelParams b = ModelParams::init(spec, 42);
  const ModelParams c = ModelParams::init(spec, 43);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  for (const auto& layer : a.task_path(0))
    for (std::size_t i = 0; i < layer.out; ++i)
      CHECK(a.values()[layer.b_off + i] == 0.0);
}

TEST_CASE("forward agrees with a plain scalar-loop reimplementation") {
  ModelSpec spec;
  spec.input_dim = 5;
  spec.trunk_depth = 2;
  spec.base_width = 7;
  spec.head_depth = 2;
  spec.shared_head_layers = 1;
  spec.output_dims = {3, 1, 4};
  const ModelParams params = ModelParams::init(spec, 99);

  Rng rng(5);
  Matrix inputs(6, 5);
  for (double& v : inputs.data) v = rng.normal();

  for (std::size_t t = 0; t < 3; ++t) {
    const Matrix got = forward(params, inputs, t);
    const Matrix want = scalweight::testing::reference_forward(params, inputs, t);
    REQUIRE(got.rows == want.rows);
    REQUIRE(got.cols == want.cols);
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("backward scales linearly and accumulates") {
  ModelSpec spec;
  spec.input_dim = 3;
  spec.trunk_depth = 1;
  spec.base_width = 4;
  spec.output_dims = {2};
  const ModelParams params = ModelParams::init(spec, 11);

  Rng rng(8);
  Matrix inputs(4, 3);
  for (double& v : inputs.data) v = rng.normal();
  Matrix out_grad(4, 2);
  for (double& v : out_grad.data) v = rng.normal();

  Tape tape;
  forward(params, inputs, 0, &tape);

  std::vector<double> g1(params.param_count(), 0.0);
  backward(params, tape, out_grad, 1.0, g1);
  std::vector<double> g2(params.param_count(), 0.0);
  backward(params, tape, out_grad, 2.0, g2);
  std::vector<double> gsum(params.param_count(), 0.0);
  backward(params, tape, out_grad, 1.0, gsum);
  backward(params, tape, out_grad, 1.0, gsum);

  for (std::size_t i = 0; i < g1.size(); ++i) {
    CHECK(g2[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-15));
    CHECK(gsum[i] == doctest::Approx(g2[i]).epsilon(1e-15));
  }

  std::vector<double> gz(params.param_count(), 0.0);
  backward(params, tape, out_grad, 0.0, gz);
  for (double v : gz) CHECK(v == 0.0);
}

TEST_CASE("analytic gradients pass a finite-difference audit") {
  ModelSpec spec;
  spec.input_dim = 4;
  spec.trunk_depth = 1;
  spec.base_width = 5;
  spec.output_dims = {3, 2};
  ModelParams params = ModelParams::init(spec, 3);

  Rng rng(17);
  Matrix inputs(8, 4);
  for (double& v : inputs.data) v = rng.normal();

  Matrix cls_labels(8, 1);
  for (std::size_t i = 0; i < 8; ++i)
    cls_labels.at(i, 0) = static_cast<double>(rng.uniform_index(3));
  Matrix real_labels(8, 2);
  for (double& v : real_labels.data) v = rng.normal();

  const auto ce = scalweight::testing::check_gradient(
      params, inputs, cls_labels, LossKind::SoftmaxCrossEntropy, 0, 1e-5, 1e-4);
  CHECK(ce.failed == 0);
  CHECK(ce.checked > 0);

  const auto l1 = scalweight::testing::check_gradient(
      params, inputs, real_labels, LossKind::L1, 1, 1e-5, 1e-4);
  CHECK(l1.failed == 0);
  CHECK(l1.checked > 0);
}
