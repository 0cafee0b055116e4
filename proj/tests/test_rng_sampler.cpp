#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "scalweight/error.hpp"
#include "scalweight/rng.hpp"
#include "scalweight/sampler.hpp"

using namespace scalweight;

namespace {

MultiSourceDataset two_domain_toy(std::size_t n0, std::size_t n1) {
  MultiSourceDataset ds;
  ds.mode = DatasetMode::MultiDomain;
  ds.source_names = {"a", "b"};
  TaskSpec task;
  task.name = "cls";
  task.kind = LabelKind::ClassId;
  task.dim = 2;
  ds.tasks = {task, task};
  ds.tasks[1].name = "cls";
  for (std::size_t s = 0; s < 2; ++s) {
    const std::size_t n = s == 0 ? n0 : n1;
    Matrix x(n, 3);
    Matrix y(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      x.at(i, 0) = static_cast<double>(s);        // marks the source
      x.at(i, 1) = static_cast<double>(i);        // marks the row
      y.at(i, 0) = static_cast<double>(i % 2);
    }
    ds.features.push_back(std::move(x));
    ds.labels.push_back(std::move(y));
  }
  ds.validate();
  return ds;
}

}  // namespace

TEST_CASE("generator reproduces the same sequence for one seed") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    all_equal = all_equal && x == b.next_u64();
    any_diff = any_diff || x != c.next_u64();
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("streams with distinct ids are independent") {
  Rng a = Rng::stream(7, 0);
  Rng b = Rng::stream(7, 1);
  CHECK(a.next_u64() != b.next_u64());

  Rng c = Rng::stream(7, 1);
  Rng d = Rng::stream(7, 1);
  c.next_u64();  // consuming one stream must not affect a fresh copy
  CHECK(d.next_u64() == Rng::stream(7, 1).next_u64());
}

TEST_CASE("serialized state resumes the exact sequence") {
  Rng rng(123);
  for (int i = 0; i < 17; ++i) rng.next_u64();
  const std::string blob = rng.serialize();
  Rng copy = Rng::deserialize(blob);
  CHECK(copy == rng);
  for (int i = 0; i < 50; ++i) CHECK(copy.next_u64() == rng.next_u64());
  CHECK_THROWS_AS(Rng::deserialize("not a state"), IoError);
}

TEST_CASE("uniform stays inside the half-open interval") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(-2.0, 3.0);
    CHECK(u >= -2.0);
    CHECK(u < 3.0);
  }
}

TEST_CASE("normal draws have standard moments") {
  Rng rng(2);
  const std::size_t n = 20000;
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST_CASE("uniform_index covers its range and nothing else") {
  Rng rng(3);
  std::set<std::size_t> seen;
  for (int i = 0; i < 500; ++i) {
    const std::size_t k = rng.uniform_index(5);
    CHECK(k < 5);
    seen.insert(k);
  }
  CHECK(seen.size() == 5);
}

TEST_CASE("categorical draws follow the given distribution") {
  Rng rng(4);
  const std::vector<double> probs = {0.2, 0.5, 0.3};
  const std::size_t n = 30000;
  std::vector<std::size_t> counts(3, 0);
  for (std::size_t i = 0; i < n; ++i) ++counts[rng.categorical(probs)];
  for (std::size_t k = 0; k < 3; ++k) {
    const double freq = static_cast<double>(counts[k]) / n;
    const double se = std::sqrt(probs[k] * (1 - probs[k]) / n);
    CHECK(std::abs(freq - probs[k]) < 3.5 * se);
  }
}

TEST_CASE("dirichlet draws live on the simplex") {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto w = rng.dirichlet_uniform(4);
    REQUIRE(w.size() == 4);
    double sum = 0.0;
    for (double v : w) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("permutation is a bijection and seed-stable") {
  Rng a(6), b(6);
  const auto p = a.permutation(10);
  CHECK(p == b.permutation(10));
  std::vector<std::size_t> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> want(10);
  std::iota(want.begin(), want.end(), 0);
  CHECK(sorted == want);
}

TEST_CASE("epoch length is pinned to the reference source") {
  const auto ds = two_domain_toy(100, 10);
  EpochConvention epoch;
  epoch.batch_size = 32;
  epoch.reference_source = 0;
  CHECK(steps_per_epoch(ds, epoch) == 4);  // ceil(100/32)
  epoch.reference_source = 1;
  CHECK(steps_per_epoch(ds, epoch) == 1);  // ceil(10/32)
}

TEST_CASE("mixture sampling hits sources at the requested rates") {
  const auto ds = two_domain_toy(50, 50);
  ResamplingSampler sampler(ds, WeightVector({0.3, 0.7}), Rng(9));
  std::size_t n = 0, from1 = 0;
  for (int b = 0; b < 200; ++b) {
    const auto batch = sampler.next_batch(64);
    REQUIRE(batch.size() == 64);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      REQUIRE(batch.sources[i] < 2);
      CHECK(batch.indices[i] < 50);
      from1 += batch.sources[i];
      ++n;
    }
  }
  const double freq = static_cast<double>(from1) / static_cast<double>(n);
  const double se = std::sqrt(0.3 * 0.7 / static_cast<double>(n));
  CHECK(std::abs(freq - 0.7) < 3.5 * se);
}

TEST_CASE("vertex weights sample exclusively from one source") {
  const auto ds = two_domain_toy(20, 20);
  ResamplingSampler sampler(ds, WeightVector::vertex(2, 1), Rng(10));
  const auto batch = sampler.next_batch(100);
  for (std::size_t s : batch.sources) CHECK(s == 1);
}

TEST_CASE("changing weights changes the mixture mid-stream") {
  const auto ds = two_domain_toy(20, 20);
  ResamplingSampler sampler(ds, WeightVector::vertex(2, 0), Rng(11));
  sampler.next_batch(10);
  sampler.set_weights(WeightVector::vertex(2, 1));
  const auto batch = sampler.next_batch(10);
  for (std::size_t s : batch.sources) CHECK(s == 1);
}

TEST_CASE("gathering a source keeps draw order") {
  const auto ds = two_domain_toy(8, 8);
  MixedBatch batch;
  batch.sources = {1, 0, 1, 1, 0};
  batch.indices = {3, 2, 0, 5, 7};
  const auto slice = gather_source(ds, batch, 1);
  REQUIRE(slice.count == 3);
  CHECK(slice.features.at(0, 1) == 3.0);
  CHECK(slice.features.at(1, 1) == 0.0);
  CHECK(slice.features.at(2, 1) == 5.0);
  CHECK(slice.labels.at(0, 0) == 1.0);  // row 3 of source 1: 3 % 2

  const auto all = gather_all(ds, batch);
  REQUIRE(all.count == 5);
  CHECK(all.features.at(0, 0) == 1.0);  // came from source 1
  CHECK(all.features.at(1, 0) == 0.0);
  CHECK(all.features.at(1, 1) == 2.0);
}

TEST_CASE("single-source batches stay inside that source") {
  const auto ds = two_domain_toy(30, 5);
  Rng rng(12);
  const auto batch = uniform_source_batch(ds, 1, 16, rng);
  REQUIRE(batch.size() == 16);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(batch.sources[i] == 1);
    CHECK(batch.indices[i] < 5);
  }
}
