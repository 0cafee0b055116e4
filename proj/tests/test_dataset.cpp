#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "scalweight/dataset.hpp"
#include "scalweight/error.hpp"
#include "scalweight/io.hpp"
#include "scalweight/matrix.hpp"

using namespace scalweight;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "scalweight_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("multi-domain generation is deterministic and well-formed") {
  MultiDomainGenConfig cfg;
  cfg.seed = 5;
  cfg.domains = 3;
  cfg.n_per_source = {40, 30, 20};
  cfg.class_count = 4;
  cfg.feature_dim = 6;
  cfg.domain_shift = 1.5;

  const auto a = gen_multidomain(cfg);
  const auto b = gen_multidomain(cfg);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);

  REQUIRE(a.task_count() == 3);
  CHECK(a.mode == DatasetMode::MultiDomain);
  CHECK(a.size(0) == 40);
  CHECK(a.size(2) == 20);
  CHECK(a.feature_dim() == 6);
  for (const auto& task : a.tasks) {
    CHECK(task.kind == LabelKind::ClassId);
    CHECK(task.dim == 4);
  }
  a.validate();

  cfg.seed = 6;
  const auto c = gen_multidomain(cfg);
  CHECK_FALSE(a.features == c.features);
}

TEST_CASE("domain shift separates the domains") {
  MultiDomainGenConfig cfg;
  cfg.seed = 7;
  cfg.domains = 2;
  cfg.n_per_source = {300, 300};
  cfg.class_count = 3;
  cfg.feature_dim = 8;
  cfg.class_std = 0.5;

  cfg.domain_shift = 0.0;
  const auto near = gen_multidomain(cfg);
  cfg.domain_shift = 8.0;
  const auto far = gen_multidomain(cfg);

  // with zero shift both domains share class means; with a large shift the
  // per-domain class means diverge
  auto class_mean_gap = [](const MultiSourceDataset& ds) {
    double gap = 0.0;
    const std::size_t d = ds.feature_dim();
    for (std::size_t c = 0; c < 3; ++c) {
      std::vector<double> m0(d, 0.0), m1(d, 0.0);
      std::size_t n0 = 0, n1 = 0;
      for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t i = 0; i < ds.size(s); ++i) {
          if (static_cast<std::size_t>(ds.labels[s].at(i, 0)) != c) continue;
          auto& m = s == 0 ? m0 : m1;
          (s == 0 ? n0 : n1)++;
          for (std::size_t j = 0; j < d; ++j) m[j] += ds.features[s].at(i, j);
        }
      double dist = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = m0[j] / n0 - m1[j] / n1;
        dist += diff * diff;
      }
      gap += std::sqrt(dist);
    }
    return gap / 3.0;
  };
  CHECK(class_mean_gap(near) < 0.5);
  CHECK(class_mean_gap(far) > 6.0);
}

TEST_CASE("multi-task generation shares inputs and honors noise settings") {
  MultiTaskGenConfig cfg;
  cfg.seed = 9;
  cfg.tasks = 3;
  cfg.n = 200;
  cfg.feature_dim = 5;
  cfg.noise_std = {0.1, 0.2, 0.3};

  const auto ds = gen_multitask(cfg);
  REQUIRE(ds.task_count() == 3);
  CHECK(ds.mode == DatasetMode::MultiTask);
  CHECK(ds.features[0] == ds.features[1]);
  CHECK(ds.features[0] == ds.features[2]);
  CHECK_FALSE(ds.labels[0] == ds.labels[1]);
  ds.validate();

  MultiTaskGenConfig bad = cfg;
  bad.noise_std = {0.1, 0.2};  // neither scalar nor one per task
  CHECK_THROWS_AS(gen_multitask(bad), ConfigError);
}

TEST_CASE("task vectors realize the requested pairwise correlation") {
  MultiTaskGenConfig cfg;
  cfg.seed = 21;
  cfg.tasks = 3;
  cfg.n = 4000;
  cfg.feature_dim = 40;
  cfg.task_correlation = -0.5;
  cfg.noise_std = {0.0};

  const auto ds = gen_multitask(cfg);
  // with zero noise, labels are exact linear responses y_t = w_t . x with
  // |w_t| = 1, so empirical second moments recover the Gram entries
  const std::size_t n = ds.size(0);
  auto moment = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += ds.labels[a].at(i, 0) * ds.labels[b].at(i, 0);
    return s / static_cast<double>(n);
  };
  for (std::size_t t = 0; t < 3; ++t)
    CHECK(moment(t, t) == doctest::Approx(1.0).epsilon(0.15));
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b)
      CHECK(std::abs(moment(a, b) - (-0.5)) < 0.15);

  cfg.task_correlation = -0.9;  // infeasible for three tasks
  CHECK_THROWS_AS(gen_multitask(cfg), ConfigError);
}

TEST_CASE("explicit gram matrices drive the label covariance") {
  MultiTaskGenConfig cfg;
  cfg.seed = 22;
  cfg.tasks = 2;
  cfg.n = 4000;
  cfg.feature_dim = 40;
  cfg.noise_std = {0.0};

  Matrix gram(2, 2);
  gram.at(0, 0) = gram.at(1, 1) = 1.0;
  gram.at(0, 1) = gram.at(1, 0) = 0.8;
  const auto ds = gen_multitask_gram(cfg, gram);
  double s = 0.0;
  for (std::size_t i = 0; i < ds.size(0); ++i)
    s += ds.labels[0].at(i, 0) * ds.labels[1].at(i, 0);
  CHECK(s / static_cast<double>(ds.size(0)) ==
        doctest::Approx(0.8).epsilon(0.2));

  Matrix bad = gram;
  bad.at(0, 0) = 2.0;
  CHECK_THROWS_AS(gen_multitask_gram(cfg, bad), ConfigError);
  Matrix nonpsd(2, 2);
  nonpsd.at(0, 0) = nonpsd.at(1, 1) = 1.0;
  nonpsd.at(0, 1) = nonpsd.at(1, 0) = -1.5;
  CHECK_THROWS_AS(gen_multitask_gram(cfg, nonpsd), ConfigError);
}

TEST_CASE("binary targets emit grouped attributes") {
  MultiTaskGenConfig cfg;
  cfg.seed = 23;
  cfg.tasks = 2;
  cfg.n = 50;
  cfg.feature_dim = 6;
  cfg.target = LabelKind::Binary;
  cfg.attrs_per_task = 3;

  const auto ds = gen_multitask(cfg);
  for (const auto& task : ds.tasks) {
    CHECK(task.kind == LabelKind::Binary);
    CHECK(task.dim == 3);
  }
  CHECK(ds.labels[0].cols == 3);
  for (double v : ds.labels[0].data) CHECK((v == 0.0 || v == 1.0));
}

TEST_CASE("splits partition every source without reordering surprises") {
  MultiDomainGenConfig cfg;
  cfg.seed = 30;
  cfg.domains = 2;
  cfg.n_per_source = {100, 60};
  cfg.class_count = 3;
  cfg.feature_dim = 4;
  const auto ds = gen_multidomain(cfg);

  const auto [train, test] = split_dataset(ds, 0.25, 99);
  CHECK(train.size(0) == 75);
  CHECK(test.size(0) == 25);
  CHECK(train.size(1) == 45);
  CHECK(test.size(1) == 15);
  train.validate();
  test.validate();

  // row multiset is preserved: match rows by their feature fingerprint
  for (std::size_t s = 0; s < 2; ++s) {
    std::multiset<double> orig, got;
    for (std::size_t i = 0; i < ds.size(s); ++i) orig.insert(ds.features[s].at(i, 0));
    for (std::size_t i = 0; i < train.size(s); ++i)
      got.insert(train.features[s].at(i, 0));
    for (std::size_t i = 0; i < test.size(s); ++i)
      got.insert(test.features[s].at(i, 0));
    CHECK(orig == got);
  }

  // deterministic in the seed
  const auto [train2, test2] = split_dataset(ds, 0.25, 99);
  CHECK(train.features == train2.features);
  const auto [train3, test3] = split_dataset(ds, 0.25, 100);
  CHECK_FALSE(train.features == train3.features);
}

TEST_CASE("multi-task splits keep sources row-aligned") {
  MultiTaskGenConfig cfg;
  cfg.seed = 31;
  cfg.tasks = 2;
  cfg.n = 80;
  cfg.feature_dim = 4;
  const auto ds = gen_multitask(cfg);
  const auto [a, b] = split_dataset(ds, 0.5, 7);
  CHECK(a.features[0] == a.features[1]);
  CHECK(b.features[0] == b.features[1]);
  a.validate();
  b.validate();
}

TEST_CASE("target standardization is exact and transfers to other splits") {
  MultiSourceDataset ds;
  ds.mode = DatasetMode::MultiTask;
  ds.source_names = {"t"};
  TaskSpec task;
  task.name = "t";
  task.kind = LabelKind::Real;
  task.dim = 1;
  ds.tasks = {task};
  Matrix x(3, 2);
  x.data = {1, 0, 2, 0, 3, 0};
  Matrix y(3, 1);
  y.data = {1, 2, 3};
  ds.features = {x};
  ds.labels = {y};
  ds.validate();

  MultiSourceDataset other = ds;
  const TargetStats stats = standardize_targets(ds);
  REQUIRE(stats.mean.size() == 1);
  CHECK(stats.mean[0][0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(stats.stddev[0][0] ==
        doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
  CHECK(ds.labels[0].at(1, 0) == doctest::Approx(0.0).epsilon(1e-15));
  const double want = 1.0 / std::sqrt(2.0 / 3.0);
  CHECK(ds.labels[0].at(2, 0) == doctest::Approx(want).epsilon(1e-12));

  apply_target_stats(other, stats);
  CHECK(other.labels[0] == ds.labels[0]);
}

TEST_CASE("csv write and read reproduce the dataset exactly") {
  MultiDomainGenConfig cfg;
  cfg.seed = 40;
  cfg.domains = 2;
  cfg.n_per_source = {12, 9};
  cfg.class_count = 3;
  cfg.feature_dim = 4;
  const auto ds = gen_multidomain(cfg);

  const auto path = temp_file("roundtrip.csv");
  save_csv(ds, path.string());
  const auto back = load_csv(path.string());

  REQUIRE(back.task_count() == 2);
  CHECK(back.mode == DatasetMode::MultiDomain);
  CHECK(back.features == ds.features);
  CHECK(back.labels == ds.labels);
  for (std::size_t t = 0; t < 2; ++t) {
    CHECK(back.tasks[t].kind == ds.tasks[t].kind);
    CHECK(back.tasks[t].dim == ds.tasks[t].dim);
  }
  std::filesystem::remove(path);
}

TEST_CASE("csv inference distinguishes label kinds") {
  const auto path = temp_file("kinds.csv");
  atomic_write_file(path.string(),
                    "source,f0,task:cls,task:score\n"
                    "only,0.5,0,1.25\n"
                    "only,1.5,2,-0.75\n"
                    "only,2.5,1,0.25\n");
  const auto ds = load_csv(path.string());
  REQUIRE(ds.task_count() == 2);
  CHECK(ds.mode == DatasetMode::MultiTask);
  CHECK(ds.tasks[0].name == "cls");
  CHECK(ds.tasks[0].kind == LabelKind::ClassId);
  CHECK(ds.tasks[0].dim == 3);  // max id + 1
  CHECK(ds.tasks[1].kind == LabelKind::Real);
  CHECK(ds.features[0].cols == 1);
  std::filesystem::remove(path);
}

TEST_CASE("csv 0/1 columns default to binary and overrides can widen them") {
  const auto path = temp_file("binary.csv");
  atomic_write_file(path.string(),
                    "source,f0,task:flag\n"
                    "only,0.5,0\n"
                    "only,1.5,1\n");
  const auto ds = load_csv(path.string());
  CHECK(ds.tasks[0].kind == LabelKind::Binary);

  CsvSchema schema;
  TaskSpec wide;
  wide.name = "flag";
  wide.kind = LabelKind::ClassId;
  wide.dim = 4;
  schema.label_overrides = {wide};
  const auto ds2 = load_csv(path.string(), schema);
  CHECK(ds2.tasks[0].kind == LabelKind::ClassId);
  CHECK(ds2.tasks[0].dim == 4);
  std::filesystem::remove(path);
}

TEST_CASE("csv loading rejects structural problems") {
  const auto missing = temp_file("does_not_exist.csv");
  CHECK_THROWS_AS(load_csv(missing.string()), IoError);

  const auto path = temp_file("broken.csv");
  atomic_write_file(path.string(),
                    "source,f0,task:y\n"
                    "a,1,0.5\n"
                    "a,2,0.5,3\n");
  CHECK_THROWS_AS(load_csv(path.string()), ConfigError);

  atomic_write_file(path.string(), "source,f0,task:y\na,1,0.5\n");
  CsvSchema schema;
  schema.expected_sources = {"a", "b"};
  CHECK_THROWS_AS(load_csv(path.string(), schema), ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("far-shifted domains defeat zero-shot transfer") {
  MultiDomainGenConfig cfg;
  cfg.seed = 50;
  cfg.domains = 2;
  cfg.n_per_source = {400, 400};
  cfg.class_count = 4;
  cfg.feature_dim = 8;
  cfg.class_std = 1.0;
  cfg.domain_shift = 10.0;
  const auto ds = gen_multidomain(cfg);

  // nearest-class-mean classifier fit on domain 0, applied to domain 1
  const std::size_t d = cfg.feature_dim;
  std::vector<std::vector<double>> means(4, std::vector<double>(d, 0.0));
  std::vector<std::size_t> counts(4, 0);
  for (std::size_t i = 0; i < ds.size(0); ++i) {
    const auto c = static_cast<std::size_t>(ds.labels[0].at(i, 0));
    ++counts[c];
    for (std::size_t j = 0; j < d; ++j) means[c][j] += ds.features[0].at(i, j);
  }
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t j = 0; j < d; ++j) means[c][j] /= counts[c];

  auto accuracy_on = [&](std::size_t s) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ds.size(s); ++i) {
      std::size_t arg = 0;
      double best = 1e300;
      for (std::size_t c = 0; c < 4; ++c) {
        double dist = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = ds.features[s].at(i, j) - means[c][j];
          dist += diff * diff;
        }
        if (dist < best) {
          best = dist;
          arg = c;
        }
      }
      if (arg == static_cast<std::size_t>(ds.labels[s].at(i, 0))) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(ds.size(s));
  };
  CHECK(accuracy_on(0) > 0.6);         // in-domain is learnable
  CHECK(accuracy_on(1) < 0.25 + 0.10); // out-of-domain is near chance
}
