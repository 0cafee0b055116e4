// Fixed synthetic benchmarks shared by the unit and acceptance tests. The
// constants are frozen; tests depend on their exact values for reproducible
// pass/fail behavior.
#ifndef SCALWEIGHT_TEST_BENCH_HPP
#define SCALWEIGHT_TEST_BENCH_HPP

#include "scalweight/dataset.hpp"
#include "scalweight/model.hpp"
#include "scalweight/trainer.hpp"

namespace scalweight::testing {

struct Bench {
  MultiSourceDataset train;
  MultiSourceDataset test;
  bool has_test = false;
  ModelSpec spec;
  TrainConfig base;
};

// Two-domain classification; joint training at a vertex must reduce exactly
// to single-source training.
Bench mdl_benchmark();

// Two regression tasks through a narrow trunk with very uneven label noise,
// so the best fixed mixing weight sits clearly off uniform (near 0.3 mass on
// the noisy task). Used by the weight-search and capacity-rank tests.
Bench asym_benchmark();

// Four regression tasks: three mutually aligned (+0.5 generator cosine), one
// anti-correlated with all of them (-0.8). The odd task out must dominate
// every conflict statistic.
Bench outlier_benchmark();

// Six tasks, wider model; used for per-step cost comparisons.
Bench cost_benchmark();

}  // namespace scalweight::testing

#endif
