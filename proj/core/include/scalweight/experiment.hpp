#ifndef SCALWEIGHT_EXPERIMENT_HPP
#define SCALWEIGHT_EXPERIMENT_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "scalweight/dataset.hpp"
#include "scalweight/model.hpp"
#include "scalweight/optimizer.hpp"
#include "scalweight/trainer.hpp"
#include "scalweight/weighting.hpp"

namespace scalweight {

// Everything needed to regenerate a run's reported numbers: identity,
// data/model/method configuration, seeds, per-epoch records, and cost.
struct RunManifest {
  std::string run_id;
  std::string dataset;  // generator description or csv path
  std::uint64_t dataset_seed = 0;
  ModelSpec model;
  Method method = Method::Scalarization;
  ScalarizationMode mode = ScalarizationMode::Reweigh;
  std::vector<double> weights;          // fixed-weight runs
  std::vector<WeightSegment> schedule;  // scheduled runs
  OptimizerConfig optimizer;
  std::uint64_t seed = 1;
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  std::vector<std::string> task_names;
  std::vector<std::string> metric_names;
  std::vector<EpochRecord> records;
  double wall_clock_seconds = 0.0;
  CostReport cost;
};

std::string manifest_json(const RunManifest& manifest);
RunManifest manifest_from_json(const std::string& text);  // throws IoError

// Long-format rows: run_id, epoch, task, split, metric_name, value.
std::string manifest_metrics_csv(const RunManifest& manifest);

// --- weight-grid sweeps -------------------------------------------------------

// Evenly spaced two-task grid {(x, 1-x)}; `points` >= 2 includes both
// vertices.
std::vector<WeightVector> weight_grid(std::size_t tasks, std::size_t points);

struct SweepConfig {
  std::vector<WeightVector> grid;
  std::size_t seeds = 3;
  std::uint64_t base_seed = 1;
  double val_fraction = 0.2;  // selection split carved from the train data
  bool include_vertices = false;
  std::size_t jobs = 1;
};

struct SweepCell {
  WeightVector weights;
  std::vector<double> test_mean;  // per task, across seeds
  std::vector<double> test_std;   // population formula
  double val_mean = 0.0;          // mean oriented validation score
  double val_std = 0.0;
};

// Best weights are chosen on the validation split; test metrics are only
// reported, never selected on.
struct SweepResult {
  std::vector<SweepCell> cells;
  std::size_t best_index = 0;  // p*
  std::vector<double> sd_test_mean;  // per task: single-source baselines
  std::vector<double> sd_test_std;
  std::vector<std::string> task_names;
  std::vector<MetricKind> metrics;
  ModelSpec model;
  std::size_t seed_count = 0;
  std::uint64_t base_seed = 1;
};

// One completed sweep-internal run, reported as it finishes (serialized, so
// observers need no locking of their own).
struct SweepRunRecord {
  bool single_source = false;
  std::size_t cell = 0;  // joint runs: grid index
  std::size_t task = 0;  // single-source runs: the trained task
  std::size_t seed_index = 0;
  std::uint64_t seed = 1;
  WeightVector weights;  // joint runs only
  const RunResult* result = nullptr;
};
using SweepObserver = std::function<void(const SweepRunRecord&)>;

// Trains grid x seeds joint models plus per-task single-source baselines on
// the same per-seed fit/validation splits, so vertex grid points and
// baselines are bit-comparable at equal seeds.
SweepResult sweep_weights(const MultiSourceDataset& train,
                          const MultiSourceDataset& test,
                          const ModelSpec& spec, const TrainConfig& base,
                          const SweepConfig& cfg,
                          const SweepObserver& observer = {});

std::string sweep_csv(const SweepResult& result);
std::string sweep_summary_json(const SweepResult& result);

// --- single-source baselines over a capacity grid -----------------------------

struct CapacityGrid {
  std::vector<std::size_t> trunk_depths;
  std::vector<double> width_multipliers;
};

struct SdCell {
  std::size_t trunk_depth = 1;
  double width_multiplier = 1.0;
  std::size_t task = 0;
  double test_mean = 0.0;
  double test_std = 0.0;
  std::size_t param_count = 0;
  std::size_t seeds_failed = 0;  // diverged seeds, excluded from the mean
  bool diverged = false;
};

// One single-source model per (task, capacity, seed); divergence is recorded
// per cell instead of aborting the grid.
std::vector<SdCell> run_sd_baselines(const MultiSourceDataset& train,
                                     const MultiSourceDataset& test,
                                     const ModelSpec& base_spec,
                                     const TrainConfig& base,
                                     const CapacityGrid& grid,
                                     std::size_t seeds,
                                     std::uint64_t base_seed,
                                     std::size_t jobs = 1);

std::string sd_csv(std::span<const SdCell> cells);

// --- reports -------------------------------------------------------------------

// Per-task deltas of the sweep's best cell against the single-source
// baselines, on the oriented (higher-is-better) scale: positive means joint
// training won. Lower-is-better metrics are negated before subtracting.
std::vector<double> delta_report(const SweepResult& sweep);

struct TradeoffRow {
  std::size_t trunk_depth = 1;
  double width_multiplier = 1.0;
  std::vector<double> weights;
  std::vector<double> metrics;  // per task test mean
  std::size_t param_count = 0;
  bool dominates_sd = false;  // strictly better than SD on every task
};

// One row per (capacity, grid point) across sweeps run at different
// capacities.
std::vector<TradeoffRow> tradeoff_table(std::span<const SweepResult> sweeps);

std::string tradeoff_csv(std::span<const TradeoffRow> rows);

// --- cost accounting -----------------------------------------------------------

struct CostEstimate {
  std::size_t gradient_values_stored = 0;
  std::size_t backward_passes_per_step = 0;
};

// Loss-based methods hold one P-sized accumulator and run one backward pass;
// gradient-based methods hold T of each.
CostEstimate estimate_cost(Method method, std::size_t tasks,
                           std::size_t param_count);

std::string cost_csv(std::span<const Method> methods, std::size_t tasks,
                     std::size_t param_count);

// --- statistics ----------------------------------------------------------------

// Spearman rank correlation with average ranks on ties.
double spearman_rank_correlation(std::span<const double> a,
                                 std::span<const double> b);

}  // namespace scalweight

#endif
