#ifndef SCALWEIGHT_DATASET_HPP
#define SCALWEIGHT_DATASET_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "scalweight/losses.hpp"
#include "scalweight/matrix.hpp"

namespace scalweight {

enum class LabelKind { ClassId, Real, Binary };

enum class DatasetMode {
  MultiDomain,  // several input sources, one shared label space
  MultiTask,    // one input set, one label set per task
};

struct TaskSpec {
  std::string name;
  LabelKind kind = LabelKind::Real;
  std::size_t dim = 1;  // classes for ClassId, label columns otherwise

  std::size_t label_cols() const { return kind == LabelKind::ClassId ? 1 : dim; }
  std::size_t output_dim() const { return dim; }  // model head width
  LossKind loss() const;
  MetricKind metric() const;

  bool operator==(const TaskSpec&) const = default;
};

// T sources, each a (features, labels) pair. Source t trains task t: in
// multi-domain mode the tasks are identical copies of one shared label space;
// in multi-task mode the feature matrices are identical copies of one input
// set. Both invariants are checked by validate().
struct MultiSourceDataset {
  DatasetMode mode = DatasetMode::MultiDomain;
  std::vector<std::string> source_names;
  std::vector<TaskSpec> tasks;
  std::vector<Matrix> features;  // per source, n_t x feature_dim
  std::vector<Matrix> labels;    // per source, n_t x label_cols

  std::size_t task_count() const { return tasks.size(); }
  std::size_t feature_dim() const;
  std::size_t size(std::size_t source) const { return features[source].rows; }
  void validate() const;  // throws ConfigError
};

std::vector<std::size_t> output_dims_for(const MultiSourceDataset& ds);

// --- synthetic generators ---------------------------------------------------

// Gaussian-mixture classification domains. Every domain shares the same
// class set; each (domain, class) pair displaces its mean by a random
// direction of length domain_shift, and class_skew tilts per-domain class
// frequencies (0 = uniform).
struct MultiDomainGenConfig {
  std::uint64_t seed = 1;
  std::size_t domains = 2;
  std::vector<std::size_t> n_per_source;  // one entry per domain
  std::size_t class_count = 4;
  std::size_t feature_dim = 8;
  double domain_shift = 0.0;
  double class_skew = 0.0;  // in [0, 1)
  double class_std = 1.0;
  double mean_scale = 2.0;
};
MultiSourceDataset gen_multidomain(const MultiDomainGenConfig& cfg);

// Shared inputs with per-task linear(+noise) regression or thresholded
// binary targets. Task weight vectors are unit length with pairwise cosine
// task_correlation (via the Gram factorization); infeasible correlations are
// rejected. attrs_per_task > 1 emits grouped binary attributes that share a
// task id, each from a jittered copy of the task vector.
struct MultiTaskGenConfig {
  std::uint64_t seed = 1;
  std::size_t tasks = 2;
  std::size_t n = 1000;
  std::size_t feature_dim = 8;
  double task_correlation = 0.0;
  LabelKind target = LabelKind::Real;  // Real or Binary
  std::size_t attrs_per_task = 1;
  std::vector<double> noise_std = {0.1};  // broadcast, or one entry per task
};
MultiSourceDataset gen_multitask(const MultiTaskGenConfig& cfg);

// Same construction with an explicit task Gram matrix (unit diagonal,
// positive semidefinite). cfg.task_correlation is ignored.
MultiSourceDataset gen_multitask_gram(const MultiTaskGenConfig& cfg,
                                      const Matrix& gram);

// --- target standardization --------------------------------------------------

struct TargetStats {
  // per task; empty vectors for tasks whose labels are not Real
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> stddev;  // population formula
};

// Shifts/scales Real-valued targets to zero mean and unit variance per task,
// computed on this dataset (the training split). Returns the stats so the
// identical transform can be applied to held-out splits.
TargetStats standardize_targets(MultiSourceDataset& ds);
void apply_target_stats(MultiSourceDataset& ds, const TargetStats& stats);

// --- splits ------------------------------------------------------------------

// Random row split. Multi-task datasets use one shared permutation so the
// input rows stay aligned across sources; multi-domain sources split
// independently. Both halves keep the full source/task structure.
std::pair<MultiSourceDataset, MultiSourceDataset> split_dataset(
    const MultiSourceDataset& ds, double second_fraction, std::uint64_t seed);

// --- csv ---------------------------------------------------------------------

// On-disk schema: UTF-8, comma separated, '.' decimal point, header required.
// The `source` column is a string naming the source; columns named
// task:<name> (or task:<name>:<i> for multi-column labels) carry labels;
// every other column is a numeric feature. One distinct source value means
// multi-task mode, several mean multi-domain mode.
struct CsvSchema {
  std::string source_column = "source";
  std::vector<std::string> expected_sources;  // error if one is absent
  std::vector<TaskSpec> label_overrides;      // by task name; else inferred
};

MultiSourceDataset load_csv(const std::string& path,
                            const CsvSchema& schema = {});
void save_csv(const MultiSourceDataset& ds, const std::string& path);

}  // namespace scalweight

#endif
