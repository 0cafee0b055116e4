#ifndef SCALWEIGHT_CONFLICT_PROFILER_HPP
#define SCALWEIGHT_CONFLICT_PROFILER_HPP

#include <map>
#include <string>
#include <vector>

#include "scalweight/grad_mto.hpp"
#include "scalweight/matrix.hpp"

namespace scalweight {

// Per-epoch conflict accounting. A step contributes one observation per
// unordered task pair; the fraction is conflicting observations over all
// pair observations in the epoch.
struct ConflictRecord {
  std::size_t epoch = 0;
  std::size_t pair_observations = 0;
  std::size_t conflicting_observations = 0;
  double fraction = 0.0;
  Matrix pair_fraction;      // T x T symmetric, zero diagonal
  Matrix pair_observed;      // observation counts per pair
  Matrix pair_conflicting;   // conflict counts per pair
  std::size_t degenerate_observations = 0;
};

// Read-only observer of per-task gradients. Recording never mutates the
// gradients and consumes no randomness, so enabling it cannot change a
// training trajectory.
class ConflictProfiler {
 public:
  explicit ConflictProfiler(std::size_t task_count);

  void record_step(const GradientSet& grads);
  // Closes the current epoch and appends its record; resets step counters.
  const ConflictRecord& finish_epoch(std::size_t epoch);

  const std::vector<ConflictRecord>& records() const { return records_; }
  std::size_t task_count() const { return task_count_; }

 private:
  std::size_t task_count_;
  Matrix observed_, conflicting_;
  std::size_t degenerate_ = 0;
  std::vector<ConflictRecord> records_;
};

// Median over epochs of each pair's conflict fraction; T x T symmetric,
// zero diagonal.
Matrix affinity_matrix(const std::vector<ConflictRecord>& records);

// One cell of a hyperparameter-grid conflict study.
struct GridCell {
  std::map<std::string, std::string> coords;   // axis name -> value
  std::vector<double> epoch_fractions;
};

// Sensitivity of conflict measurements to one axis: for each combination of
// the remaining axes, take the variance (population) of the time-averaged
// fraction across the chosen axis's values, then report the median of those
// variances. The grid must be complete; missing cells are reported.
double variance_analysis(const std::vector<GridCell>& cells,
                         const std::string& axis);

// CSV with columns: epoch, fraction, conflict_<i>_<j> per unordered pair.
std::string conflict_records_csv(const std::vector<ConflictRecord>& records);

}  // namespace scalweight

#endif
