#ifndef SCALWEIGHT_TRAINER_HPP
#define SCALWEIGHT_TRAINER_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scalweight/conflict_profiler.hpp"
#include "scalweight/dataset.hpp"
#include "scalweight/grad_mto.hpp"
#include "scalweight/model.hpp"
#include "scalweight/optimizer.hpp"
#include "scalweight/sampler.hpp"
#include "scalweight/weighting.hpp"

namespace scalweight {

enum class Method {
  Scalarization,  // fixed weight vector
  Uncertainty,    // adaptive loss weights, exp(-s) form
  ImtlL,          // adaptive loss weights, exp(s) form
  PcGrad,
  GradDrop,
  CaGrad,
};

// Gradient-level methods hold all T task gradients; loss-level methods fold
// everything into one accumulator.
bool is_gradient_method(Method m);
std::string to_string(Method m);
Method method_from_string(const std::string& name);

enum class ScalarizationMode {
  Reweigh,   // per-task sub-batches, loss scaled by p_t
  Resample,  // one mixture batch drawn with probabilities p
};

std::string to_string(ScalarizationMode mode);
ScalarizationMode mode_from_string(const std::string& name);

// Weights in force for epochs [start_epoch, end_epoch).
struct WeightSegment {
  double start_epoch = 0.0;
  double end_epoch = 0.0;
  WeightVector weights;
};

struct TrainConfig {
  Method method = Method::Scalarization;
  ScalarizationMode mode = ScalarizationMode::Reweigh;
  WeightVector weights;                 // default: uniform
  std::vector<WeightSegment> schedule;  // overrides `weights` when non-empty
  OptimizerConfig optimizer;
  EpochConvention epoch;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  double s_learning_rate = 0.025;  // adaptive methods
  CagradConfig cagrad;
  bool profile_conflicts = false;
  std::size_t profile_stride = 1;

  void validate(std::size_t task_count) const;
};

struct TaskEpochMetrics {
  double train_loss = 0.0;    // mean of the recorded per-step losses
  double train_metric = 0.0;  // full train split
  double eval_metric = 0.0;   // full eval split, when one was given
  bool has_eval = false;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::vector<TaskEpochMetrics> tasks;
  std::vector<double> dynamic_weights;  // adaptive methods: mean task weight
  double mean_eval_oriented = 0.0;
};

struct CostReport {
  std::size_t gradient_values_stored = 0;   // P, or T*P for gradient methods
  std::size_t backward_passes_per_step = 0; // 1, or T for gradient methods
  double seconds_per_step = 0.0;            // measured, update path only
  std::size_t steps = 0;
};

struct RunResult {
  ModelParams model;
  std::vector<EpochRecord> epochs;
  std::vector<ConflictRecord> conflicts;
  std::vector<std::vector<double>> step_weights;  // adaptive: per step
  CostReport cost;
  bool cagrad_fallback_seen = false;
};

// Incremental training driver. Owns the model, optimizer state, and one RNG
// stream per source plus sampler/method streams, so training can pause at
// epoch boundaries, be checkpointed, and resume bit-exactly.
class Trainer {
 public:
  Trainer(const MultiSourceDataset& train, const MultiSourceDataset* eval,
          const ModelSpec& spec, const TrainConfig& cfg);

  // Restricts every step to one source with plain unweighted loss: the
  // single-source baseline path. Must be called before training starts.
  void restrict_to_source(std::size_t source);

  void run_epoch();
  void run_epochs(std::size_t count);

  std::size_t epochs_done() const { return epochs_done_; }
  std::size_t steps_per_epoch() const { return steps_per_epoch_; }

  const ModelParams& model() const { return model_; }
  ModelParams& model() { return model_; }
  Optimizer& optimizer() { return optimizer_; }
  const Optimizer& optimizer() const { return optimizer_; }

  const WeightVector& weights() const { return weights_; }
  void set_weights(WeightVector w);

  std::vector<double> adaptive_s() const;
  void set_adaptive_s(const std::vector<double>& s);

  // Every internal RNG stream, for checkpointing.
  std::vector<std::string> serialize_rngs() const;
  void restore_rngs(const std::vector<std::string>& states);

  void set_epochs_done(std::size_t epochs);

  // Full-split evaluation helpers.
  std::vector<double> eval_metrics(const MultiSourceDataset& ds) const;
  std::vector<double> eval_losses(const MultiSourceDataset& ds) const;
  double mean_oriented_metric(const MultiSourceDataset& ds) const;

  const std::vector<EpochRecord>& epoch_records() const { return records_; }
  RunResult take_result();

 private:
  void step(const WeightVector& p);
  const WeightVector& weights_for_epoch(std::size_t epoch) const;

  const MultiSourceDataset* train_;
  const MultiSourceDataset* eval_;
  TrainConfig cfg_;
  ModelParams model_;
  Optimizer optimizer_;
  WeightVector weights_;
  std::optional<std::size_t> single_source_;

  std::vector<Rng> source_rngs_;
  Rng sampler_rng_;
  Rng method_rng_;
  AdaptiveLossState adaptive_;
  std::optional<ConflictProfiler> profiler_;
  bool fully_shared_ = false;

  std::size_t steps_per_epoch_ = 0;
  std::size_t epochs_done_ = 0;
  std::size_t global_step_ = 0;
  std::vector<EpochRecord> records_;
  std::vector<std::vector<double>> step_weights_;
  bool cagrad_fallback_seen_ = false;

  // per-epoch accumulation
  std::vector<double> loss_sums_;
  std::vector<std::size_t> loss_counts_;
  std::vector<double> weight_sums_;
  double step_seconds_ = 0.0;
  std::size_t timed_steps_ = 0;

  // scratch
  std::vector<double> grad_;
  GradientSet task_grads_;
};

// Convenience one-shot runs.
RunResult train_run(const MultiSourceDataset& train,
                    const MultiSourceDataset* eval, const ModelSpec& spec,
                    const TrainConfig& cfg);

// Single-source baseline: same architecture and seed, trained only on
// `source` with that task's plain loss.
RunResult train_single_source(const MultiSourceDataset& train,
                              const MultiSourceDataset* eval,
                              const ModelSpec& spec, const TrainConfig& cfg,
                              std::size_t source);

// Raw per-task metrics of a model over a dataset (full batch).
std::vector<double> evaluate_task_metrics(const ModelParams& model,
                                          const MultiSourceDataset& ds);
std::vector<double> evaluate_task_losses(const ModelParams& model,
                                         const MultiSourceDataset& ds);
double mean_oriented_metric(const ModelParams& model,
                            const MultiSourceDataset& ds);

// Model spec with output dims taken from the dataset's tasks.
ModelSpec spec_for_dataset(const MultiSourceDataset& ds, ModelSpec base);

}  // namespace scalweight

#endif
