#ifndef SCALWEIGHT_OPTIMIZER_HPP
#define SCALWEIGHT_OPTIMIZER_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace scalweight {

enum class OptimizerKind { SgdMomentum, AdamW };
enum class LrSchedule { Constant, CosineDecay };

std::string to_string(OptimizerKind kind);
std::string to_string(LrSchedule schedule);
OptimizerKind optimizer_kind_from_string(const std::string& name);
LrSchedule lr_schedule_from_string(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::SgdMomentum;
  double learning_rate = 0.01;
  double momentum = 0.9;       // sgd only
  double beta1 = 0.9;          // adamw only
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;   // L2 for sgd, decoupled for adamw
  LrSchedule schedule = LrSchedule::Constant;
  std::size_t warmup_epochs = 0;
  std::size_t total_epochs = 1;  // cosine horizon

  void validate() const;  // throws ConfigError
  bool operator==(const OptimizerConfig&) const = default;
};

// Scheduled learning rate for a 0-based global step. Linear warmup over
// warmup_epochs climbs to the base rate, then either holds (Constant) or
// follows a half cosine to exactly 0 at total_epochs (CosineDecay).
double lr_at(const OptimizerConfig& cfg, std::size_t step,
             std::size_t steps_per_epoch);

class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(const OptimizerConfig& cfg, std::size_t param_count);

  // One update in place. Throws DivergenceError on non-finite gradients,
  // leaving parameters and state untouched.
  void step(std::span<double> params, std::span<const double> grad,
            std::size_t steps_per_epoch);

  const OptimizerConfig& config() const { return cfg_; }
  std::size_t step_index() const { return step_; }
  void set_step_index(std::size_t s) { step_ = s; }

  // State blobs in a fixed order, for checkpoints: sgd exposes the momentum
  // buffer; adamw exposes first and second moments.
  std::size_t slot_count() const;
  std::span<double> slot(std::size_t i);
  std::span<const double> slot(std::size_t i) const;

  bool operator==(const Optimizer&) const = default;

 private:
  OptimizerConfig cfg_;
  std::size_t step_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace scalweight

#endif
