#include "scalweight/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "scalweight/error.hpp"

namespace scalweight {

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::SgdMomentum ? "sgd_momentum" : "adamw";
}

std::string to_string(LrSchedule schedule) {
  return schedule == LrSchedule::Constant ? "constant" : "cosine";
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sgd_momentum" || name == "sgd") return OptimizerKind::SgdMomentum;
  if (name == "adamw") return OptimizerKind::AdamW;
  throw ConfigError("unknown optimizer: " + name);
}

LrSchedule lr_schedule_from_string(const std::string& name) {
  if (name == "constant") return LrSchedule::Constant;
  if (name == "cosine") return LrSchedule::CosineDecay;
  throw ConfigError("unknown lr schedule: " + name);
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("optimizer: learning_rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0)
    throw ConfigError("optimizer: momentum must lie in [0, 1)");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("optimizer: betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("optimizer: epsilon must be positive");
  if (weight_decay < 0.0)
    throw ConfigError("optimizer: weight_decay must be non-negative");
  if (total_epochs == 0)
    throw ConfigError("optimizer: total_epochs must be positive");
  if (warmup_epochs > total_epochs)
    throw ConfigError("optimizer: warmup exceeds total_epochs");
}

double lr_at(const OptimizerConfig& cfg, std::size_t step,
             std::size_t steps_per_epoch) {
  if (steps_per_epoch == 0) throw ConfigError("lr_at: steps_per_epoch is zero");
  const double base = cfg.learning_rate;
  const std::size_t warmup = cfg.warmup_epochs * steps_per_epoch;
  if (step < warmup)
    return base * static_cast<double>(step + 1) / static_cast<double>(warmup);
  if (cfg.schedule == LrSchedule::Constant) return base;
  const std::size_t total = cfg.total_epochs * steps_per_epoch;
  if (step >= total) return 0.0;
  const double span = static_cast<double>(total - warmup);
  const double progress = static_cast<double>(step - warmup) / span;
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

Optimizer::Optimizer(const OptimizerConfig& cfg, std::size_t param_count)
    : cfg_(cfg) {
  cfg.validate();
  m_.assign(param_count, 0.0);
  if (cfg.kind == OptimizerKind::AdamW) v_.assign(param_count, 0.0);
}

void Optimizer::step(std::span<double> params, std::span<const double> grad,
                     std::size_t steps_per_epoch) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw ConfigError("optimizer: parameter/gradient size mismatch");
  for (double g : grad)
    if (!std::isfinite(g))
      throw DivergenceError("optimizer: non-finite gradient, step rejected");

  const double lr = lr_at(cfg_, step_, steps_per_epoch);
  const std::size_t n = params.size();
  if (cfg_.kind == OptimizerKind::SgdMomentum) {
    for (std::size_t i = 0; i < n; ++i) {
      const double g = grad[i] + cfg_.weight_decay * params[i];
      m_[i] = cfg_.momentum * m_[i] + g;
      params[i] -= lr * m_[i];
    }
  } else {
    const double t = static_cast<double>(step_ + 1);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
    for (std::size_t i = 0; i < n; ++i) {
      const double g = grad[i];
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m_[i] / bc1;
      const double vhat = v_[i] / bc2;
      params[i] -=
          lr * (mhat / (std::sqrt(vhat) + cfg_.epsilon) +
                cfg_.weight_decay * params[i]);
    }
  }
  ++step_;
}

std::size_t Optimizer::slot_count() const {
  return cfg_.kind == OptimizerKind::AdamW ? 2 : 1;
}

std::span<double> Optimizer::slot(std::size_t i) {
  if (i == 0) return m_;
  if (i == 1 && cfg_.kind == OptimizerKind::AdamW) return v_;
  throw ConfigError("optimizer: state slot out of range");
}

std::span<const double> Optimizer::slot(std::size_t i) const {
  if (i == 0) return m_;
  if (i == 1 && cfg_.kind == OptimizerKind::AdamW) return v_;
  throw ConfigError("optimizer: state slot out of range");
}

}  // namespace scalweight
