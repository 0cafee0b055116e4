#include "scalweight/weighting.hpp"

#include <cmath>

#include "scalweight/error.hpp"

namespace scalweight {

WeightVector::WeightVector(std::vector<double> p) : p_(std::move(p)) {
  if (p_.empty()) throw ConfigError("weights: empty vector");
  double total = 0.0;
  for (double v : p_) {
    if (!std::isfinite(v)) throw ConfigError("weights: non-finite entry");
    if (v < 0.0 || v > 1.0)
      throw ConfigError("weights: entries must lie in [0, 1]");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw ConfigError("weights: entries must sum to 1");
}

WeightVector WeightVector::uniform(std::size_t dim) {
  if (dim == 0) throw ConfigError("weights: zero dimension");
  std::vector<double> p(dim, 1.0 / static_cast<double>(dim));
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < dim; ++i) total += p[i];
  p[dim - 1] = 1.0 - total;  // absorb rounding so the sum is exactly 1
  return WeightVector(std::move(p));
}

WeightVector WeightVector::vertex(std::size_t dim, std::size_t task) {
  if (task >= dim) throw ConfigError("weights: vertex index out of range");
  std::vector<double> p(dim, 0.0);
  p[task] = 1.0;
  return WeightVector(std::move(p));
}

WeightVector simplex_project(std::span<const double> raw) {
  if (raw.empty()) throw ConfigError("simplex_project: empty input");
  std::vector<double> p(raw.begin(), raw.end());
  double total = 0.0;
  for (auto& v : p) {
    if (!std::isfinite(v)) throw ConfigError("simplex_project: non-finite entry");
    if (v < 0.0) v = 0.0;
    total += v;
  }
  if (total <= 0.0)
    throw ConfigError("simplex_project: no positive mass to normalize");
  for (auto& v : p) v /= total;
  // normalization can still leave the sum one ulp off; pin it on the largest
  double sum = 0.0;
  std::size_t argmax = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sum += p[i];
    if (p[i] > p[argmax]) argmax = i;
  }
  p[argmax] += 1.0 - sum;
  return WeightVector(std::move(p));
}

double scalarized_loss(std::span<const double> losses, const WeightVector& p) {
  if (losses.size() != p.size())
    throw ConfigError("scalarized_loss: weight/loss count mismatch");
  double total = 0.0;
  for (std::size_t t = 0; t < losses.size(); ++t) {
    if (std::isnan(losses[t]))
      throw DivergenceError("scalarized_loss: NaN task loss");
    total += p[t] * losses[t];
  }
  return total;
}

AdaptiveLossState AdaptiveLossState::make(AdaptiveMethod m, std::size_t tasks,
                                          double s_lr) {
  if (tasks == 0) throw ConfigError("adaptive loss: no tasks");
  if (!(s_lr > 0.0)) throw ConfigError("adaptive loss: s_learning_rate <= 0");
  AdaptiveLossState st;
  st.method = m;
  st.s.assign(tasks, 0.0);
  st.s_learning_rate = s_lr;
  return st;
}

double AdaptiveLossState::task_weight(std::size_t t) const {
  return method == AdaptiveMethod::Uncertainty ? std::exp(-s[t])
                                               : std::exp(s[t]);
}

double AdaptiveLossState::total(std::span<const double> losses) const {
  if (losses.size() != s.size())
    throw ConfigError("adaptive loss: loss count mismatch");
  double out = 0.0;
  for (std::size_t t = 0; t < s.size(); ++t) {
    if (std::isnan(losses[t]))
      throw DivergenceError("adaptive loss: NaN task loss");
    if (method == AdaptiveMethod::Uncertainty)
      out += std::exp(-s[t]) * losses[t] + 0.5 * s[t];
    else
      out += std::exp(s[t]) * losses[t] - s[t];
  }
  return out;
}

void AdaptiveLossState::update(std::span<const double> losses) {
  if (losses.size() != s.size())
    throw ConfigError("adaptive loss: loss count mismatch");
  for (std::size_t t = 0; t < s.size(); ++t) {
    const double grad =
        method == AdaptiveMethod::Uncertainty
            ? -std::exp(-s[t]) * losses[t] + 0.5
            : std::exp(s[t]) * losses[t] - 1.0;
    s[t] -= s_learning_rate * grad;
  }
}

}  // namespace scalweight
