#ifndef SCALWEIGHT_WEIGHTING_HPP
#define SCALWEIGHT_WEIGHTING_HPP

#include <span>
#include <vector>

namespace scalweight {

// Point on the probability simplex: entries in [0, 1] summing to 1 within
// 1e-12. Constructed through validation or simplex_project.
class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(std::vector<double> p);  // validates

  std::size_t size() const { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }
  const std::vector<double>& values() const { return p_; }

  static WeightVector uniform(std::size_t dim);
  // Basis vector e_t: all mass on one task.
  static WeightVector vertex(std::size_t dim, std::size_t task);

  bool operator==(const WeightVector&) const = default;

 private:
  std::vector<double> p_;
};

// Clips negative entries to zero and renormalizes to sum 1. All-zero (or
// all-clipped) input is rejected.
WeightVector simplex_project(std::span<const double> raw);

// sum_t p_t * losses[t]; rejects NaN losses (divergence guard).
double scalarized_loss(std::span<const double> losses, const WeightVector& p);

// Loss-based adaptive weighting. Both methods keep one log-variance style
// parameter s_t per task, updated by plain SGD on d(total)/d(s_t):
//   Uncertainty: total = sum exp(-s_t) L_t + s_t / 2
//   ImtlL:       total = sum exp(s_t) L_t - s_t
// The factor multiplying L_t acts as that step's dynamic task weight.
enum class AdaptiveMethod { Uncertainty, ImtlL };

struct AdaptiveLossState {
  AdaptiveMethod method = AdaptiveMethod::Uncertainty;
  std::vector<double> s;          // one per task, initialized to 0
  double s_learning_rate = 0.025;

  static AdaptiveLossState make(AdaptiveMethod m, std::size_t tasks,
                                double s_lr = 0.025);

  // Weight multiplying L_t in the total at the current s.
  double task_weight(std::size_t t) const;
  // Total loss at the current s.
  double total(std::span<const double> losses) const;
  // One SGD step on s given the current per-task losses.
  void update(std::span<const double> losses);
};

}  // namespace scalweight

#endif
