#ifndef SCALWEIGHT_GRAD_MTO_HPP
#define SCALWEIGHT_GRAD_MTO_HPP

#include <span>
#include <vector>

#include "scalweight/losses.hpp"
#include "scalweight/matrix.hpp"
#include "scalweight/model.hpp"
#include "scalweight/rng.hpp"

namespace scalweight {

// One flattened gradient per task, all in the model's canonical layout.
// Holding all T of them is the defining memory cost of gradient-level
// methods: T * P values against the single accumulator of weighted-loss
// training.
struct GradientSet {
  std::vector<std::vector<double>> grads;

  std::size_t task_count() const { return grads.size(); }
  std::size_t param_count() const { return grads.empty() ? 0 : grads[0].size(); }
};

// Computes the full per-task gradients with one backward pass per task.
// features/labels/losses are indexed by task. Mean-over-batch convention,
// no weighting. Optionally reports the per-task loss values.
GradientSet per_task_gradients(const ModelParams& model,
                               std::span<const Matrix> features,
                               std::span<const Matrix> labels,
                               std::span<const LossKind> losses,
                               std::vector<double>* loss_out = nullptr);

// Gradients conflict when their cosine is negative. A zero vector on either
// side cannot conflict: cosine is reported as 0 and the pair flagged
// degenerate.
struct ConflictStat {
  double cosine = 0.0;
  bool conflicting = false;
  bool degenerate = false;
};
ConflictStat is_conflicting(std::span<const double> gi,
                            std::span<const double> gj);

// Projecting conflict resolution: each task's gradient is projected off the
// normal component of every original gradient it conflicts with, visiting
// the other tasks in a freshly shuffled order, then the surgered gradients
// are summed. Consumes one permutation per task from `rng`.
std::vector<double> pcgrad_combine(const GradientSet& grads, Rng& rng);

// Sign-purity dropout: per coordinate k, with purity
// r_k = sum_t g_tk / sum_t |g_tk|, keep only the positive contributions with
// probability P_k = (1 + r_k) / 2, otherwise only the negative ones.
// Masking happens after batch accumulation on the flattened coordinates.
// Consumes exactly param_count uniforms from `rng` per call.
std::vector<double> graddrop_combine(const GradientSet& grads, Rng& rng);

struct CagradConfig {
  double c = 0.4;
  std::size_t inner_iters = 25;
  double inner_lr = 0.05;
  void validate() const;
};

struct CagradResult {
  std::vector<double> direction;
  bool fallback = false;  // inner solver went non-finite; direction is g0
  // value of the inner objective before iteration 1 and after each
  // accepted iterate; non-increasing by construction
  std::vector<double> objective_trace;
};

// Conflict-averse direction: d = g0 + (sqrt(phi)/|g_w*|) g_w* where g0 is
// the task average, phi = c^2 |g0|^2, and w* minimizes
// g_w . g0 + sqrt(phi) |g_w| over the simplex (projected gradient descent
// with step halving). Guarantees |d - g0| <= c |g0|.
CagradResult cagrad_combine(const GradientSet& grads, const CagradConfig& cfg);

// Euclidean projection onto the probability simplex (sort-based).
std::vector<double> euclidean_simplex_projection(std::span<const double> v);

}  // namespace scalweight

#endif
