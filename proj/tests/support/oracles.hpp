// Independent oracles the tests check library output against. Everything in
// here recomputes values through a different arithmetic path than the library
// (straight-line loops, central differences, closed forms) so agreement is
// evidence, not tautology.
#ifndef SCALWEIGHT_TEST_ORACLES_HPP
#define SCALWEIGHT_TEST_ORACLES_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "scalweight/losses.hpp"
#include "scalweight/matrix.hpp"
#include "scalweight/model.hpp"

namespace scalweight::testing {

// Plain scalar-loop forward pass over the task path; no Matrix helpers.
Matrix reference_forward(const ModelParams& model, const Matrix& inputs,
                         std::size_t task);

struct GradCheck {
  std::size_t checked = 0;
  std::size_t skipped = 0;   // numerically unstable coordinates (kinks)
  std::size_t failed = 0;
  double max_rel = 0.0;
};

// Central finite differences against the analytic gradient of the batch-mean
// loss, coordinate by coordinate. Coordinates whose h vs h/2 estimates
// disagree sit on a ReLU or L1 kink and are skipped; the caller bounds the
// skip fraction.
GradCheck check_gradient(ModelParams& model, const Matrix& inputs,
                         const Matrix& labels, LossKind kind, std::size_t task,
                         double h, double tol);

// One AdamW step from zero moments, decoupled decay, in closed form.
double adamw_first_step(double param, double grad, double lr, double beta1,
                        double beta2, double epsilon, double weight_decay);

// Euclidean simplex projection by bisection on the shift, independent of the
// sort-based routine in the library.
std::vector<double> simplex_projection_bisect(std::span<const double> v);

double mean_of(std::span<const double> xs);
double population_std(std::span<const double> xs);

// Runs fn(0..count-1) on `jobs` threads; rethrows the first worker error.
void parallel_map(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn);

}  // namespace scalweight::testing

#endif
