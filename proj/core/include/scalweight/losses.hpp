#ifndef SCALWEIGHT_LOSSES_HPP
#define SCALWEIGHT_LOSSES_HPP

#include <string>

#include "scalweight/matrix.hpp"

namespace scalweight {

enum class LossKind {
  SoftmaxCrossEntropy,  // labels: one column of class ids
  L1,                   // labels: real matrix matching the output shape
  BinaryCrossEntropy,   // labels: {0,1} matrix, one logit per attribute
};

enum class MetricKind {
  Top1Accuracy,
  L1Error,
  BinaryAccuracy,
};

struct LossGrad {
  double loss = 0.0;  // mean over the batch
  Matrix grad;        // d(mean loss)/d(outputs), same shape as outputs
};

// Loss value plus gradient w.r.t. the raw head outputs (logits for the
// classification losses). Batch-mean convention throughout.
LossGrad loss_and_grad(LossKind kind, const Matrix& outputs,
                       const Matrix& labels);

double loss_value(LossKind kind, const Matrix& outputs, const Matrix& labels);

double evaluate_metric(MetricKind kind, const Matrix& outputs,
                       const Matrix& labels);

// Metric orientation registry. oriented() maps every metric onto a
// higher-is-better scale so selection and ranking never compare raw values
// of opposite sense.
bool higher_is_better(MetricKind kind);
double oriented(MetricKind kind, double value);

MetricKind default_metric(LossKind kind);

std::string to_string(LossKind kind);
std::string to_string(MetricKind kind);
LossKind loss_kind_from_string(const std::string& name);

}  // namespace scalweight

#endif
