#include "scalweight/losses.hpp"

#include <algorithm>
#include <cmath>

#include "scalweight/error.hpp"

namespace scalweight {
namespace {

void check_shapes(LossKind kind, const Matrix& outputs, const Matrix& labels) {
  if (outputs.rows == 0) throw ConfigError("loss: empty batch");
  if (outputs.rows != labels.rows)
    throw ConfigError("loss: outputs and labels disagree on batch size");
  switch (kind) {
    case LossKind::SoftmaxCrossEntropy:
      if (labels.cols != 1)
        throw ConfigError("cross-entropy labels must be a single id column");
      break;
    case LossKind::L1:
    case LossKind::BinaryCrossEntropy:
      if (labels.cols != outputs.cols)
        throw ConfigError("loss: labels and outputs disagree on width");
      break;
  }
}

LossGrad softmax_ce(const Matrix& logits, const Matrix& labels, bool want_grad) {
  const std::size_t n = logits.rows, k = logits.cols;
  LossGrad out;
  if (want_grad) out.grad = Matrix(n, k);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  std::vector<double> p(k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto zi = logits.row(i);
    const double id = labels.at(i, 0);
    const auto cls = static_cast<std::size_t>(id);
    if (id < 0 || id != std::floor(id) || cls >= k)
      throw ConfigError("cross-entropy: class id out of range");
    double zmax = zi[0];
    for (double z : zi) zmax = std::max(zmax, z);
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      p[j] = std::exp(zi[j] - zmax);
      denom += p[j];
    }
    for (std::size_t j = 0; j < k; ++j) p[j] /= denom;
    total += -(zi[cls] - zmax - std::log(denom));
    if (want_grad) {
      auto gi = out.grad.row(i);
      for (std::size_t j = 0; j < k; ++j) gi[j] = p[j] * inv_n;
      gi[cls] -= inv_n;
    }
  }
  out.loss = total * inv_n;
  return out;
}

LossGrad l1(const Matrix& outputs, const Matrix& labels, bool want_grad) {
  const std::size_t n = outputs.rows, k = outputs.cols;
  LossGrad out;
  if (want_grad) out.grad = Matrix(n, k);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double d = outputs.at(i, j) - labels.at(i, j);
      total += std::abs(d);
      if (want_grad)
        out.grad.at(i, j) = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv_n;
    }
  }
  out.loss = total * inv_n;
  return out;
}

LossGrad bce(const Matrix& logits, const Matrix& labels, bool want_grad) {
  const std::size_t n = logits.rows, k = logits.cols;
  LossGrad out;
  if (want_grad) out.grad = Matrix(n, k);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double z = logits.at(i, j);
      const double y = labels.at(i, j);
      if (y != 0.0 && y != 1.0)
        throw ConfigError("binary cross-entropy: labels must be 0 or 1");
      // max(z,0) - z*y + log(1 + exp(-|z|)), stable for large |z|.
      total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
      if (want_grad) {
        const double sig = 1.0 / (1.0 + std::exp(-z));
        out.grad.at(i, j) = (sig - y) * inv_n;
      }
    }
  }
  out.loss = total * inv_n;
  return out;
}

}  // namespace

LossGrad loss_and_grad(LossKind kind, const Matrix& outputs,
                       const Matrix& labels) {
  check_shapes(kind, outputs, labels);
  switch (kind) {
    case LossKind::SoftmaxCrossEntropy: return softmax_ce(outputs, labels, true);
    case LossKind::L1: return l1(outputs, labels, true);
    case LossKind::BinaryCrossEntropy: return bce(outputs, labels, true);
  }
  throw ConfigError("loss: unknown kind");
}

double loss_value(LossKind kind, const Matrix& outputs, const Matrix& labels) {
  check_shapes(kind, outputs, labels);
  switch (kind) {
    case LossKind::SoftmaxCrossEntropy:
      return softmax_ce(outputs, labels, false).loss;
    case LossKind::L1: return l1(outputs, labels, false).loss;
    case LossKind::BinaryCrossEntropy: return bce(outputs, labels, false).loss;
  }
  throw ConfigError("loss: unknown kind");
}

double evaluate_metric(MetricKind kind, const Matrix& outputs,
                       const Matrix& labels) {
  if (outputs.rows == 0) throw ConfigError("metric: empty batch");
  if (outputs.rows != labels.rows)
    throw ConfigError("metric: outputs and labels disagree on batch size");
  const std::size_t n = outputs.rows;
  switch (kind) {
    case MetricKind::Top1Accuracy: {
      std::size_t hits = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto zi = outputs.row(i);
        std::size_t arg = 0;
        for (std::size_t j = 1; j < outputs.cols; ++j)
          if (zi[j] > zi[arg]) arg = j;
        if (arg == static_cast<std::size_t>(labels.at(i, 0))) ++hits;
      }
      return static_cast<double>(hits) / static_cast<double>(n);
    }
    case MetricKind::L1Error:
      return l1(outputs, labels, false).loss;
    case MetricKind::BinaryAccuracy: {
      std::size_t hits = 0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < outputs.cols; ++j)
          if ((outputs.at(i, j) > 0.0) == (labels.at(i, j) > 0.5)) ++hits;
      return static_cast<double>(hits) /
             static_cast<double>(n * outputs.cols);
    }
  }
  throw ConfigError("metric: unknown kind");
}

bool higher_is_better(MetricKind kind) {
  return kind != MetricKind::L1Error;
}

double oriented(MetricKind kind, double value) {
  return higher_is_better(kind) ? value : -value;
}

MetricKind default_metric(LossKind kind) {
  switch (kind) {
    case LossKind::SoftmaxCrossEntropy: return MetricKind::Top1Accuracy;
    case LossKind::L1: return MetricKind::L1Error;
    case LossKind::BinaryCrossEntropy: return MetricKind::BinaryAccuracy;
  }
  throw ConfigError("metric: unknown loss kind");
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::SoftmaxCrossEntropy: return "softmax_ce";
    case LossKind::L1: return "l1";
    case LossKind::BinaryCrossEntropy: return "bce";
  }
  return "?";
}

std::string to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::Top1Accuracy: return "top1_accuracy";
    case MetricKind::L1Error: return "l1_error";
    case MetricKind::BinaryAccuracy: return "binary_accuracy";
  }
  return "?";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "softmax_ce") return LossKind::SoftmaxCrossEntropy;
  if (name == "l1") return LossKind::L1;
  if (name == "bce") return LossKind::BinaryCrossEntropy;
  throw ConfigError("unknown loss kind: " + name);
}

}  // namespace scalweight
