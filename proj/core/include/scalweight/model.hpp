#ifndef SCALWEIGHT_MODEL_HPP
#define SCALWEIGHT_MODEL_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "scalweight/matrix.hpp"

namespace scalweight {

// MLP trunk shared by all tasks, an optional stack of head layers shared by
// all tasks, then one private head stack per task. ReLU after every layer
// except the last layer of each head.
struct ModelSpec {
  std::size_t input_dim = 0;
  std::size_t trunk_depth = 1;   // hidden layers in the trunk
  std::size_t base_width = 32;
  double width_multiplier = 1.0;
  std::size_t head_depth = 1;    // layers per head, output layer included
  std::size_t shared_head_layers = 0;  // leading head layers shared by tasks
  std::vector<std::size_t> output_dims;  // one entry per task

  std::size_t hidden_width() const;
  std::size_t task_count() const { return output_dims.size(); }
  void validate() const;  // throws ConfigError

  bool operator==(const ModelSpec&) const = default;
};

// Parameters for (trunk_depth, width_multiplier, shared_head_layers,
// output_dims); closed form, no allocation.
std::size_t param_count_for(const ModelSpec& spec);

// One dense layer viewed into the flat parameter vector.
struct LayerRef {
  std::size_t w_off = 0;  // weight block, row-major (out x in)
  std::size_t b_off = 0;  // bias block, length out
  std::size_t in = 0;
  std::size_t out = 0;
  bool relu = false;

  bool operator==(const LayerRef&) const = default;
};

// Model parameters in one contiguous vector. The flat layout is a public
// contract shared with optimizers, gradient surgery, and checkpoints:
// trunk layers first, then shared head layers, then each task's private head
// layers in task order; within a layer the weight matrix (row-major) comes
// before the bias vector.
class ModelParams {
 public:
  ModelParams() = default;

  // He-style fan-in uniform weights, zero biases, drawn deterministically
  // from `seed` in flat-layout order.
  static ModelParams init(const ModelSpec& spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  std::size_t task_count() const { return spec_.task_count(); }
  std::size_t param_count() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  const std::vector<LayerRef>& trunk_layers() const { return trunk_; }
  const std::vector<LayerRef>& shared_layers() const { return shared_; }
  const std::vector<LayerRef>& head_layers(std::size_t task) const;

  // trunk + shared + head(task), in forward order
  std::vector<LayerRef> task_path(std::size_t task) const;

  bool operator==(const ModelParams&) const = default;

 private:
  ModelSpec spec_;
  std::vector<LayerRef> trunk_;
  std::vector<LayerRef> shared_;
  std::vector<std::vector<LayerRef>> heads_;
  std::vector<double> values_;
};

// Activations recorded by a forward pass, consumed by backward().
struct Tape {
  std::size_t task = 0;
  Matrix input;
  std::vector<Matrix> pre;  // pre-activations per path layer
  std::vector<Matrix> act;  // post-activations per path layer
};

// Runs inputs through the path of `task`. When `tape` is non-null the
// intermediate activations are recorded for a later backward pass.
Matrix forward(const ModelParams& params, const Matrix& inputs,
               std::size_t task, Tape* tape = nullptr);

// Accumulates scale * d(loss)/d(params) into grad_accum (size param_count),
// where out_grad is d(loss)/d(outputs) for the pass recorded on `tape`.
// Parameters off the task's path are left untouched. scale == 0 is a no-op.
void backward(const ModelParams& params, const Tape& tape,
              const Matrix& out_grad, double scale,
              std::span<double> grad_accum);

}  // namespace scalweight

#endif
