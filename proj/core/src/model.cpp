#include "scalweight/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "scalweight/error.hpp"
#include "scalweight/rng.hpp"

namespace scalweight {
namespace {

struct LayerDims {
  std::size_t in, out;
  bool relu;
};

// Layer dimensions in flat-layout order: trunk, shared head, per-task heads.
// Head stacks are head_depth layers of width w ending in a linear projection
// to the task output dim; the leading shared_head_layers of that stack are
// stored once instead of per task.
std::vector<LayerDims> layer_plan(const ModelSpec& spec,
                                  std::size_t* trunk_count,
                                  std::size_t* shared_count) {
  const std::size_t w = spec.hidden_width();
  std::vector<LayerDims> plan;
  plan.push_back({spec.input_dim, w, true});
  for (std::size_t i = 1; i < spec.trunk_depth; ++i) plan.push_back({w, w, true});
  if (trunk_count) *trunk_count = plan.size();

  auto head_layer = [&](std::size_t pos, std::size_t out_dim) -> LayerDims {
    const bool last = pos + 1 == spec.head_depth;
    return {w, last ? out_dim : w, !last};
  };

  for (std::size_t pos = 0; pos < spec.shared_head_layers; ++pos)
    plan.push_back(head_layer(pos, spec.output_dims[0]));
  if (shared_count) *shared_count = spec.shared_head_layers;

  for (std::size_t t = 0; t < spec.task_count(); ++t)
    for (std::size_t pos = spec.shared_head_layers; pos < spec.head_depth; ++pos)
      plan.push_back(head_layer(pos, spec.output_dims[t]));
  return plan;
}

}  // namespace

std::size_t ModelSpec::hidden_width() const {
  const double scaled = static_cast<double>(base_width) * width_multiplier;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(scaled)));
}

void ModelSpec::validate() const {
  if (input_dim == 0) throw ConfigError("model: input_dim must be positive");
  if (trunk_depth == 0) throw ConfigError("model: trunk_depth must be positive");
  if (base_width == 0) throw ConfigError("model: base_width must be positive");
  if (!(width_multiplier > 0.0) || !std::isfinite(width_multiplier))
    throw ConfigError("model: width_multiplier must be positive and finite");
  if (head_depth == 0) throw ConfigError("model: head_depth must be positive");
  if (shared_head_layers > head_depth)
    throw ConfigError("model: shared_head_layers exceeds head_depth");
  if (output_dims.empty()) throw ConfigError("model: no tasks");
  for (auto d : output_dims)
    if (d == 0) throw ConfigError("model: zero-width task output");
  if (shared_head_layers == head_depth) {
    for (auto d : output_dims)
      if (d != output_dims[0])
        throw ConfigError(
            "model: fully shared heads require identical output dims");
  }
}

std::size_t param_count_for(const ModelSpec& spec) {
  spec.validate();
  std::size_t total = 0;
  for (const auto& l : layer_plan(spec, nullptr, nullptr))
    total += l.in * l.out + l.out;
  return total;
}

ModelParams ModelParams::init(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ModelParams m;
  m.spec_ = spec;

  std::size_t trunk_count = 0, shared_count = 0;
  const auto plan = layer_plan(spec, &trunk_count, &shared_count);

  std::size_t off = 0;
  std::vector<LayerRef> refs;
  refs.reserve(plan.size());
  for (const auto& l : plan) {
    LayerRef r{off, off + l.in * l.out, l.in, l.out, l.relu};
    off = r.b_off + l.out;
    refs.push_back(r);
  }
  m.values_.assign(off, 0.0);

  Rng rng(seed);
  for (const auto& r : refs) {
    const double limit = std::sqrt(6.0 / static_cast<double>(r.in));
    for (std::size_t i = 0; i < r.in * r.out; ++i)
      m.values_[r.w_off + i] = rng.uniform(-limit, limit);
    // biases stay zero
  }

  m.trunk_.assign(refs.begin(), refs.begin() + trunk_count);
  m.shared_.assign(refs.begin() + trunk_count,
                   refs.begin() + trunk_count + shared_count);
  const std::size_t per_task = spec.head_depth - spec.shared_head_layers;
  std::size_t cursor = trunk_count + shared_count;
  m.heads_.resize(spec.task_count());
  for (std::size_t t = 0; t < spec.task_count(); ++t) {
    m.heads_[t].assign(refs.begin() + cursor, refs.begin() + cursor + per_task);
    cursor += per_task;
  }
  return m;
}

const std::vector<LayerRef>& ModelParams::head_layers(std::size_t task) const {
  if (task >= heads_.size()) throw ConfigError("model: task id out of range");
  return heads_[task];
}

std::vector<LayerRef> ModelParams::task_path(std::size_t task) const {
  if (task >= heads_.size()) throw ConfigError("model: task id out of range");
  std::vector<LayerRef> path;
  path.reserve(trunk_.size() + shared_.size() + heads_[task].size());
  path.insert(path.end(), trunk_.begin(), trunk_.end());
  path.insert(path.end(), shared_.begin(), shared_.end());
  path.insert(path.end(), heads_[task].begin(), heads_[task].end());
  return path;
}

Matrix forward(const ModelParams& params, const Matrix& inputs,
               std::size_t task, Tape* tape) {
  if (inputs.cols != params.spec().input_dim)
    throw ConfigError("forward: input width does not match model input_dim");
  const auto path = params.task_path(task);
  const auto values = params.values();

  if (tape) {
    tape->task = task;
    tape->input = inputs;
    tape->pre.clear();
    tape->act.clear();
    tape->pre.reserve(path.size());
    tape->act.reserve(path.size());
  }

  Matrix act = inputs;
  for (const auto& l : path) {
    Matrix z(act.rows, l.out);
    const double* w = values.data() + l.w_off;
    const double* b = values.data() + l.b_off;
    for (std::size_t i = 0; i < act.rows; ++i) {
      const double* xi = act.data.data() + i * act.cols;
      double* zi = z.data.data() + i * z.cols;
      for (std::size_t o = 0; o < l.out; ++o) {
        const double* wo = w + o * l.in;
        double acc = b[o];
        for (std::size_t k = 0; k < l.in; ++k) acc += xi[k] * wo[k];
        zi[o] = acc;
      }
    }
    if (tape) tape->pre.push_back(z);
    if (l.relu)
      for (auto& v : z.data) v = v > 0.0 ? v : 0.0;
    if (tape) tape->act.push_back(z);
    act = std::move(z);
  }
  return act;
}

void backward(const ModelParams& params, const Tape& tape,
              const Matrix& out_grad, double scale,
              std::span<double> grad_accum) {
  if (grad_accum.size() != params.param_count())
    throw ConfigError("backward: gradient buffer size mismatch");
  if (scale == 0.0) return;
  const auto path = params.task_path(tape.task);
  if (tape.pre.size() != path.size())
    throw ConfigError("backward: tape does not match model path");
  if (out_grad.rows != tape.input.rows ||
      out_grad.cols != path.back().out)
    throw ConfigError("backward: out_grad shape mismatch");

  // d(loss)/d(current layer activation), scaled once at the output.
  Matrix g(out_grad.rows, out_grad.cols);
  for (std::size_t i = 0; i < g.data.size(); ++i)
    g.data[i] = out_grad.data[i] * scale;

  for (std::size_t li = path.size(); li-- > 0;) {
    const auto& l = path[li];
    const Matrix& pre = tape.pre[li];
    if (l.relu)
      for (std::size_t i = 0; i < g.data.size(); ++i)
        if (pre.data[i] <= 0.0) g.data[i] = 0.0;

    const Matrix& a_prev = li == 0 ? tape.input : tape.act[li - 1];
    double* dw = grad_accum.data() + l.w_off;
    double* db = grad_accum.data() + l.b_off;
    for (std::size_t i = 0; i < g.rows; ++i) {
      const double* gi = g.data.data() + i * g.cols;
      const double* ai = a_prev.data.data() + i * a_prev.cols;
      for (std::size_t o = 0; o < l.out; ++o) {
        const double go = gi[o];
        db[o] += go;
        if (go == 0.0) continue;
        double* dwo = dw + o * l.in;
        for (std::size_t k = 0; k < l.in; ++k) dwo[k] += go * ai[k];
      }
    }

    if (li == 0) break;
    const double* w = params.values().data() + l.w_off;
    Matrix g_prev(g.rows, l.in);
    for (std::size_t i = 0; i < g.rows; ++i) {
      const double* gi = g.data.data() + i * g.cols;
      double* pi = g_prev.data.data() + i * g_prev.cols;
      for (std::size_t o = 0; o < l.out; ++o) {
        const double go = gi[o];
        if (go == 0.0) continue;
        const double* wo = w + o * l.in;
        for (std::size_t k = 0; k < l.in; ++k) pi[k] += go * wo[k];
      }
    }
    g = std::move(g_prev);
  }
}

}  // namespace scalweight
