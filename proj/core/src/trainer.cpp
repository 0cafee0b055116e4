#include "scalweight/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "scalweight/error.hpp"

namespace scalweight {

bool is_gradient_method(Method m) {
  return m == Method::PcGrad || m == Method::GradDrop || m == Method::CaGrad;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Scalarization: return "scalarization";
    case Method::Uncertainty: return "uncertainty";
    case Method::ImtlL: return "imtl_l";
    case Method::PcGrad: return "pcgrad";
    case Method::GradDrop: return "graddrop";
    case Method::CaGrad: return "cagrad";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  if (name == "scalarization") return Method::Scalarization;
  if (name == "uncertainty") return Method::Uncertainty;
  if (name == "imtl_l") return Method::ImtlL;
  if (name == "pcgrad") return Method::PcGrad;
  if (name == "graddrop") return Method::GradDrop;
  if (name == "cagrad") return Method::CaGrad;
  throw ConfigError("unknown method: " + name);
}

std::string to_string(ScalarizationMode mode) {
  return mode == ScalarizationMode::Reweigh ? "reweigh" : "resample";
}

ScalarizationMode mode_from_string(const std::string& name) {
  if (name == "reweigh") return ScalarizationMode::Reweigh;
  if (name == "resample") return ScalarizationMode::Resample;
  throw ConfigError("unknown scalarization mode: " + name);
}

void TrainConfig::validate(std::size_t task_count) const {
  optimizer.validate();
  if (epochs == 0) throw ConfigError("training: epochs must be positive");
  if (epoch.batch_size == 0) throw ConfigError("training: batch_size is zero");
  if (epoch.reference_source >= task_count)
    throw ConfigError("training: reference source out of range");
  if (profile_stride == 0) throw ConfigError("training: profile_stride is zero");
  if (!(s_learning_rate > 0.0))
    throw ConfigError("training: s_learning_rate must be positive");
  cagrad.validate();
  if (optimizer.schedule == LrSchedule::CosineDecay &&
      optimizer.total_epochs < epochs)
    throw ConfigError("training: cosine horizon shorter than the run");
  if (!weights.values().empty() && weights.size() != task_count)
    throw ConfigError("training: weight vector size mismatch");
  if (!schedule.empty()) {
    if (schedule.front().start_epoch != 0.0)
      throw ConfigError("training: schedule must start at epoch 0");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      const auto& seg = schedule[i];
      if (!(seg.end_epoch > seg.start_epoch))
        throw ConfigError("training: empty schedule segment");
      if (seg.weights.size() != task_count)
        throw ConfigError("training: schedule weight size mismatch");
      if (i && schedule[i - 1].end_epoch != seg.start_epoch)
        throw ConfigError("training: schedule has gaps");
    }
    if (schedule.back().end_epoch < static_cast<double>(epochs))
      throw ConfigError("training: schedule ends before the last epoch");
  }
}

namespace {

// Per-row losses; the batch loss is their mean for every kind.
std::vector<double> row_losses(LossKind kind, const Matrix& outputs,
                               const Matrix& labels) {
  std::vector<double> rows(outputs.rows, 0.0);
  switch (kind) {
    case LossKind::SoftmaxCrossEntropy:
      for (std::size_t i = 0; i < outputs.rows; ++i) {
        const auto zi = outputs.row(i);
        double zmax = zi[0];
        for (double z : zi) zmax = std::max(zmax, z);
        double denom = 0.0;
        for (double z : zi) denom += std::exp(z - zmax);
        const auto cls = static_cast<std::size_t>(labels.at(i, 0));
        rows[i] = -(zi[cls] - zmax - std::log(denom));
      }
      break;
    case LossKind::L1:
      for (std::size_t i = 0; i < outputs.rows; ++i)
        for (std::size_t j = 0; j < outputs.cols; ++j)
          rows[i] += std::abs(outputs.at(i, j) - labels.at(i, j));
      break;
    case LossKind::BinaryCrossEntropy:
      for (std::size_t i = 0; i < outputs.rows; ++i)
        for (std::size_t j = 0; j < outputs.cols; ++j) {
          const double z = outputs.at(i, j);
          rows[i] += std::max(z, 0.0) - z * labels.at(i, j) +
                     std::log1p(std::exp(-std::abs(z)));
        }
      break;
  }
  return rows;
}

}  // namespace

Trainer::Trainer(const MultiSourceDataset& train, const MultiSourceDataset* eval,
                 const ModelSpec& spec, const TrainConfig& cfg)
    : train_(&train),
      eval_(eval),
      cfg_(cfg),
      sampler_rng_(Rng::stream(cfg.seed, 200)),
      method_rng_(Rng::stream(cfg.seed, 300)) {
  train.validate();
  spec.validate();
  if (eval) eval->validate();
  const std::size_t t_count = train.task_count();
  cfg.validate(t_count);
  if (spec.task_count() != t_count)
    throw ConfigError("trainer: model heads do not match dataset tasks");
  if (spec.input_dim != train.feature_dim())
    throw ConfigError("trainer: model input_dim does not match dataset");
  for (std::size_t t = 0; t < t_count; ++t)
    if (spec.output_dims[t] != train.tasks[t].output_dim())
      throw ConfigError("trainer: head width does not match task " +
                        train.tasks[t].name);

  model_ = ModelParams::init(spec, cfg.seed);
  optimizer_ = Optimizer(cfg.optimizer, model_.param_count());
  weights_ = cfg.weights.values().empty() ? WeightVector::uniform(t_count)
                                          : cfg.weights;
  for (std::size_t t = 0; t < t_count; ++t)
    source_rngs_.push_back(Rng::stream(cfg.seed, 100 + t));

  if (cfg.method == Method::Uncertainty)
    adaptive_ = AdaptiveLossState::make(AdaptiveMethod::Uncertainty, t_count,
                                        cfg.s_learning_rate);
  else if (cfg.method == Method::ImtlL)
    adaptive_ = AdaptiveLossState::make(AdaptiveMethod::ImtlL, t_count,
                                        cfg.s_learning_rate);

  if (cfg.profile_conflicts) profiler_.emplace(t_count);

  fully_shared_ = spec.shared_head_layers == spec.head_depth;
  for (const auto& task : train.tasks)
    if (task.kind != train.tasks[0].kind ||
        task.label_cols() != train.tasks[0].label_cols())
      fully_shared_ = false;

  steps_per_epoch_ = scalweight::steps_per_epoch(train, cfg.epoch);
  loss_sums_.assign(t_count, 0.0);
  loss_counts_.assign(t_count, 0);
  weight_sums_.assign(t_count, 0.0);
  grad_.assign(model_.param_count(), 0.0);
}

void Trainer::restrict_to_source(std::size_t source) {
  if (global_step_ != 0)
    throw ConfigError("trainer: cannot restrict after training started");
  if (source >= train_->task_count())
    throw ConfigError("trainer: source out of range");
  if (cfg_.method != Method::Scalarization)
    throw ConfigError("trainer: single-source training uses the plain loss");
  profiler_.reset();
  single_source_ = source;
}

void Trainer::set_weights(WeightVector w) {
  if (w.size() != train_->task_count())
    throw ConfigError("trainer: weight size mismatch");
  weights_ = std::move(w);
}

std::vector<double> Trainer::adaptive_s() const { return adaptive_.s; }

void Trainer::set_adaptive_s(const std::vector<double>& s) {
  if (s.size() != adaptive_.s.size())
    throw ConfigError("trainer: adaptive state size mismatch");
  adaptive_.s = s;
}

std::vector<std::string> Trainer::serialize_rngs() const {
  std::vector<std::string> out;
  for (const auto& r : source_rngs_) out.push_back(r.serialize());
  out.push_back(sampler_rng_.serialize());
  out.push_back(method_rng_.serialize());
  return out;
}

void Trainer::restore_rngs(const std::vector<std::string>& states) {
  if (states.size() != source_rngs_.size() + 2)
    throw ConfigError("trainer: rng state count mismatch");
  for (std::size_t t = 0; t < source_rngs_.size(); ++t)
    source_rngs_[t] = Rng::deserialize(states[t]);
  sampler_rng_ = Rng::deserialize(states[source_rngs_.size()]);
  method_rng_ = Rng::deserialize(states[source_rngs_.size() + 1]);
}

void Trainer::set_epochs_done(std::size_t epochs) {
  epochs_done_ = epochs;
  global_step_ = epochs * steps_per_epoch_;
  optimizer_.set_step_index(global_step_);
}

const WeightVector& Trainer::weights_for_epoch(std::size_t epoch) const {
  if (cfg_.schedule.empty()) return weights_;
  const double e = static_cast<double>(epoch);
  for (const auto& seg : cfg_.schedule)
    if (e >= seg.start_epoch && e < seg.end_epoch) return seg.weights;
  return cfg_.schedule.back().weights;
}

void Trainer::step(const WeightVector& p) {
  std::fill(grad_.begin(), grad_.end(), 0.0);
  const std::size_t batch = cfg_.epoch.batch_size;
  const std::size_t t_count = train_->task_count();
  const bool profile_due =
      profiler_ && (global_step_ % cfg_.profile_stride == 0);
  if (profile_due)
    task_grads_.grads.assign(t_count,
                             std::vector<double>(model_.param_count(), 0.0));

  if (single_source_) {
    const std::size_t t = *single_source_;
    const auto idx = uniform_source_batch(*train_, t, batch, source_rngs_[t]);
    const auto slice = gather_source(*train_, idx, t);
    Tape tape;
    const Matrix out = forward(model_, slice.features, t, &tape);
    const LossGrad lg = loss_and_grad(train_->tasks[t].loss(), out, slice.labels);
    backward(model_, tape, lg.grad, 1.0, grad_);
    loss_sums_[t] += lg.loss;
    ++loss_counts_[t];
  } else if (cfg_.method == Method::Scalarization &&
             cfg_.mode == ScalarizationMode::Resample) {
    MixedBatch mixed;
    mixed.sources.reserve(batch);
    mixed.indices.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      const std::size_t t = sampler_rng_.categorical(p.values());
      mixed.sources.push_back(t);
      mixed.indices.push_back(sampler_rng_.uniform_index(train_->size(t)));
    }
    if (fully_shared_) {
      const auto slice = gather_all(*train_, mixed);
      Tape tape;
      const Matrix out = forward(model_, slice.features, 0, &tape);
      const LossKind kind = train_->tasks[0].loss();
      const LossGrad lg = loss_and_grad(kind, out, slice.labels);
      backward(model_, tape, lg.grad, 1.0, grad_);
      const auto rows = row_losses(kind, out, slice.labels);
      std::vector<double> sums(t_count, 0.0);
      std::vector<std::size_t> counts(t_count, 0);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        sums[mixed.sources[i]] += rows[i];
        ++counts[mixed.sources[i]];
      }
      for (std::size_t t = 0; t < t_count; ++t)
        if (counts[t]) {
          loss_sums_[t] += sums[t] / static_cast<double>(counts[t]);
          ++loss_counts_[t];
        }
    }
    if (!fully_shared_ || profile_due) {
      for (std::size_t t = 0; t < t_count; ++t) {
        const auto slice = gather_source(*train_, mixed, t);
        if (slice.count == 0) continue;  // zero gradient, degenerate pair
        Tape tape;
        const Matrix out = forward(model_, slice.features, t, &tape);
        const LossGrad lg =
            loss_and_grad(train_->tasks[t].loss(), out, slice.labels);
        if (!fully_shared_) {
          const double share = static_cast<double>(slice.count) /
                               static_cast<double>(batch);
          backward(model_, tape, lg.grad, share, grad_);
          loss_sums_[t] += lg.loss;
          ++loss_counts_[t];
        }
        if (profile_due)
          backward(model_, tape, lg.grad, 1.0, task_grads_.grads[t]);
      }
    }
  } else if (!is_gradient_method(cfg_.method)) {
    // weighted per-task sub-batches: fixed p or the adaptive loss weights
    const bool adaptive = cfg_.method != Method::Scalarization;
    std::vector<Tape> tapes(t_count);
    std::vector<LossGrad> lgs(t_count);
    std::vector<double> losses(t_count, 0.0);
    for (std::size_t t = 0; t < t_count; ++t) {
      const auto idx = uniform_source_batch(*train_, t, batch, source_rngs_[t]);
      const auto slice = gather_source(*train_, idx, t);
      const Matrix out = forward(model_, slice.features, t, &tapes[t]);
      lgs[t] = loss_and_grad(train_->tasks[t].loss(), out, slice.labels);
      losses[t] = lgs[t].loss;
      loss_sums_[t] += losses[t];
      ++loss_counts_[t];
    }
    std::vector<double> w(t_count, 0.0);
    if (adaptive) {
      adaptive_.total(losses);  // NaN guard
      for (std::size_t t = 0; t < t_count; ++t) w[t] = adaptive_.task_weight(t);
    } else {
      scalarized_loss(losses, p);  // NaN guard
      for (std::size_t t = 0; t < t_count; ++t) w[t] = p[t];
    }
    for (std::size_t t = 0; t < t_count; ++t)
      backward(model_, tapes[t], lgs[t].grad, w[t], grad_);
    if (profile_due)
      for (std::size_t t = 0; t < t_count; ++t)
        backward(model_, tapes[t], lgs[t].grad, 1.0, task_grads_.grads[t]);
    if (adaptive) {
      adaptive_.update(losses);
      for (std::size_t t = 0; t < t_count; ++t) weight_sums_[t] += w[t];
      step_weights_.push_back(w);
    }
  } else {
    // gradient-level methods: one full batch and gradient per task
    std::vector<Matrix> feats(t_count), labs(t_count);
    std::vector<LossKind> kinds(t_count);
    for (std::size_t t = 0; t < t_count; ++t) {
      const auto idx = uniform_source_batch(*train_, t, batch, source_rngs_[t]);
      const auto slice = gather_source(*train_, idx, t);
      feats[t] = slice.features;
      labs[t] = slice.labels;
      kinds[t] = train_->tasks[t].loss();
    }
    std::vector<double> losses;
    task_grads_ = per_task_gradients(model_, feats, labs, kinds, &losses);
    for (std::size_t t = 0; t < t_count; ++t) {
      loss_sums_[t] += losses[t];
      ++loss_counts_[t];
    }
    if (profile_due) profiler_->record_step(task_grads_);
    switch (cfg_.method) {
      case Method::PcGrad:
        grad_ = pcgrad_combine(task_grads_, method_rng_);
        break;
      case Method::GradDrop:
        grad_ = graddrop_combine(task_grads_, method_rng_);
        break;
      case Method::CaGrad: {
        auto res = cagrad_combine(task_grads_, cfg_.cagrad);
        cagrad_fallback_seen_ |= res.fallback;
        grad_ = std::move(res.direction);
        break;
      }
      default:
        throw ConfigError("trainer: unhandled method");
    }
  }

  if (profile_due && !is_gradient_method(cfg_.method) && !single_source_)
    profiler_->record_step(task_grads_);
  optimizer_.step(model_.values(), grad_, steps_per_epoch_);
  ++global_step_;
}

void Trainer::run_epoch() {
  std::fill(loss_sums_.begin(), loss_sums_.end(), 0.0);
  std::fill(loss_counts_.begin(), loss_counts_.end(), 0);
  std::fill(weight_sums_.begin(), weight_sums_.end(), 0.0);
  const WeightVector& p = weights_for_epoch(epochs_done_);

  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t s = 0; s < steps_per_epoch_; ++s) step(p);
  const auto t1 = std::chrono::steady_clock::now();
  step_seconds_ += std::chrono::duration<double>(t1 - t0).count();
  timed_steps_ += steps_per_epoch_;

  EpochRecord rec;
  rec.epoch = epochs_done_;
  const std::size_t t_count = train_->task_count();
  rec.tasks.resize(t_count);
  const auto train_metrics = eval_metrics(*train_);
  std::vector<double> evals;
  if (eval_) evals = eval_metrics(*eval_);
  for (std::size_t t = 0; t < t_count; ++t) {
    auto& tm = rec.tasks[t];
    tm.train_loss = loss_counts_[t]
                        ? loss_sums_[t] / static_cast<double>(loss_counts_[t])
                        : std::nan("");
    tm.train_metric = train_metrics[t];
    if (eval_) {
      tm.eval_metric = evals[t];
      tm.has_eval = true;
    }
  }
  if (cfg_.method == Method::Uncertainty || cfg_.method == Method::ImtlL) {
    rec.dynamic_weights.resize(t_count);
    for (std::size_t t = 0; t < t_count; ++t)
      rec.dynamic_weights[t] =
          weight_sums_[t] / static_cast<double>(steps_per_epoch_);
  }
  if (eval_) {
    double acc = 0.0;
    for (std::size_t t = 0; t < t_count; ++t)
      acc += oriented(train_->tasks[t].metric(), evals[t]);
    rec.mean_eval_oriented = acc / static_cast<double>(t_count);
  } else {
    rec.mean_eval_oriented = std::nan("");
  }
  records_.push_back(std::move(rec));
  if (profiler_) profiler_->finish_epoch(epochs_done_);
  ++epochs_done_;
}

void Trainer::run_epochs(std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) run_epoch();
}

std::vector<double> Trainer::eval_metrics(const MultiSourceDataset& ds) const {
  return evaluate_task_metrics(model_, ds);
}

std::vector<double> Trainer::eval_losses(const MultiSourceDataset& ds) const {
  return evaluate_task_losses(model_, ds);
}

double Trainer::mean_oriented_metric(const MultiSourceDataset& ds) const {
  return scalweight::mean_oriented_metric(model_, ds);
}

RunResult Trainer::take_result() {
  RunResult res;
  res.model = model_;
  res.epochs = records_;
  if (profiler_) res.conflicts = profiler_->records();
  res.step_weights = step_weights_;
  const std::size_t t_count = train_->task_count();
  res.cost.gradient_values_stored =
      (is_gradient_method(cfg_.method) ? t_count : 1) * model_.param_count();
  res.cost.backward_passes_per_step =
      is_gradient_method(cfg_.method) ? t_count : 1;
  res.cost.seconds_per_step =
      timed_steps_ ? step_seconds_ / static_cast<double>(timed_steps_) : 0.0;
  res.cost.steps = global_step_;
  res.cagrad_fallback_seen = cagrad_fallback_seen_;
  return res;
}

RunResult train_run(const MultiSourceDataset& train,
                    const MultiSourceDataset* eval, const ModelSpec& spec,
                    const TrainConfig& cfg) {
  Trainer tr(train, eval, spec, cfg);
  tr.run_epochs(cfg.epochs);
  return tr.take_result();
}

RunResult train_single_source(const MultiSourceDataset& train,
                              const MultiSourceDataset* eval,
                              const ModelSpec& spec, const TrainConfig& cfg,
                              std::size_t source) {
  Trainer tr(train, eval, spec, cfg);
  tr.restrict_to_source(source);
  tr.run_epochs(cfg.epochs);
  return tr.take_result();
}

std::vector<double> evaluate_task_metrics(const ModelParams& model,
                                          const MultiSourceDataset& ds) {
  std::vector<double> out(ds.task_count(), 0.0);
  for (std::size_t t = 0; t < ds.task_count(); ++t) {
    const Matrix pred = forward(model, ds.features[t], t);
    out[t] = evaluate_metric(ds.tasks[t].metric(), pred, ds.labels[t]);
  }
  return out;
}

std::vector<double> evaluate_task_losses(const ModelParams& model,
                                         const MultiSourceDataset& ds) {
  std::vector<double> out(ds.task_count(), 0.0);
  for (std::size_t t = 0; t < ds.task_count(); ++t) {
    const Matrix pred = forward(model, ds.features[t], t);
    out[t] = loss_value(ds.tasks[t].loss(), pred, ds.labels[t]);
  }
  return out;
}

double mean_oriented_metric(const ModelParams& model,
                            const MultiSourceDataset& ds) {
  const auto metrics = evaluate_task_metrics(model, ds);
  double acc = 0.0;
  for (std::size_t t = 0; t < ds.task_count(); ++t)
    acc += oriented(ds.tasks[t].metric(), metrics[t]);
  return acc / static_cast<double>(ds.task_count());
}

ModelSpec spec_for_dataset(const MultiSourceDataset& ds, ModelSpec base) {
  base.input_dim = ds.feature_dim();
  base.output_dims = output_dims_for(ds);
  return base;
}

}  // namespace scalweight
