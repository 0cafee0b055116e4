#include "scalweight/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "scalweight/error.hpp"

namespace scalweight {

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::json jnum(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json();
}

double num_from(const nlohmann::json& j) {
  return j.is_null() ? std::nan("") : j.get<double>();
}

nlohmann::json model_json(const ModelSpec& spec) {
  return {
      {"base_width", spec.base_width},
      {"head_depth", spec.head_depth},
      {"input_dim", spec.input_dim},
      {"output_dims", spec.output_dims},
      {"shared_head_layers", spec.shared_head_layers},
      {"trunk_depth", spec.trunk_depth},
      {"width_multiplier", spec.width_multiplier},
  };
}

ModelSpec model_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  spec.base_width = j.at("base_width").get<std::size_t>();
  spec.head_depth = j.at("head_depth").get<std::size_t>();
  spec.input_dim = j.at("input_dim").get<std::size_t>();
  spec.output_dims = j.at("output_dims").get<std::vector<std::size_t>>();
  spec.shared_head_layers = j.at("shared_head_layers").get<std::size_t>();
  spec.trunk_depth = j.at("trunk_depth").get<std::size_t>();
  spec.width_multiplier = j.at("width_multiplier").get<double>();
  return spec;
}

nlohmann::json optimizer_json(const OptimizerConfig& cfg) {
  return {
      {"beta1", cfg.beta1},
      {"beta2", cfg.beta2},
      {"epsilon", cfg.epsilon},
      {"kind", to_string(cfg.kind)},
      {"learning_rate", cfg.learning_rate},
      {"momentum", cfg.momentum},
      {"schedule", to_string(cfg.schedule)},
      {"total_epochs", cfg.total_epochs},
      {"warmup_epochs", cfg.warmup_epochs},
      {"weight_decay", cfg.weight_decay},
  };
}

OptimizerConfig optimizer_from_json(const nlohmann::json& j) {
  OptimizerConfig cfg;
  cfg.beta1 = j.at("beta1").get<double>();
  cfg.beta2 = j.at("beta2").get<double>();
  cfg.epsilon = j.at("epsilon").get<double>();
  cfg.kind = optimizer_kind_from_string(j.at("kind").get<std::string>());
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.momentum = j.at("momentum").get<double>();
  cfg.schedule = lr_schedule_from_string(j.at("schedule").get<std::string>());
  cfg.total_epochs = j.at("total_epochs").get<std::size_t>();
  cfg.warmup_epochs = j.at("warmup_epochs").get<std::size_t>();
  cfg.weight_decay = j.at("weight_decay").get<double>();
  return cfg;
}

// Runs a worker pool over `count` independent jobs. Worker exceptions are
// collected and the first one rethrown after the joins.
void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  const std::size_t n_threads = std::min(std::max<std::size_t>(jobs, 1), count);
  if (n_threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(std::span<const double> xs) {
  MeanStd out;
  if (xs.empty()) {
    out.mean = std::nan("");
    out.std = std::nan("");
    return out;
  }
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(var / static_cast<double>(xs.size()));
  return out;
}

}  // namespace

std::string manifest_json(const RunManifest& m) {
  nlohmann::json j;
  j["batch_size"] = m.batch_size;
  j["cost"] = {
      {"backward_passes_per_step", m.cost.backward_passes_per_step},
      {"gradient_values_stored", m.cost.gradient_values_stored},
      {"seconds_per_step", jnum(m.cost.seconds_per_step)},
      {"steps", m.cost.steps},
  };
  j["dataset"] = m.dataset;
  j["dataset_seed"] = m.dataset_seed;
  j["epochs"] = m.epochs;
  j["method"] = to_string(m.method);
  j["metric_names"] = m.metric_names;
  j["mode"] = to_string(m.mode);
  j["model"] = model_json(m.model);
  j["optimizer"] = optimizer_json(m.optimizer);
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : m.records) {
    nlohmann::json jr;
    jr["epoch"] = r.epoch;
    if (!r.dynamic_weights.empty()) jr["dynamic_weights"] = r.dynamic_weights;
    jr["mean_eval_oriented"] = jnum(r.mean_eval_oriented);
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& t : r.tasks) {
      nlohmann::json jt;
      jt["train_loss"] = jnum(t.train_loss);
      jt["train_metric"] = jnum(t.train_metric);
      if (t.has_eval) jt["eval_metric"] = jnum(t.eval_metric);
      tasks.push_back(std::move(jt));
    }
    jr["tasks"] = std::move(tasks);
    recs.push_back(std::move(jr));
  }
  j["records"] = std::move(recs);
  j["run_id"] = m.run_id;
  if (!m.schedule.empty()) {
    nlohmann::json sched = nlohmann::json::array();
    for (const auto& seg : m.schedule)
      sched.push_back({{"end_epoch", seg.end_epoch},
                       {"start_epoch", seg.start_epoch},
                       {"weights", seg.weights.values()}});
    j["schedule"] = std::move(sched);
  }
  j["seed"] = m.seed;
  j["task_names"] = m.task_names;
  j["wall_clock_seconds"] = jnum(m.wall_clock_seconds);
  if (!m.weights.empty()) j["weights"] = m.weights;
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    RunManifest m;
    m.batch_size = j.at("batch_size").get<std::size_t>();
    const auto& jc = j.at("cost");
    m.cost.backward_passes_per_step =
        jc.at("backward_passes_per_step").get<std::size_t>();
    m.cost.gradient_values_stored =
        jc.at("gradient_values_stored").get<std::size_t>();
    m.cost.seconds_per_step = num_from(jc.at("seconds_per_step"));
    m.cost.steps = jc.at("steps").get<std::size_t>();
    m.dataset = j.at("dataset").get<std::string>();
    m.dataset_seed = j.at("dataset_seed").get<std::uint64_t>();
    m.epochs = j.at("epochs").get<std::size_t>();
    m.method = method_from_string(j.at("method").get<std::string>());
    m.metric_names = j.at("metric_names").get<std::vector<std::string>>();
    m.mode = mode_from_string(j.at("mode").get<std::string>());
    m.model = model_from_json(j.at("model"));
    m.optimizer = optimizer_from_json(j.at("optimizer"));
    for (const auto& jr : j.at("records")) {
      EpochRecord r;
      r.epoch = jr.at("epoch").get<std::size_t>();
      if (jr.contains("dynamic_weights"))
        r.dynamic_weights = jr.at("dynamic_weights").get<std::vector<double>>();
      r.mean_eval_oriented = num_from(jr.at("mean_eval_oriented"));
      for (const auto& jt : jr.at("tasks")) {
        TaskEpochMetrics t;
        t.train_loss = num_from(jt.at("train_loss"));
        t.train_metric = num_from(jt.at("train_metric"));
        if (jt.contains("eval_metric")) {
          t.eval_metric = num_from(jt.at("eval_metric"));
          t.has_eval = true;
        }
        r.tasks.push_back(t);
      }
      m.records.push_back(std::move(r));
    }
    m.run_id = j.at("run_id").get<std::string>();
    if (j.contains("schedule"))
      for (const auto& js : j.at("schedule")) {
        WeightSegment seg;
        seg.end_epoch = js.at("end_epoch").get<double>();
        seg.start_epoch = js.at("start_epoch").get<double>();
        seg.weights = WeightVector(js.at("weights").get<std::vector<double>>());
        m.schedule.push_back(std::move(seg));
      }
    m.seed = j.at("seed").get<std::uint64_t>();
    m.task_names = j.at("task_names").get<std::vector<std::string>>();
    m.wall_clock_seconds = num_from(j.at("wall_clock_seconds"));
    if (j.contains("weights"))
      m.weights = j.at("weights").get<std::vector<double>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("manifest: ") + e.what());
  }
}

std::string manifest_metrics_csv(const RunManifest& m) {
  std::string out = "run_id,epoch,task,split,metric_name,value\n";
  auto row = [&](std::size_t epoch, const std::string& task,
                 const char* split, const std::string& name, double value) {
    out += m.run_id;
    out += ',';
    out += std::to_string(epoch);
    out += ',';
    out += task;
    out += ',';
    out += split;
    out += ',';
    out += name;
    out += ',';
    out += g17(value);
    out += '\n';
  };
  for (const auto& r : m.records)
    for (std::size_t t = 0; t < r.tasks.size(); ++t) {
      const std::string& task = m.task_names[t];
      row(r.epoch, task, "train", "loss", r.tasks[t].train_loss);
      row(r.epoch, task, "train", m.metric_names[t], r.tasks[t].train_metric);
      if (r.tasks[t].has_eval)
        row(r.epoch, task, "test", m.metric_names[t], r.tasks[t].eval_metric);
      if (!r.dynamic_weights.empty())
        row(r.epoch, task, "train", "weight", r.dynamic_weights[t]);
    }
  return out;
}

std::vector<WeightVector> weight_grid(std::size_t tasks, std::size_t points) {
  if (tasks != 2)
    throw ConfigError("weight_grid: evenly spaced grids are two-task only");
  if (points < 2) throw ConfigError("weight_grid: need at least two points");
  std::vector<WeightVector> out;
  out.reserve(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double p1 =
        static_cast<double>(i) / static_cast<double>(points - 1);
    out.push_back(WeightVector({p1, 1.0 - p1}));
  }
  return out;
}

SweepResult sweep_weights(const MultiSourceDataset& train,
                          const MultiSourceDataset& test,
                          const ModelSpec& spec, const TrainConfig& base,
                          const SweepConfig& cfg,
                          const SweepObserver& observer) {
  const std::size_t t_count = train.task_count();
  if (base.method != Method::Scalarization)
    throw ConfigError("sweep: the grid varies fixed sampling weights");
  if (cfg.seeds == 0) throw ConfigError("sweep: need at least one seed");
  if (!(cfg.val_fraction > 0.0) || !(cfg.val_fraction < 1.0))
    throw ConfigError("sweep: val_fraction outside (0, 1)");
  std::vector<WeightVector> grid = cfg.grid;
  if (cfg.include_vertices)
    for (std::size_t t = 0; t < t_count; ++t) {
      const WeightVector v = WeightVector::vertex(t_count, t);
      if (std::find(grid.begin(), grid.end(), v) == grid.end())
        grid.push_back(v);
    }
  if (grid.empty()) throw ConfigError("sweep: empty weight grid");
  for (const auto& g : grid)
    if (g.size() != t_count)
      throw ConfigError("sweep: grid point dimension mismatch");

  std::vector<MultiSourceDataset> fits, vals;
  for (std::size_t s = 0; s < cfg.seeds; ++s) {
    auto [fit, val] =
        split_dataset(train, cfg.val_fraction, cfg.base_seed + s);
    fits.push_back(std::move(fit));
    vals.push_back(std::move(val));
  }

  const std::size_t joint_runs = grid.size() * cfg.seeds;
  const std::size_t sd_runs = t_count * cfg.seeds;
  std::vector<std::vector<double>> joint_test(joint_runs);
  std::vector<double> joint_val(joint_runs, 0.0);
  std::vector<double> sd_test(sd_runs, 0.0);

  std::mutex observer_lock;
  parallel_for(joint_runs + sd_runs, cfg.jobs, [&](std::size_t i) {
    SweepRunRecord rec;
    if (i < joint_runs) {
      const std::size_t c = i / cfg.seeds;
      const std::size_t s = i % cfg.seeds;
      TrainConfig rc = base;
      rc.weights = grid[c];
      rc.seed = cfg.base_seed + s;
      RunResult res = train_run(fits[s], nullptr, spec, rc);
      joint_test[i] = evaluate_task_metrics(res.model, test);
      joint_val[i] = mean_oriented_metric(res.model, vals[s]);
      rec.cell = c;
      rec.seed_index = s;
      rec.seed = rc.seed;
      rec.weights = grid[c];
      rec.result = &res;
      if (observer) {
        std::lock_guard<std::mutex> guard(observer_lock);
        observer(rec);
      }
    } else {
      const std::size_t k = i - joint_runs;
      const std::size_t t = k / cfg.seeds;
      const std::size_t s = k % cfg.seeds;
      TrainConfig rc = base;
      rc.seed = cfg.base_seed + s;
      RunResult res = train_single_source(fits[s], nullptr, spec, rc, t);
      sd_test[k] = evaluate_task_metrics(res.model, test)[t];
      rec.single_source = true;
      rec.task = t;
      rec.seed_index = s;
      rec.seed = rc.seed;
      rec.result = &res;
      if (observer) {
        std::lock_guard<std::mutex> guard(observer_lock);
        observer(rec);
      }
    }
  });

  SweepResult result;
  result.model = spec;
  result.seed_count = cfg.seeds;
  result.base_seed = cfg.base_seed;
  for (const auto& task : train.tasks) {
    result.task_names.push_back(task.name);
    result.metrics.push_back(task.metric());
  }
  for (std::size_t c = 0; c < grid.size(); ++c) {
    SweepCell cell;
    cell.weights = grid[c];
    for (std::size_t t = 0; t < t_count; ++t) {
      std::vector<double> xs;
      for (std::size_t s = 0; s < cfg.seeds; ++s)
        xs.push_back(joint_test[c * cfg.seeds + s][t]);
      const MeanStd ms = mean_std(xs);
      cell.test_mean.push_back(ms.mean);
      cell.test_std.push_back(ms.std);
    }
    std::vector<double> vs(joint_val.begin() + c * cfg.seeds,
                           joint_val.begin() + (c + 1) * cfg.seeds);
    const MeanStd ms = mean_std(vs);
    cell.val_mean = ms.mean;
    cell.val_std = ms.std;
    result.cells.push_back(std::move(cell));
  }
  for (std::size_t t = 0; t < t_count; ++t) {
    std::vector<double> xs(sd_test.begin() + t * cfg.seeds,
                           sd_test.begin() + (t + 1) * cfg.seeds);
    const MeanStd ms = mean_std(xs);
    result.sd_test_mean.push_back(ms.mean);
    result.sd_test_std.push_back(ms.std);
  }
  result.best_index = 0;
  for (std::size_t c = 1; c < result.cells.size(); ++c)
    if (result.cells[c].val_mean > result.cells[result.best_index].val_mean)
      result.best_index = c;
  return result;
}

std::string sweep_csv(const SweepResult& result) {
  std::string out = "cell";
  for (std::size_t t = 0; t < result.task_names.size(); ++t) out += ",p_" + std::to_string(t);
  for (const auto& name : result.task_names)
    out += "," + name + "_mean," + name + "_std";
  out += ",val_mean,val_std,is_best\n";
  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    const auto& cell = result.cells[c];
    out += std::to_string(c);
    for (double p : cell.weights.values()) out += "," + g17(p);
    for (std::size_t t = 0; t < cell.test_mean.size(); ++t)
      out += "," + g17(cell.test_mean[t]) + "," + g17(cell.test_std[t]);
    out += "," + g17(cell.val_mean) + "," + g17(cell.val_std);
    out += c == result.best_index ? ",1\n" : ",0\n";
  }
  return out;
}

std::string sweep_summary_json(const SweepResult& result) {
  nlohmann::json j;
  j["base_seed"] = result.base_seed;
  j["best_index"] = result.best_index;
  j["best_weights"] = result.cells[result.best_index].weights.values();
  j["metric_names"] = result.task_names;
  j["model"] = model_json(result.model);
  j["sd_test_mean"] = result.sd_test_mean;
  j["sd_test_std"] = result.sd_test_std;
  j["seed_count"] = result.seed_count;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : result.cells)
    cells.push_back({{"test_mean", cell.test_mean},
                     {"test_std", cell.test_std},
                     {"val_mean", jnum(cell.val_mean)},
                     {"val_std", jnum(cell.val_std)},
                     {"weights", cell.weights.values()}});
  j["cells"] = std::move(cells);
  const auto deltas = delta_report(result);
  j["delta_at_best"] = deltas;
  return j.dump(2) + "\n";
}

std::vector<SdCell> run_sd_baselines(const MultiSourceDataset& train,
                                     const MultiSourceDataset& test,
                                     const ModelSpec& base_spec,
                                     const TrainConfig& base,
                                     const CapacityGrid& grid,
                                     std::size_t seeds,
                                     std::uint64_t base_seed,
                                     std::size_t jobs) {
  if (grid.trunk_depths.empty() || grid.width_multipliers.empty())
    throw ConfigError("sd baselines: empty capacity grid");
  if (seeds == 0) throw ConfigError("sd baselines: need at least one seed");
  const std::size_t t_count = train.task_count();
  struct CellKey {
    std::size_t depth_idx, width_idx, task;
  };
  std::vector<CellKey> keys;
  for (std::size_t d = 0; d < grid.trunk_depths.size(); ++d)
    for (std::size_t w = 0; w < grid.width_multipliers.size(); ++w)
      for (std::size_t t = 0; t < t_count; ++t) keys.push_back({d, w, t});

  std::vector<std::vector<double>> metrics(keys.size());
  std::vector<std::size_t> failures(keys.size(), 0);
  std::vector<std::mutex> locks(keys.size());

  parallel_for(keys.size() * seeds, jobs, [&](std::size_t i) {
    const std::size_t cell = i / seeds;
    const std::size_t s = i % seeds;
    const CellKey& key = keys[cell];
    ModelSpec spec = base_spec;
    spec.trunk_depth = grid.trunk_depths[key.depth_idx];
    spec.width_multiplier = grid.width_multipliers[key.width_idx];
    TrainConfig rc = base;
    rc.seed = base_seed + s;
    try {
      RunResult res = train_single_source(train, nullptr, spec, rc, key.task);
      const double value = evaluate_task_metrics(res.model, test)[key.task];
      std::lock_guard<std::mutex> guard(locks[cell]);
      metrics[cell].push_back(value);
    } catch (const DivergenceError&) {
      std::lock_guard<std::mutex> guard(locks[cell]);
      ++failures[cell];
    }
  });

  std::vector<SdCell> out;
  for (std::size_t cell = 0; cell < keys.size(); ++cell) {
    const CellKey& key = keys[cell];
    SdCell sd;
    sd.trunk_depth = grid.trunk_depths[key.depth_idx];
    sd.width_multiplier = grid.width_multipliers[key.width_idx];
    sd.task = key.task;
    ModelSpec spec = base_spec;
    spec.trunk_depth = sd.trunk_depth;
    spec.width_multiplier = sd.width_multiplier;
    sd.param_count = param_count_for(spec);
    const MeanStd ms = mean_std(metrics[cell]);
    sd.test_mean = ms.mean;
    sd.test_std = ms.std;
    sd.seeds_failed = failures[cell];
    sd.diverged = failures[cell] > 0;
    out.push_back(sd);
  }
  return out;
}

std::string sd_csv(std::span<const SdCell> cells) {
  std::string out =
      "trunk_depth,width_multiplier,task,test_mean,test_std,param_count,"
      "seeds_failed\n";
  for (const auto& c : cells) {
    out += std::to_string(c.trunk_depth) + "," + g17(c.width_multiplier) +
           "," + std::to_string(c.task) + "," + g17(c.test_mean) + "," +
           g17(c.test_std) + "," + std::to_string(c.param_count) + "," +
           std::to_string(c.seeds_failed) + "\n";
  }
  return out;
}

std::vector<double> delta_report(const SweepResult& sweep) {
  if (sweep.sd_test_mean.size() != sweep.metrics.size())
    throw ConfigError("delta report: missing single-source baselines");
  if (sweep.cells.empty()) throw ConfigError("delta report: empty sweep");
  const SweepCell& best = sweep.cells[sweep.best_index];
  std::vector<double> deltas;
  for (std::size_t t = 0; t < sweep.metrics.size(); ++t)
    deltas.push_back(oriented(sweep.metrics[t], best.test_mean[t]) -
                     oriented(sweep.metrics[t], sweep.sd_test_mean[t]));
  return deltas;
}

std::vector<TradeoffRow> tradeoff_table(std::span<const SweepResult> sweeps) {
  std::vector<TradeoffRow> rows;
  for (const auto& sweep : sweeps) {
    if (sweep.sd_test_mean.size() != sweep.metrics.size())
      throw ConfigError("tradeoff table: missing single-source baselines");
    for (const auto& cell : sweep.cells) {
      TradeoffRow row;
      row.trunk_depth = sweep.model.trunk_depth;
      row.width_multiplier = sweep.model.width_multiplier;
      row.weights = cell.weights.values();
      row.metrics = cell.test_mean;
      row.param_count = param_count_for(sweep.model);
      row.dominates_sd = true;
      for (std::size_t t = 0; t < sweep.metrics.size(); ++t)
        if (!(oriented(sweep.metrics[t], cell.test_mean[t]) >
              oriented(sweep.metrics[t], sweep.sd_test_mean[t])))
          row.dominates_sd = false;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string tradeoff_csv(std::span<const TradeoffRow> rows) {
  if (rows.empty()) return "trunk_depth,width_multiplier,param_count,dominates_sd\n";
  std::string out = "trunk_depth,width_multiplier";
  for (std::size_t t = 0; t < rows[0].weights.size(); ++t)
    out += ",p_" + std::to_string(t);
  for (std::size_t t = 0; t < rows[0].metrics.size(); ++t)
    out += ",metric_" + std::to_string(t);
  out += ",param_count,dominates_sd\n";
  for (const auto& row : rows) {
    out += std::to_string(row.trunk_depth) + "," + g17(row.width_multiplier);
    for (double p : row.weights) out += "," + g17(p);
    for (double v : row.metrics) out += "," + g17(v);
    out += "," + std::to_string(row.param_count);
    out += row.dominates_sd ? ",1\n" : ",0\n";
  }
  return out;
}

CostEstimate estimate_cost(Method method, std::size_t tasks,
                           std::size_t param_count) {
  if (tasks == 0) throw ConfigError("cost estimate: no tasks");
  CostEstimate est;
  if (is_gradient_method(method)) {
    est.gradient_values_stored = tasks * param_count;
    est.backward_passes_per_step = tasks;
  } else {
    est.gradient_values_stored = param_count;
    est.backward_passes_per_step = 1;
  }
  return est;
}

std::string cost_csv(std::span<const Method> methods, std::size_t tasks,
                     std::size_t param_count) {
  std::string out =
      "method,tasks,param_count,gradient_values_stored,"
      "backward_passes_per_step\n";
  for (Method m : methods) {
    const CostEstimate est = estimate_cost(m, tasks, param_count);
    out += to_string(m) + "," + std::to_string(tasks) + "," +
           std::to_string(param_count) + "," +
           std::to_string(est.gradient_values_stored) + "," +
           std::to_string(est.backward_passes_per_step) + "\n";
  }
  return out;
}

double spearman_rank_correlation(std::span<const double> a,
                                 std::span<const double> b) {
  if (a.size() != b.size())
    throw ConfigError("spearman: length mismatch");
  if (a.size() < 2) throw ConfigError("spearman: need at least two points");
  auto ranks = [](std::span<const double> xs) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t i, std::size_t j) { return xs[i] < xs[j]; });
    std::vector<double> r(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && xs[idx[j + 1]] == xs[idx[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0)
    throw ConfigError("spearman: constant input has no rank ordering");
  return cov / std::sqrt(va * vb);
}

}  // namespace scalweight
