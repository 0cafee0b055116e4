// scalweight command line. One JSON config drives every subcommand: train a
// model, sweep fixed task weights over a grid, search weight schedules with a
// population, profile gradient conflict, or estimate per-method memory cost.
// Dotted --set overrides patch the config before anything runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scalweight/checkpoint.hpp"
#include "scalweight/conflict_profiler.hpp"
#include "scalweight/dataset.hpp"
#include "scalweight/error.hpp"
#include "scalweight/experiment.hpp"
#include "scalweight/io.hpp"
#include "scalweight/losses.hpp"
#include "scalweight/model.hpp"
#include "scalweight/optimizer.hpp"
#include "scalweight/pbt.hpp"
#include "scalweight/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scalweight;

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// --- config plumbing ----------------------------------------------------------

json parse_config_text(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config: not valid JSON");
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  return doc;
}

void set_dotted(json& doc, const std::string& path, json value) {
  json* cur = &doc;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = path.find('.', start);
    const std::string key =
        dot == std::string::npos ? path.substr(start) : path.substr(start, dot - start);
    if (key.empty()) throw ConfigError("config: bad override path '" + path + "'");
    if (dot == std::string::npos) {
      (*cur)[key] = std::move(value);
      return;
    }
    json& next = (*cur)[key];
    if (next.is_null()) next = json::object();
    if (!next.is_object())
      throw ConfigError("config: override path '" + path + "' crosses a non-object");
    cur = &next;
    start = dot + 1;
  }
}

void apply_overrides(json& doc, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects section.key=value, got '" + kv + "'");
    json value = json::parse(kv.substr(eq + 1), nullptr, false);
    if (value.is_discarded()) value = kv.substr(eq + 1);  // bare strings allowed
    set_dotted(doc, kv.substr(0, eq), std::move(value));
  }
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return it.key() == k; });
    if (!known) throw ConfigError("config: unknown key " + where + "." + it.key());
  }
}

void validate_keys(const json& doc) {
  check_keys(doc, "config",
             {"run_id", "output_dir", "dataset", "model", "training", "method",
              "sweep", "pbt", "profile"});
  if (doc.contains("dataset"))
    check_keys(doc.at("dataset"), "dataset",
               {"kind", "seed", "test_fraction", "standardize_targets", "domains",
                "n", "n_per_source", "classes", "feature_dim", "domain_shift",
                "class_skew", "class_std", "mean_scale", "tasks",
                "task_correlation", "target", "attrs_per_task", "noise_std",
                "gram", "path", "expected_sources", "label_kinds",
                "source_column"});
  if (doc.contains("model"))
    check_keys(doc.at("model"), "model",
               {"trunk_depth", "base_width", "width_multiplier", "head_depth",
                "shared_head_layers"});
  if (doc.contains("training")) {
    check_keys(doc.at("training"), "training",
               {"epochs", "batch_size", "reference_source", "seed", "optimizer"});
    if (doc.at("training").contains("optimizer"))
      check_keys(doc.at("training").at("optimizer"), "training.optimizer",
                 {"kind", "learning_rate", "momentum", "beta1", "beta2",
                  "epsilon", "weight_decay", "schedule", "warmup_epochs",
                  "total_epochs"});
  }
  if (doc.contains("method")) {
    check_keys(doc.at("method"), "method",
               {"name", "mode", "weights", "schedule", "schedule_file",
                "s_learning_rate", "cagrad", "profile_conflicts",
                "profile_stride"});
    if (doc.at("method").contains("cagrad"))
      check_keys(doc.at("method").at("cagrad"), "method.cagrad",
                 {"c", "inner_iters", "inner_lr"});
  }
  if (doc.contains("sweep"))
    check_keys(doc.at("sweep"), "sweep",
               {"points", "grid", "seeds", "base_seed", "val_fraction",
                "include_vertices"});
  if (doc.contains("pbt"))
    check_keys(doc.at("pbt"), "pbt",
               {"population", "e_ready", "exploit_fraction", "e_total",
                "perturb_factors", "resample_probability", "holdout_fraction",
                "seed", "retrain_epochs", "write_checkpoints"});
  if (doc.contains("profile"))
    check_keys(doc.at("profile"), "profile", {"what", "methods", "axes", "stride"});
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: bad value for '") + key + "'");
  }
}

const json kEmptySection = json::object();

const json& section(const json& doc, const char* name) {
  if (!doc.is_object() || !doc.contains(name)) return kEmptySection;
  const json& s = doc.at(name);
  if (!s.is_object())
    throw ConfigError(std::string("config: ") + name + " must be an object");
  return s;
}

// --- dataset ------------------------------------------------------------------

LabelKind label_kind_from_name(const std::string& name) {
  if (name == "real") return LabelKind::Real;
  if (name == "binary") return LabelKind::Binary;
  if (name == "class_id") return LabelKind::ClassId;
  throw ConfigError("config: unknown label kind '" + name + "'");
}

struct BuiltData {
  MultiSourceDataset train;
  MultiSourceDataset test;
  bool has_test = false;
  std::string description;
  std::uint64_t seed = 0;
};

BuiltData build_dataset(const json& doc) {
  const json& d = section(doc, "dataset");
  if (d.empty()) throw ConfigError("config: dataset section is required");
  BuiltData out;
  out.seed = get_or<std::uint64_t>(d, "seed", 1);
  const std::string kind = get_or<std::string>(d, "kind", "multitask");
  MultiSourceDataset full;
  if (kind == "multidomain") {
    MultiDomainGenConfig g;
    g.seed = out.seed;
    g.domains = get_or<std::size_t>(d, "domains", g.domains);
    if (d.contains("n_per_source"))
      g.n_per_source = d.at("n_per_source").get<std::vector<std::size_t>>();
    else
      g.n_per_source.assign(g.domains, get_or<std::size_t>(d, "n", 600));
    g.class_count = get_or<std::size_t>(d, "classes", g.class_count);
    g.feature_dim = get_or<std::size_t>(d, "feature_dim", g.feature_dim);
    g.domain_shift = get_or<double>(d, "domain_shift", g.domain_shift);
    g.class_skew = get_or<double>(d, "class_skew", g.class_skew);
    g.class_std = get_or<double>(d, "class_std", g.class_std);
    g.mean_scale = get_or<double>(d, "mean_scale", g.mean_scale);
    full = gen_multidomain(g);
  } else if (kind == "multitask") {
    MultiTaskGenConfig g;
    g.seed = out.seed;
    g.tasks = get_or<std::size_t>(d, "tasks", g.tasks);
    g.n = get_or<std::size_t>(d, "n", g.n);
    g.feature_dim = get_or<std::size_t>(d, "feature_dim", g.feature_dim);
    g.task_correlation = get_or<double>(d, "task_correlation", g.task_correlation);
    g.target = label_kind_from_name(get_or<std::string>(d, "target", "real"));
    g.attrs_per_task = get_or<std::size_t>(d, "attrs_per_task", g.attrs_per_task);
    if (d.contains("noise_std")) {
      if (d.at("noise_std").is_array())
        g.noise_std = d.at("noise_std").get<std::vector<double>>();
      else
        g.noise_std = {d.at("noise_std").get<double>()};
    }
    if (d.contains("gram")) {
      const auto rows = d.at("gram").get<std::vector<std::vector<double>>>();
      Matrix m(rows.size(), rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.size())
          throw ConfigError("config: gram must be square");
        for (std::size_t j = 0; j < rows.size(); ++j) m.at(i, j) = rows[i][j];
      }
      full = gen_multitask_gram(g, m);
    } else {
      full = gen_multitask(g);
    }
  } else if (kind == "csv") {
    CsvSchema schema;
    schema.source_column = get_or<std::string>(d, "source_column", schema.source_column);
    if (d.contains("expected_sources"))
      schema.expected_sources =
          d.at("expected_sources").get<std::vector<std::string>>();
    if (d.contains("label_kinds")) {
      const json& lk = d.at("label_kinds");
      if (!lk.is_object())
        throw ConfigError("config: label_kinds maps task name to kind");
      for (auto it = lk.begin(); it != lk.end(); ++it) {
        TaskSpec ts;
        ts.name = it.key();
        if (it.value().is_string()) {
          ts.kind = label_kind_from_name(it.value().get<std::string>());
        } else {
          check_keys(it.value(), "label_kinds." + it.key(), {"kind", "dim"});
          ts.kind = label_kind_from_name(get_or<std::string>(it.value(), "kind", "real"));
          ts.dim = get_or<std::size_t>(it.value(), "dim", 1);
        }
        schema.label_overrides.push_back(std::move(ts));
      }
    }
    const std::string path = get_or<std::string>(d, "path", "");
    if (path.empty()) throw ConfigError("config: csv datasets need a path");
    full = load_csv(path, schema);
  } else {
    throw ConfigError("config: unknown dataset kind '" + kind + "'");
  }
  const double test_fraction = get_or<double>(d, "test_fraction", 0.0);
  if (test_fraction > 0.0) {
    auto parts = split_dataset(full, test_fraction, out.seed);
    out.train = std::move(parts.first);
    out.test = std::move(parts.second);
    out.has_test = true;
  } else {
    out.train = std::move(full);
  }
  if (get_or<bool>(d, "standardize_targets", false)) {
    const TargetStats stats = standardize_targets(out.train);
    if (out.has_test) apply_target_stats(out.test, stats);
  }
  out.description = d.dump();
  return out;
}

// --- model / training ----------------------------------------------------------

ModelSpec build_model_spec(const json& doc, const MultiSourceDataset& ds) {
  const json& m = section(doc, "model");
  ModelSpec spec;
  spec.trunk_depth = get_or<std::size_t>(m, "trunk_depth", spec.trunk_depth);
  spec.base_width = get_or<std::size_t>(m, "base_width", spec.base_width);
  spec.width_multiplier = get_or<double>(m, "width_multiplier", spec.width_multiplier);
  spec.head_depth = get_or<std::size_t>(m, "head_depth", spec.head_depth);
  spec.shared_head_layers =
      get_or<std::size_t>(m, "shared_head_layers", spec.shared_head_layers);
  return spec_for_dataset(ds, spec);
}

std::vector<WeightSegment> parse_schedule(const json& arr) {
  if (!arr.is_array()) throw ConfigError("config: schedule must be an array");
  std::vector<WeightSegment> out;
  for (const json& s : arr) {
    check_keys(s, "schedule[]", {"start_epoch", "end_epoch", "weights"});
    if (!s.contains("weights"))
      throw ConfigError("config: schedule segment needs weights");
    WeightSegment seg;
    seg.start_epoch = get_or<double>(s, "start_epoch", 0.0);
    seg.end_epoch = get_or<double>(s, "end_epoch", 0.0);
    seg.weights = WeightVector(s.at("weights").get<std::vector<double>>());
    out.push_back(std::move(seg));
  }
  return out;
}

TrainConfig build_train_config(const json& doc) {
  const json& tr = section(doc, "training");
  TrainConfig cfg;
  cfg.epochs = get_or<std::size_t>(tr, "epochs", cfg.epochs);
  cfg.epoch.batch_size = get_or<std::size_t>(tr, "batch_size", cfg.epoch.batch_size);
  cfg.epoch.reference_source =
      get_or<std::size_t>(tr, "reference_source", cfg.epoch.reference_source);
  cfg.seed = get_or<std::uint64_t>(tr, "seed", cfg.seed);

  const json& opt = section(tr, "optimizer");
  cfg.optimizer.kind =
      optimizer_kind_from_string(get_or<std::string>(opt, "kind", "sgd_momentum"));
  cfg.optimizer.learning_rate =
      get_or<double>(opt, "learning_rate", cfg.optimizer.learning_rate);
  cfg.optimizer.momentum = get_or<double>(opt, "momentum", cfg.optimizer.momentum);
  cfg.optimizer.beta1 = get_or<double>(opt, "beta1", cfg.optimizer.beta1);
  cfg.optimizer.beta2 = get_or<double>(opt, "beta2", cfg.optimizer.beta2);
  cfg.optimizer.epsilon = get_or<double>(opt, "epsilon", cfg.optimizer.epsilon);
  cfg.optimizer.weight_decay =
      get_or<double>(opt, "weight_decay", cfg.optimizer.weight_decay);
  cfg.optimizer.schedule =
      lr_schedule_from_string(get_or<std::string>(opt, "schedule", "constant"));
  cfg.optimizer.warmup_epochs =
      get_or<std::size_t>(opt, "warmup_epochs", cfg.optimizer.warmup_epochs);
  cfg.optimizer.total_epochs = get_or<std::size_t>(opt, "total_epochs", cfg.epochs);

  const json& me = section(doc, "method");
  cfg.method = method_from_string(get_or<std::string>(me, "name", "scalarization"));
  cfg.mode = mode_from_string(get_or<std::string>(me, "mode", "reweigh"));
  if (me.contains("weights"))
    cfg.weights = WeightVector(me.at("weights").get<std::vector<double>>());
  if (me.contains("schedule")) cfg.schedule = parse_schedule(me.at("schedule"));
  if (me.contains("schedule_file")) {
    if (!cfg.schedule.empty())
      throw ConfigError("config: give schedule or schedule_file, not both");
    const std::string path = me.at("schedule_file").get<std::string>();
    json sched = json::parse(read_file(path), nullptr, false);
    if (sched.is_discarded())
      throw ConfigError("config: schedule_file is not valid JSON: " + path);
    if (sched.is_object()) {
      if (!sched.contains("policy"))
        throw ConfigError("config: schedule_file has no policy array: " + path);
      sched = sched.at("policy");
    }
    cfg.schedule = parse_schedule(sched);
  }
  cfg.s_learning_rate = get_or<double>(me, "s_learning_rate", cfg.s_learning_rate);
  const json& cg = section(me, "cagrad");
  cfg.cagrad.c = get_or<double>(cg, "c", cfg.cagrad.c);
  cfg.cagrad.inner_iters = get_or<std::size_t>(cg, "inner_iters", cfg.cagrad.inner_iters);
  cfg.cagrad.inner_lr = get_or<double>(cg, "inner_lr", cfg.cagrad.inner_lr);
  cfg.profile_conflicts = get_or<bool>(me, "profile_conflicts", cfg.profile_conflicts);
  cfg.profile_stride = get_or<std::size_t>(me, "profile_stride", cfg.profile_stride);
  return cfg;
}

// --- run output -----------------------------------------------------------------

fs::path output_root(const json& doc) {
  if (const char* env = std::getenv("SCALWEIGHT_OUT"); env && *env)
    return fs::path(env);
  return fs::path(get_or<std::string>(doc, "output_dir", "runs"));
}

std::string run_id_for(const json& doc, const std::optional<std::string>& flag,
                       const char* verb, std::uint64_t seed) {
  if (flag) return *flag;
  if (doc.contains("run_id")) return doc.at("run_id").get<std::string>();
  return std::string(verb) + "-seed" + std::to_string(seed);
}

RunManifest make_manifest(std::string run_id, const BuiltData& data,
                          const ModelSpec& spec, const TrainConfig& cfg,
                          RunResult result) {
  RunManifest m;
  m.run_id = std::move(run_id);
  m.dataset = data.description;
  m.dataset_seed = data.seed;
  m.model = spec;
  m.method = cfg.method;
  m.mode = cfg.mode;
  if (cfg.weights.size() > 0) m.weights = cfg.weights.values();
  m.schedule = cfg.schedule;
  m.optimizer = cfg.optimizer;
  m.seed = cfg.seed;
  m.epochs = cfg.epochs;
  m.batch_size = cfg.epoch.batch_size;
  for (const auto& t : data.train.tasks) {
    m.task_names.push_back(t.name);
    m.metric_names.push_back(to_string(t.metric()));
  }
  m.records = std::move(result.epochs);
  m.cost = result.cost;
  return m;
}

std::string matrix_csv(const Matrix& m) {
  std::string out;
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      if (c) out += ',';
      out += fmt_double(m.at(r, c));
    }
    out += '\n';
  }
  return out;
}

void write_run_files(const fs::path& dir, const RunManifest& manifest,
                     const std::vector<ConflictRecord>& conflicts) {
  ensure_directory(dir.string());
  atomic_write_file((dir / "manifest.json").string(), manifest_json(manifest));
  atomic_write_file((dir / "metrics.csv").string(), manifest_metrics_csv(manifest));
  if (!conflicts.empty()) {
    atomic_write_file((dir / "conflicts.csv").string(),
                      conflict_records_csv(conflicts));
    atomic_write_file((dir / "affinity.csv").string(),
                      matrix_csv(affinity_matrix(conflicts)));
  }
}

json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// --- subcommands -----------------------------------------------------------------

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> run_id;
};

json load_config(const CommonFlags& flags) {
  json doc = parse_config_text(read_file(flags.config_path));
  apply_overrides(doc, flags.sets);
  if (flags.seed) set_dotted(doc, "training.seed", json(*flags.seed));
  validate_keys(doc);
  return doc;
}

int cmd_train(const CommonFlags& flags, const std::string& resume) {
  const json doc = load_config(flags);
  const BuiltData data = build_dataset(doc);
  const ModelSpec spec = build_model_spec(doc, data.train);
  const TrainConfig cfg = build_train_config(doc);
  const std::string run_id = run_id_for(doc, flags.run_id, "train", cfg.seed);
  const fs::path dir = output_root(doc) / run_id;

  Trainer trainer(data.train, data.has_test ? &data.test : nullptr, spec, cfg);
  if (!resume.empty()) {
    restore_trainer(trainer, load_checkpoint(resume));
    std::cout << "resumed at epoch " << trainer.epochs_done() << "\n";
  }
  const auto t0 = std::chrono::steady_clock::now();
  while (trainer.epochs_done() < cfg.epochs) trainer.run_epoch();
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const Checkpoint final_state = checkpoint_from_trainer(trainer);
  RunResult result = trainer.take_result();
  const std::vector<ConflictRecord> conflicts = std::move(result.conflicts);
  RunManifest manifest = make_manifest(run_id, data, spec, cfg, std::move(result));
  manifest.wall_clock_seconds = wall;
  write_run_files(dir, manifest, conflicts);
  save_checkpoint(dir / "checkpoint.ckpt", final_state);

  std::cout << "run " << manifest.run_id << ": " << cfg.epochs << " epochs, "
            << manifest.cost.steps << " steps";
  if (!manifest.records.empty() &&
      std::isfinite(manifest.records.back().mean_eval_oriented))
    std::cout << ", eval " << fmt_double(manifest.records.back().mean_eval_oriented);
  std::cout << "\nwrote " << (dir / "manifest.json").string() << "\n";
  return 0;
}

int cmd_sweep(const CommonFlags& flags, bool include_vertices_flag) {
  const json doc = load_config(flags);
  const BuiltData data = build_dataset(doc);
  if (!data.has_test) throw ConfigError("sweep: dataset.test_fraction must be > 0");
  const ModelSpec spec = build_model_spec(doc, data.train);
  const TrainConfig base = build_train_config(doc);
  if (base.method != Method::Scalarization)
    throw ConfigError("sweep: weight sweeps use the fixed-weight method");

  const json& sw = section(doc, "sweep");
  SweepConfig scfg;
  scfg.seeds = get_or<std::size_t>(sw, "seeds", scfg.seeds);
  scfg.base_seed = get_or<std::uint64_t>(sw, "base_seed", base.seed);
  scfg.val_fraction = get_or<double>(sw, "val_fraction", scfg.val_fraction);
  scfg.include_vertices =
      include_vertices_flag || get_or<bool>(sw, "include_vertices", false);
  scfg.jobs = flags.jobs;
  if (sw.contains("grid")) {
    for (const auto& row : sw.at("grid").get<std::vector<std::vector<double>>>())
      scfg.grid.emplace_back(row);
  } else {
    scfg.grid =
        weight_grid(data.train.task_count(), get_or<std::size_t>(sw, "points", 11));
  }

  const std::string run_id = run_id_for(doc, flags.run_id, "sweep", base.seed);
  const fs::path dir = output_root(doc) / run_id;
  ensure_directory((dir / "runs").string());

  const SweepObserver observer = [&](const SweepRunRecord& rec) {
    char name[64];
    if (rec.single_source)
      std::snprintf(name, sizeof name, "sd_task%zu_seed%zu", rec.task, rec.seed_index);
    else
      std::snprintf(name, sizeof name, "cell%03zu_seed%zu", rec.cell, rec.seed_index);
    TrainConfig rc = base;
    rc.seed = rec.seed;
    rc.weights = rec.single_source ? WeightVector() : rec.weights;
    RunResult copy = *rec.result;
    const std::vector<ConflictRecord> conflicts = std::move(copy.conflicts);
    RunManifest m = make_manifest(name, data, spec, rc, std::move(copy));
    m.wall_clock_seconds =
        m.cost.seconds_per_step * static_cast<double>(m.cost.steps);
    write_run_files(dir / "runs" / name, m, conflicts);
  };

  const SweepResult result =
      sweep_weights(data.train, data.test, spec, base, scfg, observer);
  atomic_write_file((dir / "sweep.csv").string(), sweep_csv(result));
  atomic_write_file((dir / "summary.json").string(), sweep_summary_json(result));

  const SweepCell& best = result.cells[result.best_index];
  std::cout << "sweep " << run_id << ": " << result.cells.size()
            << " grid points x " << scfg.seeds << " seeds\nbest weights:";
  for (double w : best.weights.values()) std::cout << ' ' << fmt_double(w);
  std::cout << "\ndelta vs single-source (oriented):";
  for (double dv : delta_report(result)) std::cout << ' ' << fmt_double(dv);
  std::cout << "\nwrote " << (dir / "summary.json").string() << "\n";
  return 0;
}

int cmd_pbt(const CommonFlags& flags, const std::optional<double>& rank_split) {
  const json doc = load_config(flags);
  const BuiltData data = build_dataset(doc);
  const ModelSpec spec = build_model_spec(doc, data.train);
  const TrainConfig base = build_train_config(doc);

  const json& pj = section(doc, "pbt");
  PbtConfig pcfg;
  pcfg.population = get_or<std::size_t>(pj, "population", pcfg.population);
  pcfg.e_ready = get_or<std::size_t>(pj, "e_ready", pcfg.e_ready);
  pcfg.exploit_fraction = get_or<double>(pj, "exploit_fraction", pcfg.exploit_fraction);
  pcfg.e_total = get_or<std::size_t>(pj, "e_total", pcfg.e_total);
  if (pj.contains("perturb_factors")) {
    const auto f = pj.at("perturb_factors").get<std::vector<double>>();
    if (f.size() != 2)
      throw ConfigError("config: perturb_factors needs exactly two entries");
    pcfg.perturb_factors = {f[0], f[1]};
  }
  pcfg.resample_probability =
      get_or<double>(pj, "resample_probability", pcfg.resample_probability);
  pcfg.holdout_fraction = rank_split.value_or(
      get_or<double>(pj, "holdout_fraction", pcfg.holdout_fraction));
  pcfg.seed = get_or<std::uint64_t>(pj, "seed", base.seed);
  pcfg.jobs = flags.jobs;

  const std::string run_id = run_id_for(doc, flags.run_id, "pbt", pcfg.seed);
  const fs::path dir = output_root(doc) / run_id;
  ensure_directory(dir.string());
  if (get_or<bool>(pj, "write_checkpoints", true)) {
    pcfg.checkpoint_dir = (dir / "checkpoints").string();
    ensure_directory(pcfg.checkpoint_dir);
  }

  const PbtResult result = run_pbt(data.train, spec, base, pcfg);
  atomic_write_file((dir / "history.json").string(), pbt_history_json(result));
  for (const auto& err : result.errors) std::cerr << "warning: " << err << "\n";

  const std::size_t retrain_epochs =
      get_or<std::size_t>(pj, "retrain_epochs", pcfg.e_total);
  RunResult retrained =
      retrain_with_policy(result.policy, data.train,
                          data.has_test ? &data.test : nullptr, spec, base,
                          retrain_epochs);
  TrainConfig rc = base;
  rc.schedule = stretch_schedule(result.policy, retrain_epochs);
  rc.weights = WeightVector();
  rc.epochs = retrain_epochs;
  const std::vector<ConflictRecord> conflicts = std::move(retrained.conflicts);
  RunManifest manifest =
      make_manifest(run_id + "-retrain", data, spec, rc, std::move(retrained));
  manifest.wall_clock_seconds =
      manifest.cost.seconds_per_step * static_cast<double>(manifest.cost.steps);
  write_run_files(dir / "retrain", manifest, conflicts);

  std::cout << "pbt " << run_id << ": best member " << result.best_member
            << " score " << fmt_double(result.best_score) << ", explored "
            << result.explored_configs << " configs over " << result.sync_count
            << " syncs\npolicy segments: " << result.policy.size() << "\nwrote "
            << (dir / "history.json").string() << "\n";
  return 0;
}

int cmd_profile(const CommonFlags& flags) {
  const json doc = load_config(flags);
  const json& pf = section(doc, "profile");
  const std::string what = get_or<std::string>(pf, "what", "conflicts");
  const BuiltData data = build_dataset(doc);
  const ModelSpec spec = build_model_spec(doc, data.train);
  const std::uint64_t seed = get_or<std::uint64_t>(section(doc, "training"), "seed", 1);
  const std::string run_id = run_id_for(doc, flags.run_id, "profile", seed);
  const fs::path dir = output_root(doc) / run_id;
  ensure_directory(dir.string());

  if (what == "memory") {
    std::vector<Method> methods;
    if (pf.contains("methods")) {
      for (const auto& name : pf.at("methods").get<std::vector<std::string>>())
        methods.push_back(method_from_string(name));
    } else {
      methods = {Method::Scalarization, Method::Uncertainty, Method::ImtlL,
                 Method::PcGrad,        Method::GradDrop,    Method::CaGrad};
    }
    const std::string csv =
        cost_csv(methods, data.train.task_count(), param_count_for(spec));
    atomic_write_file((dir / "memory.csv").string(), csv);
    std::cout << csv << "wrote " << (dir / "memory.csv").string() << "\n";
    return 0;
  }
  if (what != "conflicts")
    throw ConfigError("config: profile.what must be 'conflicts' or 'memory'");

  if (pf.contains("axes")) {
    const json& axes = pf.at("axes");
    if (!axes.is_object() || axes.empty())
      throw ConfigError("config: profile.axes must be a non-empty object");
    std::vector<std::string> names;
    std::vector<std::vector<json>> values;
    for (auto it = axes.begin(); it != axes.end(); ++it) {
      if (!it.value().is_array() || it.value().empty())
        throw ConfigError("config: profile axis '" + it.key() +
                          "' needs a non-empty array of values");
      names.push_back(it.key());
      values.emplace_back(it.value().begin(), it.value().end());
    }
    std::vector<GridCell> cells;
    std::vector<std::size_t> idx(names.size(), 0);
    for (;;) {
      json cell_doc = doc;
      GridCell cell;
      for (std::size_t i = 0; i < names.size(); ++i) {
        const json& v = values[i][idx[i]];
        set_dotted(cell_doc, names[i], v);
        cell.coords[names[i]] = v.is_string() ? v.get<std::string>() : v.dump();
      }
      const BuiltData cd = build_dataset(cell_doc);
      const ModelSpec cspec = build_model_spec(cell_doc, cd.train);
      TrainConfig ccfg = build_train_config(cell_doc);
      ccfg.profile_conflicts = true;
      ccfg.profile_stride = get_or<std::size_t>(pf, "stride", ccfg.profile_stride);
      const RunResult rr = train_run(cd.train, nullptr, cspec, ccfg);
      for (const auto& rec : rr.conflicts)
        cell.epoch_fractions.push_back(rec.fraction);
      cells.push_back(std::move(cell));
      std::size_t k = 0;
      for (; k < idx.size(); ++k) {
        if (++idx[k] < values[k].size()) break;
        idx[k] = 0;
      }
      if (k == idx.size()) break;
    }
    std::string grid;
    for (const auto& name : names) grid += name + ',';
    grid += "mean_fraction\n";
    for (const auto& cell : cells) {
      double sum = 0.0;
      for (double f : cell.epoch_fractions) sum += f;
      const double mean =
          cell.epoch_fractions.empty()
              ? 0.0
              : sum / static_cast<double>(cell.epoch_fractions.size());
      for (const auto& name : names) grid += cell.coords.at(name) + ',';
      grid += fmt_double(mean) + "\n";
    }
    std::string variance = "axis,median_variance\n";
    for (const auto& name : names)
      variance += name + ',' + fmt_double(variance_analysis(cells, name)) + '\n';
    atomic_write_file((dir / "grid.csv").string(), grid);
    atomic_write_file((dir / "variance.csv").string(), variance);
    std::cout << variance << "wrote " << (dir / "variance.csv").string() << "\n";
    return 0;
  }

  std::vector<std::string> method_names;
  if (pf.contains("methods"))
    method_names = pf.at("methods").get<std::vector<std::string>>();
  else
    method_names = {get_or<std::string>(section(doc, "method"), "name", "scalarization")};
  for (const auto& name : method_names) {
    TrainConfig cfg = build_train_config(doc);
    cfg.method = method_from_string(name);
    cfg.profile_conflicts = true;
    cfg.profile_stride = get_or<std::size_t>(pf, "stride", cfg.profile_stride);
    const auto t0 = std::chrono::steady_clock::now();
    RunResult rr =
        train_run(data.train, data.has_test ? &data.test : nullptr, spec, cfg);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::vector<ConflictRecord> conflicts = std::move(rr.conflicts);
    RunManifest m = make_manifest(run_id + "-" + name, data, spec, cfg, std::move(rr));
    m.wall_clock_seconds = wall;
    write_run_files(dir / name, m, conflicts);
    double sum = 0.0;
    for (const auto& rec : conflicts) sum += rec.fraction;
    const double mean =
        conflicts.empty() ? 0.0 : sum / static_cast<double>(conflicts.size());
    std::cout << name << ": mean conflict fraction " << fmt_double(mean) << "\n";
  }
  std::cout << "wrote " << dir.string() << "\n";
  return 0;
}

int cmd_report(const std::string& dir_arg) {
  const fs::path root(dir_arg);
  if (!fs::exists(root))
    throw IoError("report: no such directory: " + root.string());
  std::vector<fs::path> paths;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file() && entry.path().filename() == "manifest.json")
      paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  if (paths.empty())
    throw IoError("report: no manifest.json under " + root.string());

  std::string combined;
  json summary = json::array();
  for (const auto& p : paths) {
    const RunManifest m = manifest_from_json(read_file(p.string()));
    const std::string csv = manifest_metrics_csv(m);
    if (combined.empty())
      combined = csv;
    else
      combined += csv.substr(csv.find('\n') + 1);
    json row;
    row["run_id"] = m.run_id;
    row["method"] = to_string(m.method);
    row["mode"] = to_string(m.mode);
    row["epochs"] = m.records.size();
    row["tasks"] = m.task_names;
    if (!m.records.empty()) {
      const EpochRecord& last = m.records.back();
      double loss = 0.0;
      for (const auto& t : last.tasks) loss += t.train_loss;
      row["final_train_loss"] =
          num_or_null(loss / static_cast<double>(last.tasks.size()));
      row["final_eval_oriented"] = num_or_null(last.mean_eval_oriented);
    }
    row["wall_clock_seconds"] = m.wall_clock_seconds;
    summary.push_back(std::move(row));
  }
  atomic_write_file((root / "metrics.csv").string(), combined);
  atomic_write_file((root / "report.json").string(), summary.dump(2) + "\n");
  std::cout << "report: " << paths.size() << " runs -> "
            << (root / "report.json").string() << "\n";
  return 0;
}

int cmd_datagen(const CommonFlags& flags) {
  const json doc = load_config(flags);
  const BuiltData data = build_dataset(doc);
  const std::string run_id = run_id_for(doc, flags.run_id, "data", data.seed);
  const fs::path dir = output_root(doc) / run_id;
  ensure_directory(dir.string());
  save_csv(data.train, (dir / "train.csv").string());
  std::size_t train_rows = 0;
  for (std::size_t t = 0; t < data.train.task_count(); ++t)
    train_rows += data.train.size(t);
  std::cout << "train.csv: " << train_rows << " rows, "
            << data.train.task_count() << " sources\n";
  if (data.has_test) {
    save_csv(data.test, (dir / "test.csv").string());
    std::size_t test_rows = 0;
    for (std::size_t t = 0; t < data.test.task_count(); ++t)
      test_rows += data.test.size(t);
    std::cout << "test.csv: " << test_rows << " rows\n";
  }
  std::cout << "wrote " << dir.string() << "\n";
  return 0;
}

int cmd_export(const std::string& ckpt_path, const std::string& out_path) {
  const Checkpoint ck = load_checkpoint(ckpt_path);
  json j;
  j["member_id"] = ck.member_id;
  j["epoch"] = ck.epoch;
  j["optimizer_step"] = ck.optimizer_step;
  j["param_count"] = ck.params.size();
  j["model"] = {{"input_dim", ck.spec.input_dim},
                {"trunk_depth", ck.spec.trunk_depth},
                {"base_width", ck.spec.base_width},
                {"width_multiplier", ck.spec.width_multiplier},
                {"head_depth", ck.spec.head_depth},
                {"shared_head_layers", ck.spec.shared_head_layers},
                {"output_dims", ck.spec.output_dims}};
  if (ck.has_score) j["score"] = ck.score;
  if (!ck.weights.empty()) j["weights"] = ck.weights;
  if (!ck.adaptive_s.empty()) j["adaptive_s"] = ck.adaptive_s;
  const std::string text = j.dump(2) + "\n";
  if (!out_path.empty()) atomic_write_file(out_path, text);
  std::cout << text;
  return 0;
}

int run_cli(int argc, char** argv) {
  CLI::App app{
      "scalweight: multi-source training with weighted task mixing, weight "
      "search, and gradient conflict profiling"};
  app.require_subcommand(1);

  CommonFlags flags;
  bool include_vertices = false;
  std::string resume;
  std::optional<double> rank_split;
  std::string report_dir = "runs";
  std::string export_ckpt;
  std::string export_out;

  CLI::App* train = app.add_subcommand("train", "train one model, write manifest and metrics");
  CLI::App* sweep = app.add_subcommand("sweep", "grid-search fixed task weights against single-source baselines");
  CLI::App* pbt = app.add_subcommand("pbt", "population based search over task weights");
  CLI::App* profile = app.add_subcommand("profile", "measure gradient conflict or per-method memory cost");
  CLI::App* datagen = app.add_subcommand("datagen", "generate a dataset and save it as csv");
  CLI::App* report = app.add_subcommand("report", "aggregate every manifest under a directory");
  CLI::App* exp = app.add_subcommand("export", "print checkpoint metadata as json");

  for (CLI::App* sub : {train, sweep, pbt, profile, datagen}) {
    sub->add_option("config", flags.config_path, "json config file")->required();
    sub->add_option("--set", flags.sets, "override a config value: section.key=value");
    sub->add_option("--jobs", flags.jobs, "worker threads for population and grid runs");
    sub->add_option("--seed", flags.seed, "override training.seed");
    sub->add_option("--run-id", flags.run_id, "name of the run directory");
  }
  train->add_option("--resume", resume, "checkpoint file to resume from");
  sweep->add_flag("--include-vertices", include_vertices,
                  "force the single-task corners into the grid");
  pbt->add_option("--rank-split", rank_split,
                  "fraction of training data held out for ranking");
  report->add_option("dir", report_dir, "directory to scan (default: runs)");
  exp->add_option("checkpoint", export_ckpt, "checkpoint file")->required();
  exp->add_option("--out", export_out, "also write the json here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (*train) return cmd_train(flags, resume);
  if (*sweep) return cmd_sweep(flags, include_vertices);
  if (*pbt) return cmd_pbt(flags, rank_split);
  if (*profile) return cmd_profile(flags);
  if (*datagen) return cmd_datagen(flags);
  if (*report) return cmd_report(report_dir);
  if (*exp) return cmd_export(export_ckpt, export_out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
