#include "scalweight/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "scalweight/error.hpp"
#include "scalweight/io.hpp"
#include "scalweight/rng.hpp"

namespace scalweight {

LossKind TaskSpec::loss() const {
  switch (kind) {
    case LabelKind::ClassId: return LossKind::SoftmaxCrossEntropy;
    case LabelKind::Real: return LossKind::L1;
    case LabelKind::Binary: return LossKind::BinaryCrossEntropy;
  }
  throw ConfigError("task: unknown label kind");
}

MetricKind TaskSpec::metric() const { return default_metric(loss()); }

std::size_t MultiSourceDataset::feature_dim() const {
  return features.empty() ? 0 : features[0].cols;
}

void MultiSourceDataset::validate() const {
  const std::size_t t = tasks.size();
  if (t == 0) throw ConfigError("dataset: no tasks");
  if (source_names.size() != t || features.size() != t || labels.size() != t)
    throw ConfigError("dataset: per-source arrays disagree on task count");
  for (std::size_t i = 0; i < t; ++i) {
    if (features[i].rows == 0) throw ConfigError("dataset: empty source");
    if (features[i].cols != features[0].cols)
      throw ConfigError("dataset: feature width differs between sources");
    if (labels[i].rows != features[i].rows)
      throw ConfigError("dataset: features/labels row mismatch");
    if (labels[i].cols != tasks[i].label_cols())
      throw ConfigError("dataset: label width does not match task spec");
    if (tasks[i].dim == 0) throw ConfigError("dataset: zero-dim task");
    if (tasks[i].kind == LabelKind::ClassId) {
      for (double v : labels[i].data)
        if (v < 0 || v != std::floor(v) ||
            v >= static_cast<double>(tasks[i].dim))
          throw ConfigError("dataset: class id out of range in source " +
                            source_names[i]);
    } else if (tasks[i].kind == LabelKind::Binary) {
      for (double v : labels[i].data)
        if (v != 0.0 && v != 1.0)
          throw ConfigError("dataset: non-binary label in source " +
                            source_names[i]);
    }
  }
  if (mode == DatasetMode::MultiDomain) {
    for (const auto& task : tasks)
      if (task.kind != tasks[0].kind || task.dim != tasks[0].dim)
        throw ConfigError(
            "dataset: multi-domain sources must share one label space");
  } else {
    for (const auto& f : features)
      if (!(f == features[0]))
        throw ConfigError(
            "dataset: multi-task sources must share identical inputs");
  }
}

std::vector<std::size_t> output_dims_for(const MultiSourceDataset& ds) {
  std::vector<std::size_t> dims;
  dims.reserve(ds.tasks.size());
  for (const auto& t : ds.tasks) dims.push_back(t.output_dim());
  return dims;
}

// --- generators ---------------------------------------------------------------

MultiSourceDataset gen_multidomain(const MultiDomainGenConfig& cfg) {
  if (cfg.domains == 0) throw ConfigError("gen_multidomain: no domains");
  if (cfg.n_per_source.size() != cfg.domains)
    throw ConfigError("gen_multidomain: n_per_source size mismatch");
  if (cfg.class_count < 2) throw ConfigError("gen_multidomain: need >= 2 classes");
  if (cfg.feature_dim == 0) throw ConfigError("gen_multidomain: feature_dim is zero");
  if (cfg.class_skew < 0.0 || cfg.class_skew >= 1.0)
    throw ConfigError("gen_multidomain: class_skew must lie in [0, 1)");
  if (cfg.domain_shift < 0.0)
    throw ConfigError("gen_multidomain: negative domain_shift");
  if (!(cfg.class_std > 0.0))
    throw ConfigError("gen_multidomain: class_std must be positive");
  for (auto n : cfg.n_per_source)
    if (n == 0) throw ConfigError("gen_multidomain: empty domain requested");

  Rng structure = Rng::stream(cfg.seed, 0);
  const std::size_t d = cfg.feature_dim, k = cfg.class_count;

  // shared class means
  Matrix base_means(k, d);
  for (auto& v : base_means.data) v = structure.normal() * cfg.mean_scale;

  // per (domain, class): mean displaced along a random unit direction
  std::vector<Matrix> means(cfg.domains, Matrix(k, d));
  for (std::size_t t = 0; t < cfg.domains; ++t) {
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> dir(d);
      double norm = 0.0;
      for (auto& v : dir) {
        v = structure.normal();
        norm += v * v;
      }
      norm = std::sqrt(norm);
      if (norm == 0.0) norm = 1.0;
      for (std::size_t j = 0; j < d; ++j)
        means[t].at(c, j) =
            base_means.at(c, j) + cfg.domain_shift * dir[j] / norm;
    }
  }

  // per-domain class frequencies: geometric tilt along a random class order
  std::vector<std::vector<double>> class_probs(cfg.domains,
                                               std::vector<double>(k));
  for (std::size_t t = 0; t < cfg.domains; ++t) {
    const auto order = structure.permutation(k);
    double total = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
      const double w = std::pow(1.0 - cfg.class_skew, static_cast<double>(r));
      class_probs[t][order[r]] = w;
      total += w;
    }
    for (auto& p : class_probs[t]) p /= total;
  }

  MultiSourceDataset ds;
  ds.mode = DatasetMode::MultiDomain;
  Rng samples = Rng::stream(cfg.seed, 1);
  for (std::size_t t = 0; t < cfg.domains; ++t) {
    const std::size_t n = cfg.n_per_source[t];
    Matrix x(n, d), y(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = samples.categorical(class_probs[t]);
      y.at(i, 0) = static_cast<double>(c);
      for (std::size_t j = 0; j < d; ++j)
        x.at(i, j) = means[t].at(c, j) + cfg.class_std * samples.normal();
    }
    ds.source_names.push_back("domain" + std::to_string(t));
    ds.tasks.push_back({"label", LabelKind::ClassId, k});
    ds.features.push_back(std::move(x));
    ds.labels.push_back(std::move(y));
  }
  ds.validate();
  return ds;
}

namespace {

// Lower Cholesky factor tolerant of semidefinite input. Pivots inside
// [-tol, 0] are treated as exact zeros; anything below -tol rejects.
Matrix cholesky_psd(const Matrix& g, const char* what) {
  const std::size_t n = g.rows;
  if (g.cols != n) throw ConfigError(std::string(what) + ": gram not square");
  Matrix l(n, n);
  constexpr double tol = 1e-9;
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = g.at(j, j);
    for (std::size_t k = 0; k < j; ++k) pivot -= l.at(j, k) * l.at(j, k);
    if (pivot < -tol)
      throw ConfigError(std::string(what) +
                        ": gram matrix not positive semidefinite "
                        "(infeasible task correlation)");
    const double ljj = pivot > 0.0 ? std::sqrt(pivot) : 0.0;
    l.at(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double acc = g.at(i, j);
      for (std::size_t k = 0; k < j; ++k) acc -= l.at(i, k) * l.at(j, k);
      l.at(i, j) = ljj > 0.0 ? acc / ljj : 0.0;
    }
  }
  return l;
}

// d x t matrix with orthonormal columns via modified Gram-Schmidt.
Matrix orthonormal_columns(std::size_t d, std::size_t t, Rng& rng) {
  Matrix q(d, t);
  for (std::size_t j = 0; j < t; ++j) {
    std::vector<double> col(d);
    for (auto& v : col) v = rng.normal();
    for (std::size_t prev = 0; prev < j; ++prev) {
      double proj = 0.0;
      for (std::size_t i = 0; i < d; ++i) proj += col[i] * q.at(i, prev);
      for (std::size_t i = 0; i < d; ++i) col[i] -= proj * q.at(i, prev);
    }
    double norm = 0.0;
    for (double v : col) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-12)
      throw ConfigError("gen_multitask: degenerate basis draw");
    for (std::size_t i = 0; i < d; ++i) q.at(i, j) = col[i] / norm;
  }
  return q;
}

}  // namespace

MultiSourceDataset gen_multitask_gram(const MultiTaskGenConfig& cfg,
                                      const Matrix& gram) {
  if (cfg.tasks == 0) throw ConfigError("gen_multitask: no tasks");
  if (cfg.n == 0) throw ConfigError("gen_multitask: empty dataset requested");
  if (cfg.feature_dim < cfg.tasks)
    throw ConfigError("gen_multitask: feature_dim must be >= task count");
  if (cfg.target != LabelKind::Real && cfg.target != LabelKind::Binary)
    throw ConfigError("gen_multitask: target must be Real or Binary");
  if (cfg.attrs_per_task == 0)
    throw ConfigError("gen_multitask: attrs_per_task is zero");
  if (cfg.attrs_per_task > 1 && cfg.target != LabelKind::Binary)
    throw ConfigError("gen_multitask: attribute groups need Binary targets");
  if (gram.rows != cfg.tasks || gram.cols != cfg.tasks)
    throw ConfigError("gen_multitask: gram size mismatch");
  for (std::size_t i = 0; i < cfg.tasks; ++i)
    if (std::abs(gram.at(i, i) - 1.0) > 1e-12)
      throw ConfigError("gen_multitask: gram diagonal must be 1");

  std::vector<double> noise(cfg.tasks);
  if (cfg.noise_std.size() == 1)
    std::fill(noise.begin(), noise.end(), cfg.noise_std[0]);
  else if (cfg.noise_std.size() == cfg.tasks)
    noise.assign(cfg.noise_std.begin(), cfg.noise_std.end());
  else
    throw ConfigError("gen_multitask: noise_std must have 1 or T entries");
  for (double s : noise)
    if (s < 0.0) throw ConfigError("gen_multitask: negative noise_std");

  const std::size_t d = cfg.feature_dim, t_count = cfg.tasks;
  Rng structure = Rng::stream(cfg.seed, 0);
  const Matrix l = cholesky_psd(gram, "gen_multitask");
  const Matrix q = orthonormal_columns(d, t_count, structure);

  // w_t = Q * (row t of L): unit vectors realizing the requested Gram
  Matrix w(t_count, d);
  for (std::size_t t = 0; t < t_count; ++t)
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < t_count; ++k)
        acc += q.at(i, k) * l.at(t, k);
      w.at(t, i) = acc;
    }

  // attribute vectors: the task vector itself, or jittered copies
  const std::size_t attrs = cfg.attrs_per_task;
  std::vector<Matrix> attr_vecs(t_count, Matrix(attrs, d));
  for (std::size_t t = 0; t < t_count; ++t) {
    for (std::size_t a = 0; a < attrs; ++a) {
      if (attrs == 1) {
        for (std::size_t i = 0; i < d; ++i) attr_vecs[t].at(a, i) = w.at(t, i);
        continue;
      }
      double norm = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double v = w.at(t, i) + 0.15 * structure.normal();
        attr_vecs[t].at(a, i) = v;
        norm += v * v;
      }
      norm = std::sqrt(norm);
      if (norm == 0.0) norm = 1.0;
      for (std::size_t i = 0; i < d; ++i) attr_vecs[t].at(a, i) /= norm;
    }
  }

  Rng samples = Rng::stream(cfg.seed, 1);
  Matrix x(cfg.n, d);
  for (auto& v : x.data) v = samples.normal();

  MultiSourceDataset ds;
  ds.mode = DatasetMode::MultiTask;
  for (std::size_t t = 0; t < t_count; ++t) {
    Matrix y(cfg.n, attrs);
    for (std::size_t i = 0; i < cfg.n; ++i) {
      for (std::size_t a = 0; a < attrs; ++a) {
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k)
          acc += x.at(i, k) * attr_vecs[t].at(a, k);
        acc += noise[t] * samples.normal();
        y.at(i, a) = cfg.target == LabelKind::Real ? acc : (acc > 0.0 ? 1.0 : 0.0);
      }
    }
    ds.source_names.push_back("task" + std::to_string(t));
    ds.tasks.push_back({"task" + std::to_string(t), cfg.target, attrs});
    ds.features.push_back(x);
    ds.labels.push_back(std::move(y));
  }
  ds.validate();
  return ds;
}

MultiSourceDataset gen_multitask(const MultiTaskGenConfig& cfg) {
  if (cfg.tasks == 0) throw ConfigError("gen_multitask: no tasks");
  if (cfg.task_correlation < -1.0 || cfg.task_correlation > 1.0)
    throw ConfigError("gen_multitask: task_correlation outside [-1, 1]");
  Matrix gram(cfg.tasks, cfg.tasks);
  for (std::size_t i = 0; i < cfg.tasks; ++i)
    for (std::size_t j = 0; j < cfg.tasks; ++j)
      gram.at(i, j) = i == j ? 1.0 : cfg.task_correlation;
  return gen_multitask_gram(cfg, gram);
}

// --- standardization -----------------------------------------------------------

TargetStats standardize_targets(MultiSourceDataset& ds) {
  ds.validate();
  TargetStats stats;
  stats.mean.resize(ds.task_count());
  stats.stddev.resize(ds.task_count());
  for (std::size_t t = 0; t < ds.task_count(); ++t) {
    if (ds.tasks[t].kind != LabelKind::Real) continue;
    Matrix& y = ds.labels[t];
    const double n = static_cast<double>(y.rows);
    stats.mean[t].assign(y.cols, 0.0);
    stats.stddev[t].assign(y.cols, 0.0);
    for (std::size_t c = 0; c < y.cols; ++c) {
      double mean = 0.0;
      for (std::size_t i = 0; i < y.rows; ++i) mean += y.at(i, c);
      mean /= n;
      double var = 0.0;  // population variance
      for (std::size_t i = 0; i < y.rows; ++i) {
        const double diff = y.at(i, c) - mean;
        var += diff * diff;
      }
      var /= n;
      if (var == 0.0)
        throw ConfigError("standardize_targets: zero-variance target in task " +
                          ds.tasks[t].name);
      stats.mean[t][c] = mean;
      stats.stddev[t][c] = std::sqrt(var);
    }
  }
  apply_target_stats(ds, stats);
  return stats;
}

void apply_target_stats(MultiSourceDataset& ds, const TargetStats& stats) {
  if (stats.mean.size() != ds.task_count() ||
      stats.stddev.size() != ds.task_count())
    throw ConfigError("apply_target_stats: stats/task count mismatch");
  for (std::size_t t = 0; t < ds.task_count(); ++t) {
    if (stats.mean[t].empty()) continue;
    Matrix& y = ds.labels[t];
    if (stats.mean[t].size() != y.cols)
      throw ConfigError("apply_target_stats: stats width mismatch");
    for (std::size_t i = 0; i < y.rows; ++i)
      for (std::size_t c = 0; c < y.cols; ++c)
        y.at(i, c) = (y.at(i, c) - stats.mean[t][c]) / stats.stddev[t][c];
  }
}

// --- splits ---------------------------------------------------------------------

namespace {

void take_rows(const Matrix& src, const std::vector<std::size_t>& rows,
               Matrix& dst) {
  dst = Matrix(rows.size(), src.cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < src.cols; ++c)
      dst.at(i, c) = src.at(rows[i], c);
}

}  // namespace

std::pair<MultiSourceDataset, MultiSourceDataset> split_dataset(
    const MultiSourceDataset& ds, double second_fraction, std::uint64_t seed) {
  ds.validate();
  if (!(second_fraction > 0.0) || !(second_fraction < 1.0))
    throw ConfigError("split_dataset: fraction must lie in (0, 1)");

  MultiSourceDataset first = ds, second = ds;
  const bool shared_rows = ds.mode == DatasetMode::MultiTask;
  std::vector<std::size_t> shared_perm;
  for (std::size_t t = 0; t < ds.task_count(); ++t) {
    const std::size_t n = ds.size(t);
    std::vector<std::size_t> perm;
    if (shared_rows) {
      if (shared_perm.empty())
        shared_perm = Rng::stream(seed, 77).permutation(n);
      perm = shared_perm;
    } else {
      perm = Rng::stream(seed, 77 + t).permutation(n);
    }
    const auto n_second = static_cast<std::size_t>(
        std::llround(second_fraction * static_cast<double>(n)));
    if (n_second == 0 || n_second >= n)
      throw ConfigError("split_dataset: a split would be empty");
    std::vector<std::size_t> rows_second(perm.begin(), perm.begin() + n_second);
    std::vector<std::size_t> rows_first(perm.begin() + n_second, perm.end());
    take_rows(ds.features[t], rows_first, first.features[t]);
    take_rows(ds.labels[t], rows_first, first.labels[t]);
    take_rows(ds.features[t], rows_second, second.features[t]);
    take_rows(ds.labels[t], rows_second, second.labels[t]);
  }
  first.validate();
  second.validate();
  return {std::move(first), std::move(second)};
}

// --- csv ------------------------------------------------------------------------

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

double parse_number(const std::string& cell, std::size_t line_no) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
  double value = 0.0;
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end)
    throw ConfigError("csv: unparseable number '" + cell + "' on line " +
                      std::to_string(line_no));
  return value;
}

struct LabelColumn {
  std::string task;
  std::size_t attr = 0;
  std::size_t col = 0;  // csv column index
};

}  // namespace

MultiSourceDataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw ConfigError("csv: missing header in " + path);
  const auto header = split_line(line);

  std::ptrdiff_t source_col = -1;
  std::vector<LabelColumn> label_cols;
  std::vector<std::size_t> feature_cols;
  std::vector<std::string> feature_names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& name = header[c];
    if (name == schema.source_column) {
      if (source_col >= 0) throw ConfigError("csv: duplicate source column");
      source_col = static_cast<std::ptrdiff_t>(c);
    } else if (name.rfind("task:", 0) == 0) {
      std::string rest = name.substr(5);
      std::size_t attr = 0;
      const auto colon = rest.rfind(':');
      if (colon != std::string::npos) {
        const std::string idx = rest.substr(colon + 1);
        if (!idx.empty() &&
            idx.find_first_not_of("0123456789") == std::string::npos) {
          attr = std::stoul(idx);
          rest = rest.substr(0, colon);
        }
      }
      if (rest.empty()) throw ConfigError("csv: empty task name in header");
      label_cols.push_back({rest, attr, c});
    } else {
      feature_cols.push_back(c);
      feature_names.push_back(name);
    }
  }
  if (source_col < 0)
    throw ConfigError("csv: required column '" + schema.source_column +
                      "' missing in " + path);
  if (label_cols.empty()) throw ConfigError("csv: no task:<name> columns in " + path);
  if (feature_cols.empty()) throw ConfigError("csv: no feature columns in " + path);

  // group label columns by task, ordered by first appearance
  std::vector<std::string> task_order;
  std::map<std::string, std::vector<LabelColumn>> groups;
  for (const auto& lc : label_cols) {
    if (!groups.count(lc.task)) task_order.push_back(lc.task);
    groups[lc.task].push_back(lc);
  }
  for (auto& [task, cols] : groups) {
    std::sort(cols.begin(), cols.end(),
              [](const LabelColumn& a, const LabelColumn& b) {
                return a.attr < b.attr;
              });
    for (std::size_t i = 0; i < cols.size(); ++i)
      if (cols[i].attr != i)
        throw ConfigError("csv: label columns of task '" + task +
                          "' are not a dense 0..k-1 attribute range");
  }

  // parse rows grouped by source, keeping first-appearance order
  std::vector<std::string> source_order;
  std::map<std::string, std::vector<std::vector<double>>> feats_by_source;
  std::map<std::string, std::vector<std::vector<double>>> labels_by_source;
  const std::size_t label_width = label_cols.size();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw ConfigError("csv: line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(header.size()));
    const std::string& source = cells[static_cast<std::size_t>(source_col)];
    if (!feats_by_source.count(source)) source_order.push_back(source);
    auto& feats = feats_by_source[source];
    auto& labs = labels_by_source[source];
    std::vector<double> frow;
    frow.reserve(feature_cols.size());
    for (auto c : feature_cols) frow.push_back(parse_number(cells[c], line_no));
    std::vector<double> lrow;
    lrow.reserve(label_width);
    for (const auto& task : task_order)
      for (const auto& lc : groups[task])
        lrow.push_back(parse_number(cells[lc.col], line_no));
    feats.push_back(std::move(frow));
    labs.push_back(std::move(lrow));
  }
  if (source_order.empty()) throw ConfigError("csv: no data rows in " + path);

  for (const auto& expected : schema.expected_sources)
    if (!feats_by_source.count(expected))
      throw ConfigError("csv: source '" + expected +
                        "' declared in schema but absent from " + path);

  // infer or override the label kind per task group
  auto resolve_task = [&](const std::string& name,
                          std::size_t cols_in_group,
                          const std::vector<double>& values) -> TaskSpec {
    for (const auto& o : schema.label_overrides)
      if (o.name == name) {
        TaskSpec spec = o;
        if (spec.label_cols() != cols_in_group)
          throw ConfigError("csv: override for task '" + name +
                            "' disagrees with column count");
        return spec;
      }
    bool integral = true, binary = true;
    double maxv = 0.0;
    for (double v : values) {
      if (v != std::floor(v) || v < 0.0) integral = false;
      if (v != 0.0 && v != 1.0) binary = false;
      maxv = std::max(maxv, v);
    }
    if (binary) return {name, LabelKind::Binary, cols_in_group};
    if (integral && cols_in_group == 1)
      return {name, LabelKind::ClassId,
              static_cast<std::size_t>(maxv) + 1};
    return {name, LabelKind::Real, cols_in_group};
  };

  const bool multi_domain = source_order.size() > 1;
  MultiSourceDataset ds;
  ds.mode = multi_domain ? DatasetMode::MultiDomain : DatasetMode::MultiTask;

  if (multi_domain) {
    if (task_order.size() != 1)
      throw ConfigError(
          "csv: multiple sources require exactly one task column group");
    std::vector<double> all_values;
    for (const auto& s : source_order)
      for (const auto& row : labels_by_source[s])
        all_values.insert(all_values.end(), row.begin(), row.end());
    const TaskSpec spec =
        resolve_task(task_order[0], groups[task_order[0]].size(), all_values);
    for (const auto& s : source_order) {
      const auto& feats = feats_by_source[s];
      const auto& labs = labels_by_source[s];
      Matrix x(feats.size(), feature_cols.size());
      Matrix y(labs.size(), spec.label_cols());
      for (std::size_t i = 0; i < feats.size(); ++i) {
        std::copy(feats[i].begin(), feats[i].end(), x.row(i).begin());
        std::copy(labs[i].begin(), labs[i].end(), y.row(i).begin());
      }
      ds.source_names.push_back(s);
      ds.tasks.push_back(spec);
      ds.features.push_back(std::move(x));
      ds.labels.push_back(std::move(y));
    }
  } else {
    const auto& feats = feats_by_source[source_order[0]];
    const auto& labs = labels_by_source[source_order[0]];
    Matrix x(feats.size(), feature_cols.size());
    for (std::size_t i = 0; i < feats.size(); ++i)
      std::copy(feats[i].begin(), feats[i].end(), x.row(i).begin());
    std::size_t offset = 0;
    for (const auto& task : task_order) {
      const std::size_t width = groups[task].size();
      std::vector<double> values;
      values.reserve(labs.size() * width);
      Matrix y(labs.size(), width);
      for (std::size_t i = 0; i < labs.size(); ++i)
        for (std::size_t j = 0; j < width; ++j) {
          y.at(i, j) = labs[i][offset + j];
          values.push_back(y.at(i, j));
        }
      const TaskSpec spec = resolve_task(task, width, values);
      if (spec.label_cols() != width)
        throw ConfigError("csv: task '" + task + "' width mismatch");
      ds.source_names.push_back(task);
      ds.tasks.push_back(spec);
      ds.features.push_back(x);
      ds.labels.push_back(std::move(y));
      offset += width;
    }
  }
  ds.validate();
  return ds;
}

void save_csv(const MultiSourceDataset& ds, const std::string& path) {
  ds.validate();
  std::ostringstream out;
  out << "source";
  const bool multi_domain = ds.mode == DatasetMode::MultiDomain;
  const std::size_t task_groups = multi_domain ? 1 : ds.task_count();
  for (std::size_t t = 0; t < task_groups; ++t) {
    const TaskSpec& spec = ds.tasks[t];
    if (spec.label_cols() == 1)
      out << ",task:" << spec.name;
    else
      for (std::size_t j = 0; j < spec.label_cols(); ++j)
        out << ",task:" << spec.name << ':' << j;
  }
  for (std::size_t j = 0; j < ds.feature_dim(); ++j) out << ",x" << j;
  out << '\n';

  char buf[40];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << ',' << buf;
  };

  if (multi_domain) {
    for (std::size_t t = 0; t < ds.task_count(); ++t)
      for (std::size_t i = 0; i < ds.size(t); ++i) {
        out << ds.source_names[t];
        for (std::size_t j = 0; j < ds.labels[t].cols; ++j)
          emit(ds.labels[t].at(i, j));
        for (std::size_t j = 0; j < ds.feature_dim(); ++j)
          emit(ds.features[t].at(i, j));
        out << '\n';
      }
  } else {
    const std::size_t n = ds.size(0);
    for (std::size_t i = 0; i < n; ++i) {
      out << "shared";
      for (std::size_t t = 0; t < ds.task_count(); ++t)
        for (std::size_t j = 0; j < ds.labels[t].cols; ++j)
          emit(ds.labels[t].at(i, j));
      for (std::size_t j = 0; j < ds.feature_dim(); ++j)
        emit(ds.features[0].at(i, j));
      out << '\n';
    }
  }
  atomic_write_file(path, out.str());
}

}  // namespace scalweight
