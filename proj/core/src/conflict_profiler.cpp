#include "scalweight/conflict_profiler.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "scalweight/error.hpp"

namespace scalweight {

ConflictProfiler::ConflictProfiler(std::size_t task_count)
    : task_count_(task_count),
      observed_(task_count, task_count),
      conflicting_(task_count, task_count) {
  if (task_count < 2)
    throw ConfigError("conflict profiler: needs at least two tasks");
}

void ConflictProfiler::record_step(const GradientSet& grads) {
  if (grads.task_count() != task_count_)
    throw ConfigError("conflict profiler: task count mismatch");
  for (std::size_t i = 0; i < task_count_; ++i)
    for (std::size_t j = i + 1; j < task_count_; ++j) {
      const ConflictStat stat =
          is_conflicting(grads.grads[i], grads.grads[j]);
      observed_.at(i, j) += 1.0;
      observed_.at(j, i) += 1.0;
      if (stat.conflicting) {
        conflicting_.at(i, j) += 1.0;
        conflicting_.at(j, i) += 1.0;
      }
      if (stat.degenerate) ++degenerate_;
    }
}

const ConflictRecord& ConflictProfiler::finish_epoch(std::size_t epoch) {
  ConflictRecord rec;
  rec.epoch = epoch;
  rec.pair_fraction = Matrix(task_count_, task_count_);
  rec.pair_observed = observed_;
  rec.pair_conflicting = conflicting_;
  rec.degenerate_observations = degenerate_;
  for (std::size_t i = 0; i < task_count_; ++i)
    for (std::size_t j = i + 1; j < task_count_; ++j) {
      const double obs = observed_.at(i, j);
      const double con = conflicting_.at(i, j);
      rec.pair_observations += static_cast<std::size_t>(obs);
      rec.conflicting_observations += static_cast<std::size_t>(con);
      const double frac = obs > 0.0 ? con / obs : 0.0;
      rec.pair_fraction.at(i, j) = frac;
      rec.pair_fraction.at(j, i) = frac;
    }
  rec.fraction = rec.pair_observations > 0
                     ? static_cast<double>(rec.conflicting_observations) /
                           static_cast<double>(rec.pair_observations)
                     : 0.0;
  observed_ = Matrix(task_count_, task_count_);
  conflicting_ = Matrix(task_count_, task_count_);
  degenerate_ = 0;
  records_.push_back(std::move(rec));
  return records_.back();
}

namespace {

double median(std::vector<double> values) {
  if (values.empty()) throw ConfigError("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

Matrix affinity_matrix(const std::vector<ConflictRecord>& records) {
  if (records.empty()) throw ConfigError("affinity_matrix: no records");
  const std::size_t t = records[0].pair_fraction.rows;
  Matrix out(t, t);
  std::vector<double> series;
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = i + 1; j < t; ++j) {
      series.clear();
      for (const auto& rec : records)
        series.push_back(rec.pair_fraction.at(i, j));
      const double m = median(series);
      out.at(i, j) = m;
      out.at(j, i) = m;
    }
  return out;
}

double variance_analysis(const std::vector<GridCell>& cells,
                         const std::string& axis) {
  if (cells.empty()) throw ConfigError("variance_analysis: empty grid");

  std::set<std::string> axis_values;
  for (const auto& cell : cells) {
    if (!cell.coords.count(axis))
      throw ConfigError("variance_analysis: cell missing axis '" + axis + "'");
    axis_values.insert(cell.coords.at(axis));
  }
  if (axis_values.size() < 2)
    throw ConfigError("variance_analysis: axis '" + axis +
                      "' has fewer than two values");

  // group cells by the values of every other axis
  std::map<std::string, std::map<std::string, double>> groups;
  for (const auto& cell : cells) {
    if (cell.epoch_fractions.empty())
      throw ConfigError("variance_analysis: cell with no epochs");
    double avg = 0.0;
    for (double f : cell.epoch_fractions) avg += f;
    avg /= static_cast<double>(cell.epoch_fractions.size());

    std::string key;
    for (const auto& [name, value] : cell.coords) {
      if (name == axis) continue;
      key += name;
      key += '=';
      key += value;
      key += ';';
    }
    const std::string& av = cell.coords.at(axis);
    if (groups[key].count(av))
      throw ConfigError("variance_analysis: duplicate cell at " + key + axis +
                        "=" + av);
    groups[key][av] = avg;
  }

  std::vector<double> variances;
  for (const auto& [key, by_axis] : groups) {
    if (by_axis.size() != axis_values.size()) {
      std::string missing;
      for (const auto& v : axis_values)
        if (!by_axis.count(v)) missing += (missing.empty() ? "" : ", ") + v;
      throw ConfigError("variance_analysis: incomplete grid at {" + key +
                        "} missing " + axis + " in {" + missing + "}");
    }
    double mean = 0.0;
    for (const auto& [v, avg] : by_axis) mean += avg;
    mean /= static_cast<double>(by_axis.size());
    double var = 0.0;  // population variance
    for (const auto& [v, avg] : by_axis) var += (avg - mean) * (avg - mean);
    var /= static_cast<double>(by_axis.size());
    variances.push_back(var);
  }
  return median(std::move(variances));
}

std::string conflict_records_csv(const std::vector<ConflictRecord>& records) {
  if (records.empty()) throw ConfigError("conflict csv: no records");
  const std::size_t t = records[0].pair_fraction.rows;
  std::ostringstream out;
  out << "epoch,fraction";
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = i + 1; j < t; ++j)
      out << ",conflict_" << i << '_' << j;
  out << '\n';
  char buf[40];
  for (const auto& rec : records) {
    out << rec.epoch;
    std::snprintf(buf, sizeof buf, "%.17g", rec.fraction);
    out << ',' << buf;
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = i + 1; j < t; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", rec.pair_fraction.at(i, j));
        out << ',' << buf;
      }
    out << '\n';
  }
  return out.str();
}

}  // namespace scalweight
