#include "scalweight/pbt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <thread>

#include <json.hpp>

#include "scalweight/error.hpp"
#include "scalweight/io.hpp"

namespace scalweight {

void PbtConfig::validate() const {
  if (population < 2)
    throw ConfigError("pbt: population of 1 cannot exploit itself");
  if (e_ready == 0) throw ConfigError("pbt: e_ready must be positive");
  if (e_ready > e_total) throw ConfigError("pbt: e_ready exceeds e_total");
  if (!(exploit_fraction > 0.0) || exploit_fraction > 0.5)
    throw ConfigError("pbt: exploit fraction must lie in (0, 0.5]");
  if (!(perturb_factors[0] > 0.0) || !(perturb_factors[0] < 1.0) ||
      !(perturb_factors[1] > 1.0))
    throw ConfigError("pbt: perturb factors must straddle 1");
  if (resample_probability < 0.0 || resample_probability > 1.0)
    throw ConfigError("pbt: resample probability outside [0, 1]");
  if (!(holdout_fraction > 0.0) || !(holdout_fraction < 1.0))
    throw ConfigError("pbt: holdout fraction outside (0, 1)");
  if (jobs == 0) throw ConfigError("pbt: jobs must be positive");
}

std::size_t pbt_replace_count(const PbtConfig& cfg) {
  return static_cast<std::size_t>(std::ceil(
      cfg.exploit_fraction * static_cast<double>(cfg.population)));
}

std::string to_string(PbtEventKind kind) {
  switch (kind) {
    case PbtEventKind::Init: return "init";
    case PbtEventKind::ExploitCopy: return "exploit-copy";
    case PbtEventKind::ExplorePerturb: return "explore-perturb";
  }
  return "?";
}

std::vector<std::size_t> pbt_rank(
    const std::vector<PopulationMember>& members) {
  std::vector<std::size_t> ids;
  for (const auto& m : members)
    if (m.alive && m.has_score) ids.push_back(m.id);
  std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    if (members[a].score != members[b].score)
      return members[a].score > members[b].score;
    return a < b;
  });
  return ids;
}

std::vector<std::pair<std::size_t, std::size_t>> pbt_exploit(
    const std::vector<PopulationMember>& members, const PbtConfig& cfg,
    Rng& rng) {
  const auto ranked = pbt_rank(members);
  const std::size_t k = pbt_replace_count(cfg);
  if (ranked.size() <= k) return {};  // too few live members to exploit
  std::vector<std::size_t> top(ranked.begin(), ranked.begin() + k);
  std::vector<std::size_t> losers(ranked.end() - k, ranked.end());
  std::sort(losers.begin(), losers.end());
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(k);
  for (std::size_t loser : losers)
    out.emplace_back(loser, top[rng.uniform_index(top.size())]);
  return out;
}

WeightVector pbt_explore(const WeightVector& weights, Rng& rng,
                         const PbtConfig& cfg) {
  std::vector<double> raw = weights.values();
  for (auto& v : raw) {
    if (rng.uniform() < cfg.resample_probability)
      v = rng.uniform(0.1, 1.0);
    else
      v *= cfg.perturb_factors[rng.uniform_index(2)];
  }
  return simplex_project(raw);
}

namespace {

// Exploit transfers model and optimizer state plus the weight vector; the
// loser keeps its own rng streams so future batches stay decorrelated.
void adopt_snapshot(Trainer& dst, const Checkpoint& ck) {
  auto values = dst.model().values();
  if (values.size() != ck.params.size())
    throw ConfigError("pbt: snapshot parameter count mismatch");
  std::copy(ck.params.begin(), ck.params.end(), values.begin());
  auto& opt = dst.optimizer();
  if (opt.slot_count() != ck.optimizer_slots.size())
    throw ConfigError("pbt: snapshot optimizer state mismatch");
  for (std::size_t i = 0; i < ck.optimizer_slots.size(); ++i) {
    auto slot = opt.slot(i);
    std::copy(ck.optimizer_slots[i].begin(), ck.optimizer_slots[i].end(),
              slot.begin());
  }
  opt.set_step_index(ck.optimizer_step);
}

std::string snapshot_name(std::size_t member, std::size_t epoch) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "member_%03zu_epoch_%04zu.ckpt", member,
                epoch);
  return buf;
}

}  // namespace

PbtResult run_pbt(const MultiSourceDataset& train, const ModelSpec& spec,
                  const TrainConfig& base, const PbtConfig& cfg) {
  cfg.validate();
  if (base.method != Method::Scalarization)
    throw ConfigError("pbt: the search perturbs fixed sampling weights");
  const std::size_t t_count = train.task_count();

  auto [fit, rank_split] = split_dataset(train, cfg.holdout_fraction, cfg.seed);
  Rng scheduler = Rng::stream(cfg.seed, 1);

  PbtResult result;
  std::vector<std::unique_ptr<Trainer>> trainers;
  for (std::size_t m = 0; m < cfg.population; ++m) {
    PopulationMember member;
    member.id = m;
    member.weights = simplex_project(scheduler.dirichlet_uniform(t_count));
    member.history.push_back({0, PbtEventKind::Init, 0, member.weights});
    TrainConfig mc = base;
    mc.weights = member.weights;
    mc.schedule.clear();
    mc.epochs = cfg.e_total;
    mc.seed = cfg.seed + 7919 * (m + 1);
    trainers.push_back(std::make_unique<Trainer>(fit, nullptr, spec, mc));
    result.population.push_back(std::move(member));
  }
  result.explored_configs = cfg.population;

  if (!cfg.checkpoint_dir.empty()) ensure_directory(cfg.checkpoint_dir);

  auto& members = result.population;
  auto train_generation = [&](std::size_t epochs_to_run) {
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
      for (;;) {
        const std::size_t m = next.fetch_add(1);
        if (m >= trainers.size()) return;
        if (!members[m].alive) continue;
        try {
          trainers[m]->run_epochs(epochs_to_run);
        } catch (const std::exception& e) {
          members[m].alive = false;
          members[m].error = e.what();
        }
      }
    };
    const std::size_t n_threads = std::min(cfg.jobs, cfg.population);
    if (n_threads <= 1) {
      work();
      return;
    }
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  };

  std::size_t epochs_done = 0;
  while (epochs_done < cfg.e_total) {
    const std::size_t g = std::min(cfg.e_ready, cfg.e_total - epochs_done);
    train_generation(g);
    epochs_done += g;

    for (std::size_t m = 0; m < cfg.population; ++m) {
      if (!members[m].alive) continue;
      const double score = trainers[m]->mean_oriented_metric(rank_split);
      if (!std::isfinite(score)) {
        members[m].alive = false;
        members[m].error = "non-finite holdout score";
        continue;
      }
      members[m].score = score;
      members[m].has_score = true;
    }

    if (epochs_done % cfg.e_ready == 0) {
      ++result.sync_count;
      const auto replacements = pbt_exploit(members, cfg, scheduler);
      std::map<std::size_t, Checkpoint> snapshots;
      for (const auto& [loser, winner] : replacements)
        if (!snapshots.count(winner)) {
          Checkpoint ck = checkpoint_from_trainer(*trainers[winner], winner);
          ck.score = members[winner].score;
          ck.has_score = true;
          if (!cfg.checkpoint_dir.empty())
            save_checkpoint(std::filesystem::path(cfg.checkpoint_dir) /
                                snapshot_name(winner, epochs_done),
                            ck);
          // round-trip through the wire format: state moves between members
          // only as checkpoint bytes
          snapshots.emplace(winner,
                            parse_checkpoint(serialize_checkpoint(ck)));
        }
      for (const auto& [loser, winner] : replacements) {
        const Checkpoint& ck = snapshots.at(winner);
        adopt_snapshot(*trainers[loser], ck);
        const WeightVector source_weights(ck.weights);
        members[loser].history.push_back(
            {epochs_done, PbtEventKind::ExploitCopy, winner, source_weights});
        const WeightVector perturbed =
            pbt_explore(source_weights, scheduler, cfg);
        members[loser].weights = perturbed;
        trainers[loser]->set_weights(perturbed);
        members[loser].history.push_back(
            {epochs_done, PbtEventKind::ExplorePerturb, 0, perturbed});
        ++result.explored_configs;
      }
      if (epochs_done == cfg.e_total) {
        result.final_replacements = replacements;
        result.final_winner_snapshots = std::move(snapshots);
      }
    }
  }

  for (std::size_t m = 0; m < cfg.population; ++m) {
    members[m].model = trainers[m]->model();
    if (!members[m].alive) members[m].error += " (member " +
                                               std::to_string(m) + ")";
  }
  for (const auto& member : members)
    if (!member.alive) result.errors.push_back(member.error);

  const auto ranked = pbt_rank(members);
  if (ranked.empty())
    throw DivergenceError("pbt: every population member failed");
  result.best_member = ranked[0];
  result.best_score = members[ranked[0]].score;
  result.policy = backtrack_policy(members, result.best_member, cfg.e_total);
  return result;
}

std::vector<WeightSegment> backtrack_policy(
    const std::vector<PopulationMember>& members, std::size_t best_member,
    std::size_t e_total) {
  if (best_member >= members.size())
    throw ConfigError("pbt: best member out of range");
  std::vector<WeightSegment> out;
  const PopulationMember* cur = &members[best_member];
  std::ptrdiff_t i = static_cast<std::ptrdiff_t>(cur->history.size()) - 1;
  double end = static_cast<double>(e_total);
  for (;;) {
    if (i < 0)
      throw ConfigError("pbt: broken history chain: member " +
                        std::to_string(cur->id) + " has no initial event");
    const PbtEvent& ev = cur->history[static_cast<std::size_t>(i)];
    if (ev.kind == PbtEventKind::ExploitCopy) {
      if (ev.source >= members.size())
        throw ConfigError("pbt: broken history chain: member " +
                          std::to_string(cur->id) + " copied from missing member " +
                          std::to_string(ev.source));
      const PopulationMember& src = members[ev.source];
      std::ptrdiff_t j = static_cast<std::ptrdiff_t>(src.history.size()) - 1;
      while (j >= 0 && src.history[static_cast<std::size_t>(j)].epoch >= ev.epoch)
        --j;
      if (j < 0)
        throw ConfigError("pbt: broken history chain: member " +
                          std::to_string(ev.source) +
                          " has no history before epoch " +
                          std::to_string(ev.epoch));
      cur = &src;
      i = j;
      continue;
    }
    const double start = static_cast<double>(ev.epoch);
    if (start < end) {
      out.push_back({start, end, ev.weights});
      end = start;
    }
    if (ev.kind == PbtEventKind::Init) break;
    --i;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<WeightSegment> stretch_schedule(
    const std::vector<WeightSegment>& schedule, std::size_t target_epochs) {
  if (schedule.empty()) throw ConfigError("pbt: empty schedule");
  if (schedule.front().start_epoch != 0.0)
    throw ConfigError("pbt: schedule must start at epoch 0");
  if (target_epochs == 0) throw ConfigError("pbt: zero retraining epochs");
  const double span = schedule.back().end_epoch;
  if (!(span > 0.0)) throw ConfigError("pbt: degenerate schedule span");
  const double factor = static_cast<double>(target_epochs) / span;
  std::vector<WeightSegment> out = schedule;
  for (auto& seg : out) {
    seg.start_epoch *= factor;
    seg.end_epoch *= factor;
  }
  out.front().start_epoch = 0.0;
  out.back().end_epoch = static_cast<double>(target_epochs);
  return out;
}

RunResult retrain_with_policy(const std::vector<WeightSegment>& policy,
                              const MultiSourceDataset& train,
                              const MultiSourceDataset* eval,
                              const ModelSpec& spec, TrainConfig base,
                              std::size_t epochs) {
  if (base.method != Method::Scalarization)
    throw ConfigError("pbt: retraining uses fixed-weight training");
  base.schedule = stretch_schedule(policy, epochs);
  base.weights = WeightVector();
  base.epochs = epochs;
  if (base.optimizer.total_epochs < epochs) base.optimizer.total_epochs = epochs;
  return train_run(train, eval, spec, base);
}

std::string pbt_history_json(const PbtResult& result) {
  nlohmann::json doc;
  doc["best_member"] = result.best_member;
  doc["best_score"] = result.best_score;
  doc["explored_configs"] = result.explored_configs;
  doc["sync_count"] = result.sync_count;
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : result.population) {
    nlohmann::json jm;
    jm["id"] = m.id;
    jm["alive"] = m.alive;
    if (!m.alive) jm["error"] = m.error;
    if (m.has_score) jm["score"] = m.score;
    jm["weights"] = m.weights.values();
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& ev : m.history) {
      nlohmann::json je;
      je["epoch"] = ev.epoch;
      je["event"] = to_string(ev.kind);
      if (ev.kind == PbtEventKind::ExploitCopy) je["source"] = ev.source;
      je["weights"] = ev.weights.values();
      hist.push_back(std::move(je));
    }
    jm["history"] = std::move(hist);
    members.push_back(std::move(jm));
  }
  doc["members"] = std::move(members);
  nlohmann::json policy = nlohmann::json::array();
  for (const auto& seg : result.policy) {
    nlohmann::json js;
    js["start_epoch"] = seg.start_epoch;
    js["end_epoch"] = seg.end_epoch;
    js["weights"] = seg.weights.values();
    policy.push_back(std::move(js));
  }
  doc["policy"] = std::move(policy);
  return doc.dump(2) + "\n";
}

}  // namespace scalweight
