#ifndef SCALWEIGHT_PBT_HPP
#define SCALWEIGHT_PBT_HPP

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "scalweight/checkpoint.hpp"
#include "scalweight/dataset.hpp"
#include "scalweight/rng.hpp"
#include "scalweight/trainer.hpp"
#include "scalweight/weighting.hpp"

namespace scalweight {

// Population search over sampling weights: N members train in lockstep
// generations; every e_ready epochs the bottom ceil(Q*N) members by holdout
// score adopt the checkpoint and weights of a uniformly drawn top member,
// then perturb the copied weights.
struct PbtConfig {
  std::size_t population = 8;  // N
  std::size_t e_ready = 2;
  double exploit_fraction = 0.25;  // Q
  std::size_t e_total = 20;
  std::array<double, 2> perturb_factors{0.8, 1.25};
  double resample_probability = 0.25;
  double holdout_fraction = 0.3;  // ranking split carved off the train data
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  std::string checkpoint_dir;  // when set, sync snapshots are written here

  void validate() const;  // throws ConfigError
};

// ceil(Q * N): members replaced per sync.
std::size_t pbt_replace_count(const PbtConfig& cfg);

enum class PbtEventKind { Init, ExploitCopy, ExplorePerturb };
std::string to_string(PbtEventKind kind);

// One weight-history entry. A sync appends an ExploitCopy (carrying the
// source member and its copied weights) immediately followed by an
// ExplorePerturb at the same epoch with the weights actually in force
// afterwards; epochs strictly increase between syncs.
struct PbtEvent {
  std::size_t epoch = 0;
  PbtEventKind kind = PbtEventKind::Init;
  std::size_t source = 0;  // ExploitCopy only: member copied from
  WeightVector weights;
};

struct PopulationMember {
  std::size_t id = 0;
  WeightVector weights;
  std::vector<PbtEvent> history;
  double score = 0.0;  // latest holdout mean oriented metric
  bool has_score = false;
  bool alive = true;
  std::string error;  // dead members: what killed the worker
  ModelParams model;  // final parameters
};

struct PbtResult {
  std::vector<PopulationMember> population;
  std::size_t best_member = 0;
  double best_score = 0.0;
  std::vector<WeightSegment> policy;  // backtracked, partitions [0, e_total]
  std::size_t explored_configs = 0;   // N + replacements across all syncs
  std::size_t sync_count = 0;
  // last sync's replacements and the winner snapshots they copied, kept so
  // copy bit-exactness stays externally checkable
  std::vector<std::pair<std::size_t, std::size_t>> final_replacements;
  std::map<std::size_t, Checkpoint> final_winner_snapshots;
  std::vector<std::string> errors;
};

// Alive scored members, best first; ties broken toward the lower id.
std::vector<std::size_t> pbt_rank(const std::vector<PopulationMember>& members);

// (loser, winner) pairs for one sync: the bottom ceil(Q*N) members each draw
// a winner uniformly (with replacement) from the top ceil(Q*N). Losers are
// processed in ascending id order; one winner draw is consumed per loser.
std::vector<std::pair<std::size_t, std::size_t>> pbt_exploit(
    const std::vector<PopulationMember>& members, const PbtConfig& cfg,
    Rng& rng);

// Per coordinate: with probability resample_probability redraw from
// U(0.1, 1.0), otherwise multiply by a factor drawn uniformly from the two
// perturb factors; then project back onto the simplex.
WeightVector pbt_explore(const WeightVector& weights, Rng& rng,
                         const PbtConfig& cfg);

// Runs the search. `base` supplies optimizer/batch settings and must use the
// fixed-weight method; its epoch count is ignored in favor of cfg.e_total.
PbtResult run_pbt(const MultiSourceDataset& train, const ModelSpec& spec,
                  const TrainConfig& base, const PbtConfig& cfg);

// Weight schedule actually in force along the best member's ancestry,
// following exploit copies backward to an initial member. The segments
// partition [0, e_total].
std::vector<WeightSegment> backtrack_policy(
    const std::vector<PopulationMember>& members, std::size_t best_member,
    std::size_t e_total);

// Rescales a schedule over [0, E] onto [0, target_epochs] proportionally.
std::vector<WeightSegment> stretch_schedule(
    const std::vector<WeightSegment>& schedule, std::size_t target_epochs);

// Retrains from scratch on the full training data under the (stretched)
// schedule. A single-segment schedule reduces to plain fixed-weight training.
RunResult retrain_with_policy(const std::vector<WeightSegment>& policy,
                              const MultiSourceDataset& train,
                              const MultiSourceDataset* eval,
                              const ModelSpec& spec, TrainConfig base,
                              std::size_t epochs);

// Full population history as a JSON document.
std::string pbt_history_json(const PbtResult& result);

}  // namespace scalweight

#endif
