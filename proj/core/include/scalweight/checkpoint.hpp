#ifndef SCALWEIGHT_CHECKPOINT_HPP
#define SCALWEIGHT_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "scalweight/model.hpp"
#include "scalweight/trainer.hpp"

namespace scalweight {

// Everything needed to resume a run bit-exactly: parameters, optimizer
// state, RNG streams, sampling weights, and adaptive loss state. The binary
// layout is: "SCWT" magic, u32 LE format version, u64 LE metadata length,
// UTF-8 JSON metadata with sorted keys, then the parameter vector and each
// optimizer slot as little-endian f64 blobs in canonical order. Loading and
// saving again reproduces the bytes exactly.
struct Checkpoint {
  std::size_t member_id = 0;
  std::size_t epoch = 0;
  ModelSpec spec;
  std::vector<double> params;
  std::size_t optimizer_step = 0;
  std::vector<std::vector<double>> optimizer_slots;
  std::vector<double> weights;      // sampling weights; may be empty
  std::vector<double> adaptive_s;   // adaptive methods only; may be empty
  std::vector<std::string> rng_states;
  double score = 0.0;  // meaningful only when has_score
  bool has_score = false;

  bool operator==(const Checkpoint&) const = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& ck);
Checkpoint parse_checkpoint(std::string_view bytes);  // throws IoError

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Snapshot of a trainer paused at an epoch boundary.
Checkpoint checkpoint_from_trainer(const Trainer& trainer,
                                   std::size_t member_id = 0);

// Restores the snapshot into a trainer built from the same dataset, spec,
// and config. Resumed training continues bit-identically.
void restore_trainer(Trainer& trainer, const Checkpoint& ck);

}  // namespace scalweight

#endif
