#ifndef SCALWEIGHT_RNG_HPP
#define SCALWEIGHT_RNG_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace scalweight {

// Deterministic xoshiro256** generator. All randomness in the library flows
// through this type so that runs reproduce bit-for-bit across platforms and
// so generator state can be checkpointed as four 64-bit words.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream derived from (seed, stream_id). Streams with distinct
  // ids never share state; consuming one does not advance another.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller; consumes exactly two 64-bit draws.
  double normal();
  // Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);
  // Draws an index from a normalized discrete distribution.
  std::size_t categorical(std::span<const double> probs);
  // Dirichlet(1, ..., 1): uniform over the probability simplex.
  std::vector<double> dirichlet_uniform(std::size_t dim);
  // In-place Fisher-Yates shuffle of [0, n) identity permutation.
  std::vector<std::size_t> permutation(std::size_t n);

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

  bool operator==(const Rng& other) const = default;

 private:
  Rng() = default;
  std::uint64_t s_[4] = {0, 0, 0, 0};
};

}  // namespace scalweight

#endif
