#include "scalweight/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "scalweight/error.hpp"

namespace scalweight {
namespace {

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

// splitmix64, used only to expand seeds into engine state.
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t x = seed;
  for (auto& w : s_) w = splitmix64(x);
  // xoshiro must not start from the all-zero state.
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

Rng Rng::stream(std::uint64_t seed, std::uint64_t stream_id) {
  std::uint64_t x = seed;
  std::uint64_t a = splitmix64(x);
  std::uint64_t y = stream_id ^ 0xd1b54a32d192ed03ULL;
  std::uint64_t b = splitmix64(y);
  return Rng(a ^ rotl(b, 17) ^ (stream_id + 0x2545f4914f6cdd1dULL));
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double Rng::normal() {
  double u1 = uniform();
  double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw ConfigError("uniform_index: empty range");
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t bound = n;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return static_cast<std::size_t>(x % bound);
}

std::size_t Rng::categorical(std::span<const double> probs) {
  if (probs.empty()) throw ConfigError("categorical: empty distribution");
  const double u = uniform();
  double cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return i;
  }
  return probs.size() - 1;  // guard against rounding in the cumulative sum
}

std::vector<double> Rng::dirichlet_uniform(std::size_t dim) {
  if (dim == 0) throw ConfigError("dirichlet_uniform: zero dimension");
  std::vector<double> draws(dim);
  double total = 0.0;
  for (auto& d : draws) {
    double u = uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    d = -std::log(u);  // Exp(1)
    total += d;
  }
  for (auto& d : draws) d /= total;
  return draws;
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = uniform_index(i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << std::hex;
  for (std::size_t i = 0; i < 4; ++i) {
    if (i) os << ':';
    os << s_[i];
  }
  return os.str();
}

Rng Rng::deserialize(const std::string& text) {
  Rng r;
  std::istringstream is(text);
  is >> std::hex;
  for (std::size_t i = 0; i < 4; ++i) {
    char sep = 0;
    if (i && !(is >> sep && sep == ':'))
      throw IoError("rng state: malformed separator");
    if (!(is >> r.s_[i])) throw IoError("rng state: malformed word");
  }
  return r;
}

}  // namespace scalweight
