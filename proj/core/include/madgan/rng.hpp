#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>

namespace madgan {

/// Seed derivation: SplitMix64 finalizer chained over the key words.
///
///   h = mix(seed); for each word w: h = mix(h ^ (w + 0x9e3779b97f4a7c15))
///
/// where mix() is the SplitMix64 output function. All random streams in the
/// library are keyed this way, e.g. (seed, purpose, step, generator), so a
/// stream never depends on how many numbers another stream consumed.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> key);

/// Stream purposes used as the first key word.
enum class Stream : std::uint64_t {
  kDataset = 1,
  kRealBatch = 2,
  kDiscNoise = 3,
  kGenNoise = 4,
  kInit = 5,
  kEvalReal = 6,
  kEvalGen = 7,
  kShard = 8,
  kPool = 9,
};

/// Portable random source: std::mt19937_64 engine with distributions
/// implemented here rather than by the standard library, so the produced
/// sequence is identical on every platform.
///
///  * uniform():      53 high bits of one draw, in [0, 1)
///  * uniform_open(): (bits + 0.5) * 2^-53, strictly inside (0, 1)
///  * normal():       Box-Muller on two uniform_open() draws; the second
///                    variate of each pair is cached and returned next.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform_open();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Uniform integer in [0, n) by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t n);

  // Textual engine state plus the cached normal; restores bit-exactly.
  std::string serialize() const;
  void deserialize(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_ && a.has_spare_ == b.has_spare_ && a.spare_ == b.spare_;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace madgan
