#pragma once

#include <cstdint>
#include <random>

namespace cinexai {

/// Independent random streams derived from the single run seed.
enum class Stream : std::uint64_t {
  phantom = 1,
  disease_assignment = 2,
  init = 3,
  shuffle = 4,
  augment = 5,
  noise = 6,
  split = 7,
};

/// Seed for stream `stream`, counter `index`: two rounds of splitmix64 over
/// (master, stream, index). Pure function; never reads global state.
std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index = 0);

/// Deterministic generator with portable uniform/normal transforms (the
/// standard library distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Standard normal via Box-Muller.
  double normal();

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace cinexai
