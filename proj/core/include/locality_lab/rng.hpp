#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace locality_lab {

/// SplitMix64 finalizer, used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed for stream `stream` of a run seeded with `seed`:
/// splitmix64(seed ^ splitmix64(stream)).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Seedable random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. All derived draws are computed here rather than through
/// <random> distributions, whose algorithms are implementation-defined:
///   uniform()   = (next >> 11) * 2^-53
///   below(n)    = rejection sampling on the top bits (no modulo bias)
///   normal()    = Marsaglia polar method, spare value cached
/// so a (seed, call sequence) pair reproduces bit-for-bit on any conforming
/// toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent stream keyed by `stream`, derived from this stream's seed
  /// (not its state), so it does not depend on how many draws were made.
  Rng substream(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  /// Uniform integer on [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  /// Standard normal.
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace locality_lab
