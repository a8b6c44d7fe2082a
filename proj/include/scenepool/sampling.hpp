#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace scenepool {

/// Seeded generator behind every randomized routine in the library.
///
/// The algorithm is fixed so runs are reproducible across platforms and
/// against other implementations:
///   - engine: 64-bit Mersenne Twister (std::mt19937_64, seeded with the
///     seed value directly);
///   - below(n): draw raw 64-bit words, reject those >= 2^64 - (2^64 mod n),
///     return word mod n;
///   - uniform(): (word >> 11) * 2^-53, in [0, 1);
///   - normal(): Box-Muller on two uniform() draws, caching the second value.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  std::uint64_t below(std::uint64_t bound);
  double uniform();
  double normal();

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// splitmix64 of (base, stream); used to derive independent per-item seeds.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream);

enum class SamplingMode { Linear, Random };

struct FrameSelection {
  std::vector<std::size_t> indices;  ///< 1-based, strictly increasing
  SamplingMode mode = SamplingMode::Linear;
  std::optional<std::uint64_t> seed;
};

/// n frame indices evenly spread over [1, total], rounded half up. n == 1
/// picks the centre frame. Requires 1 <= n <= total.
FrameSelection linspace_indices(std::size_t total, std::size_t n);

/// n distinct indices drawn uniformly without replacement (partial
/// Fisher-Yates driven by Rng), returned sorted. Requires 1 <= n <= total.
FrameSelection random_indices(std::size_t total, std::size_t n, std::uint64_t seed);

}  // namespace scenepool
