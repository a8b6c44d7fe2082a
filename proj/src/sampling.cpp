#include "scenepool/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "scenepool/error.hpp"

namespace scenepool {

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw InvalidArgument("Rng::below requires a positive bound");
  // 2^64 mod bound, computed without overflow.
  const std::uint64_t excess = (std::numeric_limits<std::uint64_t>::max() % bound + 1) % bound;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - excess;
  std::uint64_t word = engine_();
  while (excess != 0 && word > limit) word = engine_();
  return word % bound;
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(theta);
  return r * std::cos(theta);
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

void check_request(std::size_t total, std::size_t n) {
  if (n == 0) throw InvalidArgument("requested frame count must be at least 1");
  if (n > total)
    throw InvalidArgument("requested " + std::to_string(n) + " frames but the video has only " +
                          std::to_string(total));
}

}  // namespace

FrameSelection linspace_indices(std::size_t total, std::size_t n) {
  check_request(total, n);
  FrameSelection sel;
  sel.mode = SamplingMode::Linear;
  if (n == 1) {
    // round((1 + total) / 2), halves up
    sel.indices.push_back((total + 2) / 2);
    return sel;
  }
  // round(1 + j * (total - 1) / (n - 1)) in exact integer arithmetic.
  const std::uint64_t span = total - 1;
  const std::uint64_t steps = n - 1;
  sel.indices.reserve(n);
  for (std::uint64_t j = 0; j < n; ++j) {
    std::size_t idx = 1 + static_cast<std::size_t>((2 * j * span + steps) / (2 * steps));
    if (!sel.indices.empty() && idx <= sel.indices.back()) idx = sel.indices.back() + 1;
    sel.indices.push_back(idx);
  }
  return sel;
}

FrameSelection random_indices(std::size_t total, std::size_t n, std::uint64_t seed) {
  check_request(total, n);
  std::vector<std::size_t> pool(total);
  std::iota(pool.begin(), pool.end(), std::size_t{1});
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(total - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  std::sort(pool.begin(), pool.end());
  return FrameSelection{std::move(pool), SamplingMode::Random, seed};
}

}  // namespace scenepool
