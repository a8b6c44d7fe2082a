#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include "scenepool/evaluation.hpp"

namespace scenepool {

/// Class-conditional generators of per-frame features for desk-scale runs.
enum class SynthKind {
  /// Every class shares the same per-dimension mean; classes differ only in
  /// the temporal standard deviation of each dimension.
  Variance,
  /// Classes differ in their mean, buried under heavy per-frame noise.
  NoisyMean,
  /// Well separated class means, but a fixed fraction of every video's
  /// frames is drawn from a single confusing class.
  VoteNoise,
};

std::string_view synth_kind_name(SynthKind k);
SynthKind parse_synth_kind(std::string_view name);

struct SynthOptions {
  SynthKind kind = SynthKind::Variance;
  std::size_t classes = 5;
  std::size_t videos_per_class = 10;
  std::size_t frames = 60;
  std::size_t dim = 32;
  std::uint64_t seed = 1;
  /// Per-frame noise level of NoisyMean / VoteNoise; negative selects the
  /// kind's default (5 for noisy-mean, 0.5 for vote-noise).
  double noise = -1.0;
  /// Share of confusing frames per video for VoteNoise.
  double noise_fraction = 0.4;
};

LabeledVideos synthesize(const SynthOptions& opts);

/// Writes `<dir>/features/<id>.safv` for every video and `<dir>/manifest.json`.
DatasetManifest write_dataset(const LabeledVideos& videos, const std::filesystem::path& dir);

}  // namespace scenepool
