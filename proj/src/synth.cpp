#include "scenepool/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "scenepool/io.hpp"
#include "scenepool/sampling.hpp"

namespace scenepool {

std::string_view synth_kind_name(SynthKind k) {
  switch (k) {
    case SynthKind::Variance: return "variance";
    case SynthKind::NoisyMean: return "noisy-mean";
    case SynthKind::VoteNoise: return "vote-noise";
  }
  return "variance";
}

SynthKind parse_synth_kind(std::string_view name) {
  for (auto k : {SynthKind::Variance, SynthKind::NoisyMean, SynthKind::VoteNoise})
    if (synth_kind_name(k) == name) return k;
  throw InvalidArgument("unknown synthetic dataset kind '" + std::string(name) +
                        "' (expected variance, noisy-mean or vote-noise)");
}

namespace {

std::string numbered(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%02zu", prefix, i);
  return buf;
}

}  // namespace

LabeledVideos synthesize(const SynthOptions& opts) {
  if (opts.classes < 2) throw InvalidArgument("synthetic dataset needs at least 2 classes");
  if (opts.videos_per_class < 1 || opts.frames < 1 || opts.dim < 1)
    throw InvalidArgument("synthetic dataset sizes must be positive");
  if (opts.noise_fraction < 0.0 || opts.noise_fraction >= 1.0)
    throw InvalidArgument("noise fraction must lie in [0, 1)");

  const double noise =
      opts.noise >= 0.0 ? opts.noise : (opts.kind == SynthKind::NoisyMean ? 5.0 : 0.5);
  const auto d = static_cast<Index>(opts.dim);
  const auto f = static_cast<Index>(opts.frames);
  Rng rng(opts.seed);

  // Class-level parameters.
  Vector shared_mean(d);
  for (Index j = 0; j < d; ++j) shared_mean[j] = 5.0 + 5.0 * rng.uniform();
  Matrix class_param(static_cast<Index>(opts.classes), d);
  for (Index c = 0; c < class_param.rows(); ++c)
    for (Index j = 0; j < d; ++j)
      class_param(c, j) = opts.kind == SynthKind::Variance ? 0.3 + 2.7 * rng.uniform() : rng.normal();

  LabeledVideos out;
  out.name = "synthetic-" + std::string(synth_kind_name(opts.kind));
  std::vector<std::string> names;
  for (std::size_t c = 0; c < opts.classes; ++c) names.push_back(numbered("class_", c));
  out.labels = LabelSpace(names);

  for (std::size_t c = 0; c < opts.classes; ++c) {
    for (std::size_t v = 0; v < opts.videos_per_class; ++v) {
      Matrix X(f, d);
      const auto ci = static_cast<Index>(c);
      switch (opts.kind) {
        case SynthKind::Variance:
          for (Index i = 0; i < f; ++i)
            for (Index j = 0; j < d; ++j)
              X(i, j) = shared_mean[j] + class_param(ci, j) * rng.normal();
          break;
        case SynthKind::NoisyMean:
          for (Index i = 0; i < f; ++i)
            for (Index j = 0; j < d; ++j) X(i, j) = class_param(ci, j) + noise * rng.normal();
          break;
        case SynthKind::VoteNoise: {
          const auto confuser = static_cast<Index>((c + 1) % opts.classes);
          const auto n_noisy = static_cast<Index>(std::llround(opts.noise_fraction * static_cast<double>(f)));
          std::vector<Index> order(static_cast<std::size_t>(f));
          std::iota(order.begin(), order.end(), Index{0});
          for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
          for (Index r = 0; r < f; ++r) {
            const Index row = order[static_cast<std::size_t>(r)];
            const Index source = r < n_noisy ? confuser : ci;
            for (Index j = 0; j < d; ++j)
              X(row, j) = class_param(source, j) + noise * rng.normal();
          }
          break;
        }
      }
      out.ids.push_back(numbered((names[c] + "_v").c_str(), v));
      out.classes.push_back(static_cast<int>(c));
      out.features.emplace_back(std::move(X));
    }
  }
  return out;
}

DatasetManifest write_dataset(const LabeledVideos& videos, const std::filesystem::path& dir) {
  DatasetManifest m;
  m.name = videos.name;
  m.label_space = videos.labels;
  m.base_dir = dir;
  if (!videos.features.empty()) m.feature_dim = videos.features.front().dim();
  for (std::size_t i = 0; i < videos.size(); ++i) {
    VideoRecord rec;
    rec.id = videos.ids[i];
    rec.class_name = videos.labels.name(videos.classes[i]);
    rec.total_frames = videos.features[i].frames();
    rec.feature_path = std::filesystem::path("features") / (videos.ids[i] + ".safv");
    write_feature_file(dir / rec.feature_path, videos.features[i]);
    m.videos.push_back(std::move(rec));
  }
  write_manifest(dir / "manifest.json", m);
  return m;
}

}  // namespace scenepool
