#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "scenepool/core.hpp"
#include "scenepool/sampling.hpp"
#include "scenepool/svm.hpp"
#include "scenepool/vlad.hpp"

namespace scenepool {

/// Per-frame features of a whole dataset, in manifest order.
struct LabeledVideos {
  std::string name;
  LabelSpace labels;
  std::vector<std::string> ids;
  std::vector<int> classes;
  std::vector<FeatureMatrix> features;

  std::size_t size() const { return features.size(); }
};

/// Validates the manifest and reads every feature file it lists.
LabeledVideos load_videos(const DatasetManifest& manifest);

/// How a video descriptor is built from its frames.
struct DescriptorRecipe {
  std::vector<Measure> measures{Measure::Mean};
  std::size_t n_frames = 0;  ///< 0 uses every frame; longer requests are capped
  SamplingMode sampling = SamplingMode::Linear;
  std::uint64_t seed = 0;  ///< random sampling draws with mix_seed(seed, video index)
  Normalization normalization = Normalization::PerBlock;
  const VladModel* vlad = nullptr;  ///< required when measures contain vlad
};

VideoDescriptor build_descriptor(const FeatureMatrix& X, const DescriptorRecipe& recipe,
                                 std::size_t video_index);

/// Aggregated descriptors of a dataset, one row per video.
struct DescriptorSet {
  LabelSpace labels;
  std::vector<std::string> ids;
  std::vector<int> classes;
  Matrix descriptors;
  std::vector<DescriptorBlock> blocks;
  Normalization normalization = Normalization::PerBlock;
};

DescriptorSet build_descriptor_set(const LabeledVideos& videos, const DescriptorRecipe& recipe);

struct EvaluationReport {
  LabelSpace labels;
  double overall_accuracy = 0.0;           ///< percent
  std::vector<double> per_class_accuracy;  ///< percent, label-space order
  std::vector<std::vector<std::int64_t>> confusion;  ///< [true][predicted]
  std::vector<int> predictions;                      ///< per video, input order
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::string> warnings;
};

/// Builds the accuracy figures from true/predicted class ids.
EvaluationReport make_report(const LabelSpace& labels, std::span<const int> truth,
                             std::span<const int> predicted);

/// Training rows of fold `held_out`: every index in [0, n) except it.
std::vector<std::size_t> lovo_training_indices(std::size_t n, std::size_t held_out);

/// Leave-one-video-out over descriptor rows: each video is predicted by a
/// one-vs-rest model trained on all other videos.
EvaluationReport lovo_evaluate(const LabelSpace& labels, std::span<const int> classes,
                               const Matrix& descriptors, const SvmParams& params);

EvaluationReport lovo_evaluate(const LabelSpace& labels, std::span<const int> classes,
                               std::span<const VideoDescriptor> descriptors,
                               const SvmParams& params);

/// Mode of the per-frame predictions. Ties go to the candidate with the
/// greatest decision value summed over frames, then the lowest class id.
int majority_vote_classify(const OvrSvmModel& frame_model, const FeatureMatrix& X);

/// Same rule applied to precomputed per-frame predictions.
int majority_vote(std::span<const Prediction> frame_predictions);

/// LOVO where a per-frame model is trained on every (L2 normalized) frame of
/// the training videos and the held-out video is classified by majority vote
/// over `n_frames` linearly spaced frames (capped at its length).
EvaluationReport lovo_majority_vote(const LabeledVideos& videos, std::size_t n_frames,
                                    const SvmParams& params);

struct TrialPoint {
  std::size_t n = 0;
  std::vector<double> accuracies;  ///< one per trial, percent
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double std = 0.0;  ///< population standard deviation over trials
};

struct TrialCurve {
  std::vector<TrialPoint> points;
  std::size_t trials = 0;
  std::uint64_t base_seed = 0;
};

/// For each n and trial t, draws n random frames per video (seeded from
/// base_seed + t and the video position; videos shorter than n use all their
/// frames), mean-pools with L2 normalization and runs LOVO.
TrialCurve frames_vs_accuracy(const LabeledVideos& videos, std::span<const std::size_t> n_list,
                              std::size_t trials, std::uint64_t base_seed,
                              const SvmParams& params);

/// Seed used for video `video` in trial `trial`.
std::uint64_t trial_video_seed(std::uint64_t base_seed, std::size_t trial, std::size_t video);

nlohmann::json report_to_json(const EvaluationReport& report);
/// Aligned per-class accuracy table followed by the confusion matrix.
std::string format_report_table(const EvaluationReport& report);
nlohmann::json curve_to_json(const TrialCurve& curve);
/// Tab separated columns: n, mean, min, max, std.
std::string format_curve_tsv(const TrialCurve& curve);

}  // namespace scenepool
