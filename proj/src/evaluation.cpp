#include "scenepool/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <memory>
#include <numeric>
#include <sstream>

#include "scenepool/aggregation.hpp"
#include "scenepool/io.hpp"

namespace scenepool {

LabeledVideos load_videos(const DatasetManifest& manifest) {
  require_valid(manifest);
  LabeledVideos out;
  out.name = manifest.name;
  out.labels = manifest.label_space;
  for (const auto& v : manifest.videos) {
    FeatureMatrix X = read_feature_file(manifest.resolve(v));
    if (manifest.feature_dim && X.dim() != *manifest.feature_dim)
      throw DimensionMismatch("video '" + v.id + "' has " + std::to_string(X.dim()) +
                              "-dim features, manifest declares " +
                              std::to_string(*manifest.feature_dim));
    if (!out.features.empty() && X.dim() != out.features.front().dim())
      throw DimensionMismatch("video '" + v.id + "' feature dimension differs from the first video");
    out.ids.push_back(v.id);
    out.classes.push_back(manifest.class_id(v));
    out.features.push_back(std::move(X));
  }
  return out;
}

VideoDescriptor build_descriptor(const FeatureMatrix& X, const DescriptorRecipe& recipe,
                                 std::size_t video_index) {
  if (recipe.measures.empty()) throw InvalidArgument("at least one measure is required");
  const auto total = static_cast<std::size_t>(X.frames());
  const std::size_t n = recipe.n_frames == 0 ? total : std::min(recipe.n_frames, total);
  const FeatureMatrix picked =
      n == total && recipe.sampling == SamplingMode::Linear
          ? X
          : X.select_frames(recipe.sampling == SamplingMode::Linear
                                ? linspace_indices(total, n).indices
                                : random_indices(total, n, mix_seed(recipe.seed, video_index)).indices);

  std::vector<Measure> moments;
  bool want_vlad = false;
  for (Measure m : recipe.measures) {
    if (m == Measure::Vlad)
      want_vlad = true;
    else
      moments.push_back(m);
  }

  std::vector<std::pair<Measure, Vector>> blocks;
  if (!moments.empty()) {
    const VideoDescriptor d = aggregate_combo(picked, moments, Normalization::None);
    for (const auto& b : d.blocks()) blocks.emplace_back(b.measure, d.block(b));
  }
  if (want_vlad) {
    if (recipe.vlad == nullptr) throw InvalidArgument("the vlad measure needs a trained VLAD model");
    blocks.emplace_back(Measure::Vlad, recipe.vlad->encode(picked).values);
  }
  return normalize_descriptor(descriptor_concat(std::move(blocks)), recipe.normalization);
}

DescriptorSet build_descriptor_set(const LabeledVideos& videos, const DescriptorRecipe& recipe) {
  DescriptorSet set;
  set.labels = videos.labels;
  set.ids = videos.ids;
  set.classes = videos.classes;
  set.normalization = recipe.normalization;
  std::vector<VideoDescriptor> descriptors;
  descriptors.reserve(videos.size());
  for (std::size_t i = 0; i < videos.size(); ++i)
    descriptors.push_back(build_descriptor(videos.features[i], recipe, i));
  set.descriptors = stack_descriptors(descriptors);
  if (!descriptors.empty()) set.blocks = descriptors.front().blocks();
  return set;
}

EvaluationReport make_report(const LabelSpace& labels, std::span<const int> truth,
                             std::span<const int> predicted) {
  if (truth.size() != predicted.size())
    throw DimensionMismatch("truth and prediction counts differ");
  const std::size_t k = labels.size();
  EvaluationReport r;
  r.labels = labels;
  r.confusion.assign(k, std::vector<std::int64_t>(k, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    const int p = predicted[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= k || static_cast<std::size_t>(p) >= k)
      throw InvalidArgument("class id out of range in report");
    ++r.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  std::int64_t correct = 0;
  r.per_class_accuracy.resize(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    const std::int64_t row = std::accumulate(r.confusion[c].begin(), r.confusion[c].end(),
                                             std::int64_t{0});
    correct += r.confusion[c][c];
    if (row > 0)
      r.per_class_accuracy[c] =
          100.0 * static_cast<double>(r.confusion[c][c]) / static_cast<double>(row);
  }
  if (!truth.empty())
    r.overall_accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(truth.size());
  r.predictions.assign(predicted.begin(), predicted.end());
  return r;
}

std::vector<std::size_t> lovo_training_indices(std::size_t n, std::size_t held_out) {
  if (held_out >= n) throw InvalidArgument("held-out index out of range");
  std::vector<std::size_t> idx;
  idx.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i)
    if (i != held_out) idx.push_back(i);
  return idx;
}

namespace {

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.row(static_cast<Index>(r)) = m.row(static_cast<Index>(rows[r]));
  return out;
}

void append_warnings(std::vector<std::string>& dst, const std::vector<std::string>& src,
                     const std::string& prefix) {
  for (const auto& w : src) dst.push_back(prefix + w);
}

nlohmann::json params_json(const SvmParams& p) {
  return {{"kernel", kernel_name(p.kernel)}, {"c", p.c}, {"tolerance", p.solver.tolerance}};
}

}  // namespace

EvaluationReport lovo_evaluate(const LabelSpace& labels, std::span<const int> classes,
                               const Matrix& descriptors, const SvmParams& params) {
  const auto n = static_cast<std::size_t>(descriptors.rows());
  if (classes.size() != n)
    throw DimensionMismatch("one descriptor per video is required (" + std::to_string(n) +
                            " descriptors, " + std::to_string(classes.size()) + " videos)");
  if (n < 2) throw InvalidArgument("leave-one-video-out needs at least 2 videos");
  if (labels.size() < 2) throw InvalidArgument("leave-one-video-out needs at least 2 classes");

  const auto gram =
      std::make_shared<const Matrix>(gram_matrix(params.kernel, descriptors, descriptors));

  std::vector<int> predicted(n);
  std::vector<std::string> warnings;
  std::vector<int> fold_classes;
  for (std::size_t v = 0; v < n; ++v) {
    const auto train = lovo_training_indices(n, v);
    if (std::find(train.begin(), train.end(), v) != train.end())
      throw std::logic_error("held-out video leaked into its training fold");
    fold_classes.clear();
    for (std::size_t t : train) fold_classes.push_back(classes[t]);
    const DenseKernel kernel(gram, train);
    const OvrSvmModel model =
        train_ovr(gather_rows(descriptors, train), fold_classes, labels, params, &kernel);
    append_warnings(warnings, model.warnings(), "fold " + std::to_string(v) + ": ");
    predicted[v] = model.predict(descriptors.row(static_cast<Index>(v)).transpose()).label;
  }

  EvaluationReport r = make_report(labels, classes, predicted);
  r.warnings = std::move(warnings);
  r.config = params_json(params);
  r.config["protocol"] = "lovo";
  r.config["videos"] = n;
  r.config["descriptor_length"] = descriptors.cols();
  return r;
}

EvaluationReport lovo_evaluate(const LabelSpace& labels, std::span<const int> classes,
                               std::span<const VideoDescriptor> descriptors,
                               const SvmParams& params) {
  if (descriptors.size() != classes.size())
    throw DimensionMismatch("missing descriptor: " + std::to_string(descriptors.size()) +
                            " descriptors for " + std::to_string(classes.size()) + " videos");
  return lovo_evaluate(labels, classes, stack_descriptors(descriptors), params);
}

int majority_vote(std::span<const Prediction> frame_predictions) {
  if (frame_predictions.empty()) throw InvalidArgument("majority vote over zero frames");
  const std::size_t k = frame_predictions.front().decision_values.size();
  std::vector<std::size_t> counts(k, 0);
  std::vector<double> summed(k, 0.0);
  for (const auto& p : frame_predictions) {
    if (p.decision_values.size() != k) throw DimensionMismatch("inconsistent decision vectors");
    ++counts[static_cast<std::size_t>(p.label)];
    for (std::size_t c = 0; c < k; ++c) summed[c] += p.decision_values[c];
  }
  const std::size_t top = *std::max_element(counts.begin(), counts.end());
  int best = -1;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] != top) continue;
    if (best < 0 || summed[c] > summed[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  }
  return best;
}

int majority_vote_classify(const OvrSvmModel& frame_model, const FeatureMatrix& X) {
  if (X.dim() != frame_model.dim())
    throw DimensionMismatch("frame model expects " + std::to_string(frame_model.dim()) +
                            "-dim frames, got " + std::to_string(X.dim()));
  std::vector<Prediction> preds;
  preds.reserve(static_cast<std::size_t>(X.frames()));
  for (Index i = 0; i < X.frames(); ++i)
    preds.push_back(frame_model.predict(X.values().row(i).transpose()));
  return majority_vote(preds);
}

namespace {

Matrix normalized_rows(const Matrix& m) {
  Matrix out = m;
  for (Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

void check_dataset(const LabeledVideos& videos) {
  if (videos.features.size() != videos.classes.size())
    throw DimensionMismatch("dataset class list does not match its feature list");
  if (videos.size() < 2) throw InvalidArgument("leave-one-video-out needs at least 2 videos");
}

}  // namespace

EvaluationReport lovo_majority_vote(const LabeledVideos& videos, std::size_t n_frames,
                                    const SvmParams& params) {
  check_dataset(videos);
  if (n_frames == 0) throw InvalidArgument("majority vote needs at least one frame per video");

  const std::size_t n = videos.size();
  Index total = 0;
  for (const auto& f : videos.features) total += f.frames();
  const Index dim = videos.features.front().dim();

  Matrix frames(total, dim);
  std::vector<std::size_t> owner;
  owner.reserve(static_cast<std::size_t>(total));
  Index row = 0;
  for (std::size_t v = 0; v < n; ++v) {
    const auto& X = videos.features[v];
    if (X.dim() != dim) throw DimensionMismatch("videos have differing feature dimensions");
    frames.middleRows(row, X.frames()) = normalized_rows(X.values());
    row += X.frames();
    owner.insert(owner.end(), static_cast<std::size_t>(X.frames()), v);
  }

  constexpr Index kSharedGramLimit = 6000;
  std::shared_ptr<const Matrix> gram;
  if (total <= kSharedGramLimit)
    gram = std::make_shared<const Matrix>(gram_matrix(params.kernel, frames, frames));

  std::vector<int> predicted(n);
  std::vector<std::string> warnings;
  std::vector<std::size_t> train;
  std::vector<int> train_classes;
  for (std::size_t v = 0; v < n; ++v) {
    train.clear();
    train_classes.clear();
    for (std::size_t r = 0; r < owner.size(); ++r) {
      if (owner[r] == v) continue;
      train.push_back(r);
      train_classes.push_back(videos.classes[owner[r]]);
    }
    const Matrix train_rows = gather_rows(frames, train);
    std::unique_ptr<KernelSource> kernel;
    if (gram) kernel = std::make_unique<DenseKernel>(gram, train);
    const OvrSvmModel model =
        train_ovr(train_rows, train_classes, videos.labels, params, kernel.get());
    append_warnings(warnings, model.warnings(), "fold " + std::to_string(v) + ": ");

    const auto& X = videos.features[v];
    const auto count = std::min<std::size_t>(n_frames, static_cast<std::size_t>(X.frames()));
    const auto sel = linspace_indices(static_cast<std::size_t>(X.frames()), count);
    const FeatureMatrix picked(normalized_rows(X.select_frames(sel.indices).values()));
    predicted[v] = majority_vote_classify(model, picked);
  }

  EvaluationReport r = make_report(videos.labels, videos.classes, predicted);
  r.warnings = std::move(warnings);
  r.config = params_json(params);
  r.config["protocol"] = "lovo-majority-vote";
  r.config["videos"] = n;
  r.config["n_frames"] = n_frames;
  r.config["sampling"] = "linear";
  return r;
}

std::uint64_t trial_video_seed(std::uint64_t base_seed, std::size_t trial, std::size_t video) {
  return mix_seed(base_seed + trial, video);
}

TrialCurve frames_vs_accuracy(const LabeledVideos& videos, std::span<const std::size_t> n_list,
                              std::size_t trials, std::uint64_t base_seed,
                              const SvmParams& params) {
  check_dataset(videos);
  if (n_list.empty()) throw InvalidArgument("frame-count list is empty");
  if (trials == 0) throw InvalidArgument("at least one trial is required");

  TrialCurve curve;
  curve.trials = trials;
  curve.base_seed = base_seed;
  const Index dim = videos.features.front().dim();
  Matrix descriptors(static_cast<Index>(videos.size()), dim);

  for (std::size_t n : n_list) {
    if (n == 0) throw InvalidArgument("frame counts must be positive");
    TrialPoint point;
    point.n = n;
    for (std::size_t t = 0; t < trials; ++t) {
      for (std::size_t v = 0; v < videos.size(); ++v) {
        const auto& X = videos.features[v];
        const auto total = static_cast<std::size_t>(X.frames());
        const auto sel =
            random_indices(total, std::min(n, total), trial_video_seed(base_seed, t, v));
        Vector mean = aggregate(X.select_frames(sel.indices), Measure::Mean);
        l2_normalize(mean);
        descriptors.row(static_cast<Index>(v)) = mean.transpose();
      }
      point.accuracies.push_back(
          lovo_evaluate(videos.labels, videos.classes, descriptors, params).overall_accuracy);
    }
    const auto& acc = point.accuracies;
    point.mean = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
    point.min = *std::min_element(acc.begin(), acc.end());
    point.max = *std::max_element(acc.begin(), acc.end());
    double ss = 0.0;
    for (double a : acc) ss += (a - point.mean) * (a - point.mean);
    point.std = std::sqrt(ss / static_cast<double>(acc.size()));
    curve.points.push_back(std::move(point));
  }
  return curve;
}

nlohmann::json report_to_json(const EvaluationReport& r) {
  nlohmann::json j;
  j["classes"] = r.labels.names();
  j["overall_accuracy"] = r.overall_accuracy;
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t c = 0; c < r.labels.size(); ++c) {
    const std::int64_t videos =
        std::accumulate(r.confusion[c].begin(), r.confusion[c].end(), std::int64_t{0});
    per_class.push_back({{"class", r.labels.name(static_cast<int>(c))},
                         {"videos", videos},
                         {"correct", r.confusion[c][c]},
                         {"accuracy", r.per_class_accuracy[c]}});
  }
  j["per_class"] = std::move(per_class);
  j["confusion"] = r.confusion;
  j["predictions"] = r.predictions;
  j["config"] = r.config;
  j["warnings"] = r.warnings;
  return j;
}

std::string format_report_table(const EvaluationReport& r) {
  const std::size_t k = r.labels.size();
  std::size_t name_width = 7;
  for (const auto& name : r.labels.names()) name_width = std::max(name_width, name.size() + 5);

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << std::left << std::setw(static_cast<int>(name_width)) << "class" << std::right
     << std::setw(8) << "videos" << std::setw(9) << "correct" << std::setw(10) << "accuracy"
     << '\n';
  std::int64_t total = 0;
  std::int64_t correct = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::int64_t videos =
        std::accumulate(r.confusion[c].begin(), r.confusion[c].end(), std::int64_t{0});
    total += videos;
    correct += r.confusion[c][c];
    std::ostringstream label;
    label << r.labels.name(static_cast<int>(c)) << " [" << c << "]";
    os << std::left << std::setw(static_cast<int>(name_width)) << label.str() << std::right
       << std::setw(8) << videos << std::setw(9) << r.confusion[c][c] << std::setw(10)
       << r.per_class_accuracy[c] << '\n';
  }
  os << std::left << std::setw(static_cast<int>(name_width)) << "overall" << std::right
     << std::setw(8) << total << std::setw(9) << correct << std::setw(10) << r.overall_accuracy
     << "\n\nconfusion (rows: true class, columns: predicted class)\n";

  std::int64_t widest = 1;
  for (const auto& row : r.confusion)
    for (std::int64_t v : row) widest = std::max(widest, v);
  const int cell = std::max<int>(4, static_cast<int>(std::to_string(widest).size()) + 2);
  os << std::setw(static_cast<int>(name_width)) << "";
  for (std::size_t c = 0; c < k; ++c) os << std::setw(cell) << ("[" + std::to_string(c) + "]");
  os << '\n';
  for (std::size_t t = 0; t < k; ++t) {
    os << std::left << std::setw(static_cast<int>(name_width))
       << ("[" + std::to_string(t) + "]") << std::right;
    for (std::size_t p = 0; p < k; ++p) os << std::setw(cell) << r.confusion[t][p];
    os << '\n';
  }
  for (const auto& w : r.warnings) os << "warning: " << w << '\n';
  return os.str();
}

nlohmann::json curve_to_json(const TrialCurve& curve) {
  nlohmann::json j;
  j["trials"] = curve.trials;
  j["base_seed"] = curve.base_seed;
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : curve.points)
    points.push_back({{"n", p.n},
                      {"mean", p.mean},
                      {"min", p.min},
                      {"max", p.max},
                      {"std", p.std},
                      {"accuracies", p.accuracies}});
  j["points"] = std::move(points);
  return j;
}

std::string format_curve_tsv(const TrialCurve& curve) {
  std::ostringstream os;
  os << "n\tmean\tmin\tmax\tstd\n" << std::fixed << std::setprecision(6);
  for (const auto& p : curve.points)
    os << p.n << '\t' << p.mean << '\t' << p.min << '\t' << p.max << '\t' << p.std << '\n';
  return os.str();
}

}  // namespace scenepool
