#pragma once

#include <cstdint>
#include <span>

#include "scenepool/core.hpp"

namespace scenepool {

/// One-pass accumulator of the first four central moments of a scalar
/// sequence (Welford/Terriberry updates). Two accumulators can be merged.
class RunningMoments {
 public:
  void push(double x);
  void merge(const RunningMoments& other);

  std::int64_t count() const { return n_; }
  double mean() const { return mean_; }
  double max() const { return max_; }
  /// Population variance (divisor n).
  double variance() const { return n_ > 0 ? m2_ / static_cast<double>(n_) : 0.0; }
  double sd() const;
  /// Third standardized moment; 0 when the variance is 0.
  double skewness() const;
  /// Fourth standardized moment (not excess); 0 when the variance is 0.
  double kurtosis() const;

 private:
  std::int64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double m3_ = 0.0;
  double m4_ = 0.0;
  double max_ = 0.0;
};

/// Per-dimension temporal statistics of one feature matrix.
struct MomentSet {
  Vector mean;
  Vector sd;
  Vector skew;
  Vector kurt;
  Vector max;
  Index frames = 0;

  const Vector& get(Measure m) const;
};

/// All five statistics in one sweep. Each column is accumulated in sorted
/// order, so the result depends only on the multiset of frames: any row
/// permutation of X yields bit-identical output.
MomentSet compute_moments(const FeatureMatrix& X);

/// A single statistic. Throws InvalidArgument for skew/kurt on one frame
/// ("insufficient frames for higher moments") and for Measure::Vlad.
Vector aggregate(const FeatureMatrix& X, Measure measure);

/// Scales v to unit L2 norm in place; zero vectors stay zero.
void l2_normalize(Eigen::Ref<Vector> v);

/// Computes each requested statistic, normalizes and concatenates them in
/// canonical order. Measure::Vlad is not accepted here (see vlad.hpp).
VideoDescriptor aggregate_combo(const FeatureMatrix& X, std::span<const Measure> measures,
                                Normalization normalization = Normalization::PerBlock);

/// Applies the chosen normalization to an assembled descriptor.
VideoDescriptor normalize_descriptor(const VideoDescriptor& d, Normalization normalization);

bool needs_higher_moments(std::span<const Measure> measures);

}  // namespace scenepool
