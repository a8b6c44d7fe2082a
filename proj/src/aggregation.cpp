#include "scenepool/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace scenepool {

void RunningMoments::push(double x) {
  const auto n1 = static_cast<double>(n_);
  ++n_;
  const auto n = static_cast<double>(n_);
  const double delta = x - mean_;
  const double delta_n = delta / n;
  const double delta_n2 = delta_n * delta_n;
  const double term1 = delta * delta_n * n1;
  mean_ += delta_n;
  m4_ += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * m2_ - 4.0 * delta_n * m3_;
  m3_ += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * m2_;
  m2_ += term1;
  max_ = n_ == 1 ? x : std::max(max_, x);
}

void RunningMoments::merge(const RunningMoments& b) {
  if (b.n_ == 0) return;
  if (n_ == 0) {
    *this = b;
    return;
  }
  const auto na = static_cast<double>(n_);
  const auto nb = static_cast<double>(b.n_);
  const double n = na + nb;
  const double delta = b.mean_ - mean_;
  const double d2 = delta * delta;
  const double d3 = d2 * delta;
  const double d4 = d2 * d2;

  const double m2 = m2_ + b.m2_ + d2 * na * nb / n;
  const double m3 = m3_ + b.m3_ + d3 * na * nb * (na - nb) / (n * n) +
                    3.0 * delta * (na * b.m2_ - nb * m2_) / n;
  const double m4 = m4_ + b.m4_ + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
                    6.0 * d2 * (na * na * b.m2_ + nb * nb * m2_) / (n * n) +
                    4.0 * delta * (na * b.m3_ - nb * m3_) / n;

  mean_ = (na * mean_ + nb * b.mean_) / n;
  m2_ = m2;
  m3_ = m3;
  m4_ = m4;
  max_ = std::max(max_, b.max_);
  n_ += b.n_;
}

double RunningMoments::sd() const { return std::sqrt(variance()); }

double RunningMoments::skewness() const {
  if (n_ == 0 || m2_ <= 0.0) return 0.0;
  const auto n = static_cast<double>(n_);
  return std::sqrt(n) * m3_ / std::pow(m2_, 1.5);
}

double RunningMoments::kurtosis() const {
  if (n_ == 0 || m2_ <= 0.0) return 0.0;
  const auto n = static_cast<double>(n_);
  return n * m4_ / (m2_ * m2_);
}

const Vector& MomentSet::get(Measure m) const {
  switch (m) {
    case Measure::Mean: return mean;
    case Measure::Sd: return sd;
    case Measure::Skew: return skew;
    case Measure::Kurt: return kurt;
    case Measure::Max: return max;
    case Measure::Vlad: break;
  }
  throw InvalidArgument("vlad is not a moment statistic");
}

MomentSet compute_moments(const FeatureMatrix& X) {
  const Index d = X.dim();
  const Index m = X.frames();
  MomentSet out;
  out.frames = m;
  out.mean.resize(d);
  out.sd.resize(d);
  out.skew.resize(d);
  out.kurt.resize(d);
  out.max.resize(d);

  std::vector<double> column(static_cast<std::size_t>(m));
  for (Index j = 0; j < d; ++j) {
    const auto col = X.values().col(j);
    std::copy(col.begin(), col.end(), column.begin());
    std::sort(column.begin(), column.end());
    RunningMoments acc;
    for (double x : column) acc.push(x);
    out.mean[j] = acc.mean();
    out.sd[j] = acc.sd();
    out.skew[j] = acc.skewness();
    out.kurt[j] = acc.kurtosis();
    out.max[j] = acc.max();
  }
  return out;
}

namespace {

void check_frames_for(Measure measure, Index frames) {
  if ((measure == Measure::Skew || measure == Measure::Kurt) && frames < 2)
    throw InvalidArgument("insufficient frames for higher moments");
  if (measure == Measure::Vlad)
    throw InvalidArgument("vlad pooling needs a trained codebook; use the vlad encoder");
}

}  // namespace

Vector aggregate(const FeatureMatrix& X, Measure measure) {
  check_frames_for(measure, X.frames());
  if (measure == Measure::Max) return X.values().colwise().maxCoeff().transpose();
  return compute_moments(X).get(measure);
}

void l2_normalize(Eigen::Ref<Vector> v) {
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
}

bool needs_higher_moments(std::span<const Measure> measures) {
  return std::any_of(measures.begin(), measures.end(),
                     [](Measure m) { return m == Measure::Skew || m == Measure::Kurt; });
}

VideoDescriptor normalize_descriptor(const VideoDescriptor& d, Normalization normalization) {
  Vector values = d.values();
  switch (normalization) {
    case Normalization::None: break;
    case Normalization::PerBlock:
      for (const auto& b : d.blocks()) l2_normalize(values.segment(b.offset, b.length));
      break;
    case Normalization::Global: l2_normalize(values); break;
  }
  return VideoDescriptor(std::move(values), d.blocks(), normalization);
}

VideoDescriptor aggregate_combo(const FeatureMatrix& X, std::span<const Measure> measures,
                                Normalization normalization) {
  if (measures.empty()) throw InvalidArgument("at least one measure is required");
  for (Measure m : measures) check_frames_for(m, X.frames());

  const MomentSet moments = compute_moments(X);
  std::vector<std::pair<Measure, Vector>> blocks;
  blocks.reserve(measures.size());
  for (Measure m : measures) blocks.emplace_back(m, moments.get(m));
  return normalize_descriptor(descriptor_concat(std::move(blocks)), normalization);
}

}  // namespace scenepool
