#include "scenepool/vlad.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "scenepool/aggregation.hpp"
#include "scenepool/sampling.hpp"

namespace scenepool {

Vector PcaModel::project(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != dim())
    throw DimensionMismatch("PCA expects " + std::to_string(dim()) + "-dim input, got " +
                            std::to_string(x.size()));
  return (components * (x - mean)).cwiseQuotient(scales);
}

Matrix PcaModel::project_rows(const Matrix& rows) const {
  if (rows.cols() != dim())
    throw DimensionMismatch("PCA expects " + std::to_string(dim()) + "-dim rows, got " +
                            std::to_string(rows.cols()));
  Matrix centered = rows.rowwise() - mean.transpose();
  Matrix out = centered * components.transpose();
  out.array().rowwise() /= scales.transpose().array();
  return out;
}

namespace {

constexpr double kRankTolerance = 1e-10;
constexpr double kScaleFloor = 1e-8;

// Flips each row so that its largest-magnitude entry is positive.
void canonicalize_signs(Matrix& components) {
  for (Index r = 0; r < components.rows(); ++r) {
    Index arg = 0;
    components.row(r).cwiseAbs().maxCoeff(&arg);
    if (components(r, arg) < 0.0) components.row(r) *= -1.0;
  }
}

// Modified Gram-Schmidt over rows, in order.
void orthonormalize_rows(Matrix& rows) {
  for (Index r = 0; r < rows.rows(); ++r) {
    for (Index q = 0; q < r; ++q) rows.row(r) -= rows.row(r).dot(rows.row(q)) * rows.row(q);
    rows.row(r).normalize();
  }
}

}  // namespace

PcaModel fit_pca(const Matrix& samples, Index d_prime) {
  const Index n = samples.rows();
  const Index d = samples.cols();
  if (d_prime < 1 || d_prime > d)
    throw InvalidArgument("PCA target dimension " + std::to_string(d_prime) +
                          " must lie in [1, " + std::to_string(d) + "]");
  if (n <= d_prime)
    throw InvalidArgument("PCA needs more samples (" + std::to_string(n) +
                          ") than the target dimension (" + std::to_string(d_prime) + ")");
  if (!samples.allFinite()) throw InvalidArgument("PCA samples contain non-finite values");

  PcaModel model;
  model.mean = samples.colwise().mean().transpose();
  const Matrix centered = samples.rowwise() - model.mean.transpose();
  const double inv_n = 1.0 / static_cast<double>(n);

  Vector eigenvalues;  // descending, length >= d_prime
  Matrix directions;   // rows, matching eigenvalues
  if (n < d) {
    // Eigenvectors of the n x n Gram matrix map to covariance eigenvectors.
    Eigen::SelfAdjointEigenSolver<Matrix> solver(centered * centered.transpose() * inv_n);
    if (solver.info() != Eigen::Success) throw Error("PCA eigendecomposition failed");
    eigenvalues = solver.eigenvalues().reverse();
    directions = solver.eigenvectors().rowwise().reverse().transpose();
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(centered.transpose() * centered * inv_n);
    if (solver.info() != Eigen::Success) throw Error("PCA eigendecomposition failed");
    eigenvalues = solver.eigenvalues().reverse();
    directions = solver.eigenvectors().rowwise().reverse().transpose();
  }

  const double largest = std::max(eigenvalues[0], 0.0);
  Index rank = 0;
  while (rank < eigenvalues.size() && largest > 0.0 &&
         eigenvalues[rank] > kRankTolerance * largest)
    ++rank;
  if (rank < d_prime)
    throw InvalidArgument("PCA input has rank " + std::to_string(rank) +
                          ", below the requested dimension " + std::to_string(d_prime) +
                          "; achievable rank is " + std::to_string(rank));

  if (n < d) {
    model.components.resize(d_prime, d);
    for (Index r = 0; r < d_prime; ++r)
      model.components.row(r) = (centered.transpose() * directions.row(r).transpose()).transpose() /
                                std::sqrt(static_cast<double>(n) * eigenvalues[r]);
    orthonormalize_rows(model.components);
  } else {
    model.components = directions.topRows(d_prime);
  }
  canonicalize_signs(model.components);

  model.scales.resize(d_prime);
  for (Index r = 0; r < d_prime; ++r)
    model.scales[r] = std::sqrt(std::max(eigenvalues[r], kScaleFloor * largest));
  return model;
}

namespace {

struct Nearest {
  Index index;
  double sq_dist;
};

Nearest nearest_center(const Matrix& centers, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  Nearest best{0, std::numeric_limits<double>::infinity()};
  for (Index c = 0; c < centers.rows(); ++c) {
    const double dist = (centers.row(c) - x).squaredNorm();
    if (dist < best.sq_dist) best = {c, dist};
  }
  return best;
}

double assign_all(const Matrix& points, const Matrix& centers, std::vector<Index>& labels,
                  std::vector<double>& sq_dist) {
  double inertia = 0.0;
  for (Index i = 0; i < points.rows(); ++i) {
    const Nearest n = nearest_center(centers, points.row(i));
    labels[static_cast<std::size_t>(i)] = n.index;
    sq_dist[static_cast<std::size_t>(i)] = n.sq_dist;
    inertia += n.sq_dist;
  }
  return inertia;
}

Matrix kmeanspp_seed(const Matrix& points, Index k, Rng& rng) {
  const Index n = points.rows();
  Matrix centers(k, points.cols());
  centers.row(0) = points.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));

  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    d2[static_cast<std::size_t>(i)] = (points.row(i) - centers.row(0)).squaredNorm();

  for (Index c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    if (!(total > 0.0))
      throw InvalidArgument("k-means++ needs at least " + std::to_string(k) +
                            " distinct points, found " + std::to_string(c));
    const double target = rng.uniform() * total;
    Index chosen = -1;
    double cumulative = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double w = d2[static_cast<std::size_t>(i)];
      if (w <= 0.0) continue;
      cumulative += w;
      chosen = i;
      if (cumulative > target) break;
    }
    centers.row(c) = points.row(chosen);
    for (Index i = 0; i < n; ++i) {
      auto& di = d2[static_cast<std::size_t>(i)];
      di = std::min(di, (points.row(i) - centers.row(c)).squaredNorm());
    }
  }
  return centers;
}

}  // namespace

Codebook kmeanspp_fit(const Matrix& points, Index k, std::uint64_t seed, KMeansOptions opts) {
  const Index n = points.rows();
  if (k < 2) throw InvalidArgument("codebook needs k >= 2");
  if (n < k)
    throw InvalidArgument("k-means needs at least k=" + std::to_string(k) + " points, got " +
                          std::to_string(n));
  if (!points.allFinite()) throw InvalidArgument("k-means input contains non-finite values");

  Rng rng(seed);
  Codebook cb;
  cb.centers = kmeanspp_seed(points, k, rng);

  std::vector<Index> labels(static_cast<std::size_t>(n));
  std::vector<double> sq_dist(static_cast<std::size_t>(n));
  double inertia = assign_all(points, cb.centers, labels, sq_dist);
  cb.inertia_history.push_back(inertia);

  std::vector<Index> counts(static_cast<std::size_t>(k));
  for (int iter = 0; iter < opts.max_iter && inertia > 0.0; ++iter) {
    // Update step.
    cb.centers.setZero();
    std::fill(counts.begin(), counts.end(), 0);
    for (Index i = 0; i < n; ++i) {
      const Index c = labels[static_cast<std::size_t>(i)];
      cb.centers.row(c) += points.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    std::vector<Index> empty;
    for (Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0)
        cb.centers.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
      else
        empty.push_back(c);
    }
    if (!empty.empty()) {
      std::vector<Index> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), Index{0});
      std::vector<double> to_own(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i)
        to_own[static_cast<std::size_t>(i)] =
            (points.row(i) - cb.centers.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
      std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return to_own[static_cast<std::size_t>(a)] > to_own[static_cast<std::size_t>(b)];
      });
      for (std::size_t e = 0; e < empty.size(); ++e) cb.centers.row(empty[e]) = points.row(order[e]);
    }

    // Assignment step.
    const std::vector<Index> previous = labels;
    const double next = assign_all(points, cb.centers, labels, sq_dist);
    assert(next <= inertia * (1.0 + 1e-12));
    cb.inertia_history.push_back(next);
    ++cb.iterations;

    const bool unchanged = previous == labels && empty.empty();
    const bool small_gain = inertia - next < opts.rel_tol * inertia;
    inertia = next;
    if (unchanged || small_gain) break;
  }
  cb.inertia = inertia;
  return cb;
}

Index assign(const Codebook& codebook, const Eigen::Ref<const Vector>& x) {
  if (x.size() != codebook.dim())
    throw DimensionMismatch("codebook expects " + std::to_string(codebook.dim()) +
                            "-dim vectors, got " + std::to_string(x.size()));
  return nearest_center(codebook.centers, x.transpose()).index;
}

VladCode vlad_encode(const Codebook& codebook, const Matrix& frames,
                     VladNormalization normalization) {
  const Index dp = codebook.dim();
  if (frames.cols() != dp)
    throw DimensionMismatch("VLAD expects " + std::to_string(dp) + "-dim frames, got " +
                            std::to_string(frames.cols()));
  if (frames.rows() < 1) throw InvalidArgument("VLAD encoding needs at least one frame");

  VladCode code;
  code.values = Vector::Zero(codebook.k() * dp);
  for (Index i = 0; i < frames.rows(); ++i) {
    const Index c = nearest_center(codebook.centers, frames.row(i)).index;
    code.values.segment(c * dp, dp) += (frames.row(i) - codebook.centers.row(c)).transpose();
  }
  if (normalization == VladNormalization::PowerL2) {
    code.values = code.values.unaryExpr(
        [](double v) { return std::copysign(std::sqrt(std::abs(v)), v); });
    l2_normalize(code.values);
    code.normalized = true;
  }
  return code;
}

VladCode VladModel::encode(const FeatureMatrix& X) const {
  return vlad_encode(codebook, pca.project_rows(X.values()), normalization);
}

VladModel fit_vlad(std::span<const FeatureMatrix> videos, const VladOptions& opts) {
  if (videos.empty()) throw InvalidArgument("VLAD training needs at least one video");
  Index total = 0;
  const Index d = videos.front().dim();
  for (const auto& v : videos) {
    if (v.dim() != d) throw DimensionMismatch("videos have differing feature dimensions");
    total += v.frames();
  }
  Matrix pool(total, d);
  Index row = 0;
  for (const auto& v : videos) {
    pool.middleRows(row, v.frames()) = v.values();
    row += v.frames();
  }

  VladModel model;
  model.pca = fit_pca(pool, opts.d_prime);
  model.codebook = kmeanspp_fit(model.pca.project_rows(pool), opts.k, opts.seed, opts.kmeans);
  model.normalization = opts.normalization;
  return model;
}

}  // namespace scenepool
