#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scenepool/core.hpp"

namespace scenepool {

/// Stored PCA projection with whitening.
struct PcaModel {
  Vector mean;        ///< D
  Matrix components;  ///< D' x D, orthonormal rows, decreasing variance
  Vector scales;      ///< D', sqrt of the (floored) eigenvalues

  Index dim() const { return mean.size(); }
  Index d_prime() const { return components.rows(); }

  /// diag(1/scales) * components * (x - mean)
  Vector project(const Eigen::Ref<const Vector>& x) const;
  /// Projects every row of a frames x D matrix.
  Matrix project_rows(const Matrix& rows) const;
};

/// Fits a whitening PCA to the rows of `samples` (population covariance).
/// Needs more samples than d_prime and d_prime <= D. Throws InvalidArgument
/// naming the achievable rank when the data span fewer than d_prime
/// directions.
PcaModel fit_pca(const Matrix& samples, Index d_prime);

struct KMeansOptions {
  int max_iter = 100;
  double rel_tol = 1e-4;
};

struct Codebook {
  Matrix centers;  ///< k x D'
  double inertia = 0.0;
  /// Inertia after every assignment step, in order.
  std::vector<double> inertia_history;
  int iterations = 0;

  Index k() const { return centers.rows(); }
  Index dim() const { return centers.cols(); }
};

/// K-Means++ seeding followed by Lloyd iterations. Empty clusters are
/// re-seeded at the point farthest from its current centre. Deterministic for
/// a fixed seed.
Codebook kmeanspp_fit(const Matrix& points, Index k, std::uint64_t seed, KMeansOptions opts = {});

/// Index of the nearest centre (exact; ties go to the lowest index).
Index assign(const Codebook& codebook, const Eigen::Ref<const Vector>& x);

enum class VladNormalization : std::uint8_t {
  Raw,
  PowerL2,  ///< signed square root per element, then global L2
};

struct VladCode {
  Vector values;  ///< k * D', residual sums v_1 .. v_k
  bool normalized = false;
};

/// Sums residuals of `frames` (rows, already projected) to their nearest
/// centres and concatenates the per-centre sums.
VladCode vlad_encode(const Codebook& codebook, const Matrix& frames,
                     VladNormalization normalization = VladNormalization::PowerL2);

/// PCA + codebook learned from a pool of frames.
struct VladModel {
  PcaModel pca;
  Codebook codebook;
  VladNormalization normalization = VladNormalization::PowerL2;

  Index code_size() const { return codebook.k() * codebook.dim(); }
  VladCode encode(const FeatureMatrix& X) const;
};

struct VladOptions {
  Index k = 32;
  Index d_prime = 128;
  std::uint64_t seed = 1;
  VladNormalization normalization = VladNormalization::PowerL2;
  KMeansOptions kmeans;
};

/// Stacks every frame of every video, fits PCA, then the codebook on the
/// projected frames.
VladModel fit_vlad(std::span<const FeatureMatrix> videos, const VladOptions& opts);

}  // namespace scenepool
