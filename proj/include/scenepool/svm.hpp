#pragma once

#include <cstdint>
#include <list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "scenepool/core.hpp"

namespace scenepool {

enum class KernelKind : std::uint8_t { Linear, Hik };

std::string_view kernel_name(KernelKind k);
KernelKind parse_kernel(std::string_view name);

/// linear: dot product; hik: sum_j min(x_j, y_j) (applied as written, also
/// to negative entries).
double kernel_eval(KernelKind kind, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& y);

/// K(a_i, b_j) for all row pairs.
Matrix gram_matrix(KernelKind kind, const Matrix& a, const Matrix& b);

/// Row access to an n x n kernel matrix over the training samples.
class KernelSource {
 public:
  virtual ~KernelSource() = default;
  virtual std::size_t size() const = 0;
  virtual void row(std::size_t i, std::span<double> out) const = 0;
  virtual double diag(std::size_t i) const = 0;
};

/// A precomputed Gram matrix, optionally restricted to a subset of its
/// samples (used to share one Gram matrix across cross-validation folds).
class DenseKernel final : public KernelSource {
 public:
  explicit DenseKernel(std::shared_ptr<const Matrix> gram);
  DenseKernel(std::shared_ptr<const Matrix> gram, std::vector<std::size_t> subset);

  std::size_t size() const override { return subset_.size(); }
  void row(std::size_t i, std::span<double> out) const override;
  double diag(std::size_t i) const override;

 private:
  std::shared_ptr<const Matrix> gram_;
  std::vector<std::size_t> subset_;
};

/// Computes kernel rows on demand from the samples and keeps the most
/// recently used ones, up to `cache_bytes`.
class LazyKernel final : public KernelSource {
 public:
  LazyKernel(const Matrix& data, KernelKind kind, std::size_t cache_bytes = std::size_t{256} << 20);

  std::size_t size() const override { return static_cast<std::size_t>(data_.rows()); }
  void row(std::size_t i, std::span<double> out) const override;
  double diag(std::size_t i) const override { return diag_[static_cast<Index>(i)]; }

 private:
  const Matrix& data_;
  KernelKind kind_;
  Vector diag_;
  std::size_t capacity_rows_;
  mutable std::list<std::size_t> lru_;
  mutable std::unordered_map<std::size_t, std::pair<std::vector<double>, std::list<std::size_t>::iterator>>
      cache_;
};

struct SolverOptions {
  double tolerance = 1e-3;         ///< stop when the maximal KKT violation is below this
  std::int64_t max_iterations = 0;  ///< 0 selects max(10^7, 100 n)
};

/// Solution of the C-SVC dual
///   min 1/2 a'Qa - e'a   s.t. 0 <= a_i <= C, y'a = 0,  Q_ij = y_i y_j K_ij.
struct DualSolution {
  std::vector<double> alpha;
  double bias = 0.0;  ///< decision f(x) = sum_i y_i a_i K(x_i, x) + bias
  double objective = 0.0;
  double kkt_gap = 0.0;  ///< max violating-pair gap at exit
  std::int64_t iterations = 0;
  bool converged = false;
};

/// Sequential minimal optimization with second-order working-set selection.
DualSolution solve_dual(const KernelSource& kernel, std::span<const int> labels, double c,
                        const SolverOptions& opts = {});

struct BinarySvmModel {
  Matrix support_vectors;  ///< rows
  Vector coefficients;     ///< y_i * alpha_i per support vector
  double bias = 0.0;
  KernelKind kernel = KernelKind::Linear;
  double c = 1.0;
  /// Trained without positive samples; decision is the constant `bias`.
  bool degenerate = false;
  /// w = sum coefficients_i * sv_i, filled for linear models.
  Vector weights;

  Index dim() const { return support_vectors.cols(); }
  double decision(const Eigen::Ref<const Vector>& x) const;
  /// Same value as decision(), always evaluated through the kernel expansion.
  double decision_kernel(const Eigen::Ref<const Vector>& x) const;
};

/// Keeps the samples with non-zero alpha. Recomputes the linear weights.
BinarySvmModel make_binary_model(const Matrix& data, std::span<const int> labels,
                                 const DualSolution& sol, KernelKind kind, double c);

void finalize_linear_weights(BinarySvmModel& model);

/// Labels are -1/+1 and both must be present.
BinarySvmModel train_binary(const Matrix& data, std::span<const int> labels, KernelKind kind,
                            double c, const SolverOptions& opts = {});

struct SvmParams {
  KernelKind kernel = KernelKind::Linear;
  double c = 1.0;
  SolverOptions solver;
};

struct Prediction {
  int label = 0;
  std::vector<double> decision_values;  ///< in label-space order
};

class OvrSvmModel {
 public:
  OvrSvmModel() = default;
  OvrSvmModel(LabelSpace labels, std::vector<BinarySvmModel> models,
              std::vector<std::string> warnings = {});

  const LabelSpace& labels() const { return labels_; }
  const std::vector<BinarySvmModel>& models() const { return models_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  Index dim() const;

  /// Argmax of the per-class decisions; ties go to the lowest class id.
  Prediction predict(const Eigen::Ref<const Vector>& x) const;

 private:
  LabelSpace labels_;
  std::vector<BinarySvmModel> models_;
  std::vector<std::string> warnings_;
};

/// One class-vs-rest binary model per class of `labels`. Rows of `data` are
/// samples; `classes` holds their class ids. A class with no training samples
/// gets a degenerate constant model and a warning. When `kernel` is given it
/// must describe exactly these rows.
OvrSvmModel train_ovr(const Matrix& data, std::span<const int> classes, const LabelSpace& labels,
                      const SvmParams& params, const KernelSource* kernel = nullptr);

/// Picks a DenseKernel for small problems and a LazyKernel otherwise.
std::unique_ptr<KernelSource> make_kernel(const Matrix& data, KernelKind kind);

}  // namespace scenepool
