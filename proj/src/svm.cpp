#include "scenepool/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace scenepool {

std::string_view kernel_name(KernelKind k) { return k == KernelKind::Linear ? "linear" : "hik"; }

KernelKind parse_kernel(std::string_view name) {
  if (name == "linear") return KernelKind::Linear;
  if (name == "hik") return KernelKind::Hik;
  throw InvalidArgument("unknown kernel '" + std::string(name) + "' (expected linear or hik)");
}

double kernel_eval(KernelKind kind, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& y) {
  if (x.size() != y.size())
    throw DimensionMismatch("kernel arguments differ in length (" + std::to_string(x.size()) +
                            " vs " + std::to_string(y.size()) + ")");
  if (kind == KernelKind::Linear) return x.dot(y);
  return x.array().min(y.array()).sum();
}

Matrix gram_matrix(KernelKind kind, const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw DimensionMismatch("gram_matrix: column counts differ");
  if (kind == KernelKind::Linear) return a * b.transpose();
  Matrix out(a.rows(), b.rows());
  for (Index j = 0; j < b.rows(); ++j)
    for (Index i = 0; i < a.rows(); ++i) out(i, j) = a.row(i).array().min(b.row(j).array()).sum();
  return out;
}

DenseKernel::DenseKernel(std::shared_ptr<const Matrix> gram) : gram_(std::move(gram)) {
  subset_.resize(static_cast<std::size_t>(gram_->rows()));
  for (std::size_t i = 0; i < subset_.size(); ++i) subset_[i] = i;
}

DenseKernel::DenseKernel(std::shared_ptr<const Matrix> gram, std::vector<std::size_t> subset)
    : gram_(std::move(gram)), subset_(std::move(subset)) {
  for (std::size_t s : subset_)
    if (s >= static_cast<std::size_t>(gram_->rows()))
      throw InvalidArgument("kernel subset index out of range");
}

void DenseKernel::row(std::size_t i, std::span<double> out) const {
  // The Gram matrix is symmetric, so read the contiguous column instead.
  const auto col = gram_->col(static_cast<Index>(subset_[i]));
  for (std::size_t t = 0; t < subset_.size(); ++t) out[t] = col[static_cast<Index>(subset_[t])];
}

double DenseKernel::diag(std::size_t i) const {
  const auto s = static_cast<Index>(subset_[i]);
  return (*gram_)(s, s);
}

LazyKernel::LazyKernel(const Matrix& data, KernelKind kind, std::size_t cache_bytes)
    : data_(data), kind_(kind) {
  diag_.resize(data_.rows());
  for (Index i = 0; i < data_.rows(); ++i)
    diag_[i] = kind_ == KernelKind::Linear ? data_.row(i).squaredNorm() : data_.row(i).sum();
  const std::size_t row_bytes = std::max<std::size_t>(1, size()) * sizeof(double);
  capacity_rows_ = std::max<std::size_t>(2, cache_bytes / row_bytes);
}

void LazyKernel::row(std::size_t i, std::span<double> out) const {
  if (auto it = cache_.find(i); it != cache_.end()) {
    lru_.splice(lru_.begin(), lru_, it->second.second);
    std::copy(it->second.first.begin(), it->second.first.end(), out.begin());
    return;
  }
  const auto xi = data_.row(static_cast<Index>(i));
  std::vector<double> values(size());
  for (Index t = 0; t < data_.rows(); ++t)
    values[static_cast<std::size_t>(t)] = kind_ == KernelKind::Linear
                                              ? xi.dot(data_.row(t))
                                              : xi.array().min(data_.row(t).array()).sum();
  std::copy(values.begin(), values.end(), out.begin());
  if (cache_.size() >= capacity_rows_) {
    cache_.erase(lru_.back());
    lru_.pop_back();
  }
  lru_.push_front(i);
  cache_.emplace(i, std::make_pair(std::move(values), lru_.begin()));
}

namespace {

constexpr double kTau = 1e-12;

struct Selection {
  std::ptrdiff_t i = -1;
  std::ptrdiff_t j = -1;
  double gap = 0.0;
};

bool in_up(int y, double a, double c) { return y > 0 ? a < c : a > 0.0; }
bool in_low(int y, double a, double c) { return y > 0 ? a > 0.0 : a < c; }

double violation_gap(std::span<const int> y, const std::vector<double>& alpha,
                     const std::vector<double>& grad, double c) {
  double up = -std::numeric_limits<double>::infinity();
  double low = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < y.size(); ++t) {
    const double yg = y[t] * grad[t];
    if (in_up(y[t], alpha[t], c)) up = std::max(up, -yg);
    if (in_low(y[t], alpha[t], c)) low = std::max(low, yg);
  }
  return up + low;
}

}  // namespace

DualSolution solve_dual(const KernelSource& kernel, std::span<const int> y, double c,
                        const SolverOptions& opts) {
  const std::size_t n = kernel.size();
  if (y.size() != n) throw DimensionMismatch("label count does not match kernel size");
  if (!(c > 0.0)) throw InvalidArgument("SVM regularization C must be positive");
  bool has_pos = false;
  bool has_neg = false;
  for (int v : y) {
    if (v != 1 && v != -1) throw InvalidArgument("binary SVM labels must be -1 or +1");
    (v > 0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw InvalidArgument("binary SVM training needs both labels present");

  const std::int64_t max_iter =
      opts.max_iterations > 0 ? opts.max_iterations
                              : std::max<std::int64_t>(10'000'000, 100 * static_cast<std::int64_t>(n));

  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);
  std::vector<double> qd(n);
  for (std::size_t t = 0; t < n; ++t) qd[t] = kernel.diag(t);
  std::vector<double> ki(n);
  std::vector<double> kj(n);

  DualSolution sol;
  std::int64_t iter = 0;
  for (; iter < max_iter; ++iter) {
    // Maximal violating index i, then j by second-order gain.
    Selection sel;
    double gmax = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_up(y[t], alpha[t], c)) continue;
      const double v = -y[t] * grad[t];
      if (v >= gmax) {
        gmax = v;
        sel.i = static_cast<std::ptrdiff_t>(t);
      }
    }
    if (sel.i < 0) break;
    const auto i = static_cast<std::size_t>(sel.i);
    kernel.row(i, ki);

    double gmax2 = -std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(y[t], alpha[t], c)) continue;
      const double v = y[t] * grad[t];
      gmax2 = std::max(gmax2, v);
      const double diff = gmax + v;
      if (diff > 0.0) {
        double quad = qd[i] + qd[t] - 2.0 * ki[t];
        if (quad <= 0.0) quad = kTau;
        const double gain = -(diff * diff) / quad;
        if (gain <= best) {
          best = gain;
          sel.j = static_cast<std::ptrdiff_t>(t);
        }
      }
    }
    sel.gap = gmax + gmax2;
    if (sel.gap < opts.tolerance || sel.j < 0) break;
    const auto j = static_cast<std::size_t>(sel.j);
    kernel.row(j, kj);

    const double old_ai = alpha[i];
    const double old_aj = alpha[j];
    double quad = qd[i] + qd[j] - 2.0 * ki[j];
    if (quad <= 0.0) quad = kTau;

    if (y[i] != y[j]) {
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }

    const double dai = alpha[i] - old_ai;
    const double daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t)
      grad[t] += y[t] * (y[i] * ki[t] * dai + y[j] * kj[t] * daj);
  }

  sol.iterations = iter;
  sol.kkt_gap = violation_gap(y, alpha, grad, c);
  sol.converged = sol.kkt_gap < opts.tolerance;

  // Offset: average over free variables, else midpoint of the feasible range.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= c) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  sol.bias = -rho;

  double obj = 0.0;
  for (std::size_t t = 0; t < n; ++t) obj += alpha[t] * (grad[t] - 1.0);
  sol.objective = 0.5 * obj;
  sol.alpha = std::move(alpha);
  return sol;
}

double BinarySvmModel::decision(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != dim())
    throw DimensionMismatch("SVM expects " + std::to_string(dim()) + "-dim input, got " +
                            std::to_string(x.size()));
  if (degenerate) return bias;
  if (kernel == KernelKind::Linear && weights.size() == x.size()) return weights.dot(x) + bias;
  return decision_kernel(x);
}

double BinarySvmModel::decision_kernel(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != dim())
    throw DimensionMismatch("SVM expects " + std::to_string(dim()) + "-dim input, got " +
                            std::to_string(x.size()));
  double f = bias;
  for (Index s = 0; s < support_vectors.rows(); ++s)
    f += coefficients[s] * kernel_eval(kernel, support_vectors.row(s).transpose(), x);
  return f;
}

void finalize_linear_weights(BinarySvmModel& model) {
  if (model.kernel == KernelKind::Linear && !model.degenerate)
    model.weights = model.support_vectors.transpose() * model.coefficients;
  else
    model.weights.resize(0);
}

BinarySvmModel make_binary_model(const Matrix& data, std::span<const int> labels,
                                 const DualSolution& sol, KernelKind kind, double c) {
  std::vector<Index> sv;
  for (std::size_t t = 0; t < sol.alpha.size(); ++t)
    if (sol.alpha[t] > 0.0) sv.push_back(static_cast<Index>(t));

  BinarySvmModel model;
  model.kernel = kind;
  model.c = c;
  model.bias = sol.bias;
  model.support_vectors.resize(static_cast<Index>(sv.size()), data.cols());
  model.coefficients.resize(static_cast<Index>(sv.size()));
  for (std::size_t s = 0; s < sv.size(); ++s) {
    model.support_vectors.row(static_cast<Index>(s)) = data.row(sv[s]);
    model.coefficients[static_cast<Index>(s)] =
        labels[static_cast<std::size_t>(sv[s])] * sol.alpha[static_cast<std::size_t>(sv[s])];
  }
  finalize_linear_weights(model);
  return model;
}

std::unique_ptr<KernelSource> make_kernel(const Matrix& data, KernelKind kind) {
  constexpr Index kDenseLimit = 4000;
  if (data.rows() <= kDenseLimit)
    return std::make_unique<DenseKernel>(std::make_shared<const Matrix>(gram_matrix(kind, data, data)));
  return std::make_unique<LazyKernel>(data, kind);
}

namespace {

void check_training_data(const Matrix& data, std::size_t n_labels) {
  if (static_cast<std::size_t>(data.rows()) != n_labels)
    throw DimensionMismatch("sample count (" + std::to_string(data.rows()) +
                            ") does not match label count (" + std::to_string(n_labels) + ")");
  if (data.rows() == 0 || data.cols() == 0) throw InvalidArgument("SVM training set is empty");
  if (!data.allFinite()) throw InvalidArgument("SVM training data contains non-finite values");
}

}  // namespace

BinarySvmModel train_binary(const Matrix& data, std::span<const int> labels, KernelKind kind,
                            double c, const SolverOptions& opts) {
  check_training_data(data, labels.size());
  const auto kernel = make_kernel(data, kind);
  const DualSolution sol = solve_dual(*kernel, labels, c, opts);
  return make_binary_model(data, labels, sol, kind, c);
}

OvrSvmModel::OvrSvmModel(LabelSpace labels, std::vector<BinarySvmModel> models,
                         std::vector<std::string> warnings)
    : labels_(std::move(labels)), models_(std::move(models)), warnings_(std::move(warnings)) {
  if (models_.size() != labels_.size())
    throw InvalidArgument("one-vs-rest model needs one binary model per class");
  for (const auto& m : models_)
    if (m.dim() != models_.front().dim())
      throw DimensionMismatch("binary models disagree on input dimension");
}

Index OvrSvmModel::dim() const { return models_.empty() ? 0 : models_.front().dim(); }

Prediction OvrSvmModel::predict(const Eigen::Ref<const Vector>& x) const {
  Prediction p;
  p.decision_values.reserve(models_.size());
  for (const auto& m : models_) p.decision_values.push_back(m.decision(x));
  for (std::size_t k = 1; k < p.decision_values.size(); ++k)
    if (p.decision_values[k] > p.decision_values[static_cast<std::size_t>(p.label)])
      p.label = static_cast<int>(k);
  return p;
}

OvrSvmModel train_ovr(const Matrix& data, std::span<const int> classes, const LabelSpace& labels,
                      const SvmParams& params, const KernelSource* kernel) {
  check_training_data(data, classes.size());
  if (labels.size() < 2) throw InvalidArgument("one-vs-rest training needs at least 2 classes");
  for (int cls : classes)
    if (cls < 0 || static_cast<std::size_t>(cls) >= labels.size())
      throw InvalidArgument("class id " + std::to_string(cls) + " out of range");

  std::unique_ptr<KernelSource> owned;
  if (kernel == nullptr) {
    owned = make_kernel(data, params.kernel);
    kernel = owned.get();
  } else if (kernel->size() != classes.size()) {
    throw DimensionMismatch("kernel size does not match the training set");
  }

  std::vector<BinarySvmModel> models;
  std::vector<std::string> warnings;
  std::vector<int> y(classes.size());
  for (std::size_t cls = 0; cls < labels.size(); ++cls) {
    std::size_t positives = 0;
    for (std::size_t t = 0; t < classes.size(); ++t) {
      y[t] = classes[t] == static_cast<int>(cls) ? 1 : -1;
      positives += y[t] > 0;
    }
    if (positives == 0 || positives == classes.size()) {
      BinarySvmModel m;
      m.kernel = params.kernel;
      m.c = params.c;
      m.degenerate = true;
      m.bias = positives == 0 ? -1.0 : 1.0;
      m.support_vectors.resize(0, data.cols());
      m.coefficients.resize(0);
      warnings.push_back("class '" + labels.name(static_cast<int>(cls)) + "' has " +
                         (positives == 0 ? "no training samples" : "no opposing samples") +
                         "; its decision value is constant");
      models.push_back(std::move(m));
      continue;
    }
    const DualSolution sol = solve_dual(*kernel, y, params.c, params.solver);
    models.push_back(make_binary_model(data, y, sol, params.kernel, params.c));
  }
  return OvrSvmModel(labels, std::move(models), std::move(warnings));
}

}  // namespace scenepool
