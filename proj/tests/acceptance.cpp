// Acceptance gate: each criterion prints one PASS/FAIL line; the exit status
// is non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "malformed_corpus.hpp"
#include "oracles.hpp"
#include "scenepool/aggregation.hpp"
#include "scenepool/evaluation.hpp"
#include "scenepool/io.hpp"
#include "scenepool/svm.hpp"
#include "scenepool/synth.hpp"
#include "scenepool/vlad.hpp"
#include "test_util.hpp"

using namespace scenepool;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------

/// Post-rectifier style activations: max(0, offset + spread * N(0,1)).
Matrix activations(Rng& rng, Index rows, Index cols) {
  const double offset = 4.0 * rng.uniform() - 1.0;
  const double spread = 0.1 + 3.0 * rng.uniform();
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = std::max(0.0, offset + spread * rng.normal());
  return m;
}

/// Mean, sd and max are compared relative to the oracle value. Skewness and
/// kurtosis are already scale-free; their error is taken relative to
/// max(|oracle|, 1) so that theoretically-zero skewness (e.g. two frames)
/// is judged against its natural unit scale rather than rounding noise.
double relative_error(double got, double ref, bool standardized) {
  const double denom = standardized ? std::max(std::abs(ref), 1.0) : std::abs(ref);
  if (denom == 0.0) return std::abs(got);
  return std::abs(got - ref) / denom;
}

Outcome moment_oracle() {
  Rng rng(20240101);
  double worst[5] = {0, 0, 0, 0, 0};
  double aggregation_seconds = 0.0;
  const auto start = Clock::now();
  for (int t = 0; t < 200; ++t) {
    const Index rows = 2 + static_cast<Index>(rng.below(499));
    const Matrix X = activations(rng, rows, 4096);
    const auto t0 = Clock::now();
    const MomentSet got = compute_moments(FeatureMatrix(X, true));
    aggregation_seconds += seconds_since(t0);
    const auto ref = oracle::two_pass_moments(X);
    const Vector* g[5] = {&got.mean, &got.sd, &got.skew, &got.kurt, &got.max};
    const Vector* r[5] = {&ref.mean, &ref.sd, &ref.skew, &ref.kurt, &ref.max};
    for (int m = 0; m < 5; ++m)
      for (Index j = 0; j < X.cols(); ++j)
        worst[m] = std::max(worst[m], relative_error((*g[m])[j], (*r[m])[j], m == 2 || m == 3));
  }
  const double total = seconds_since(start);
  const double max_err = *std::max_element(worst, worst + 5);
  return {max_err <= 1e-10 && total < 60.0,
          fmt("200 matrices x 4096 cols; max rel err mean %.2e sd %.2e skew %.2e kurt %.2e "
              "max %.2e (limit 1e-10); %.1f s total, %.1f s in aggregation (limit 60 s)",
              worst[0], worst[1], worst[2], worst[3], worst[4], total, aggregation_seconds)};
}

// ---------------------------------------------------------------------------

Outcome permutation_invariance() {
  Rng rng(777);
  int identical = 0;
  const std::vector<Measure> all{Measure::Mean, Measure::Sd, Measure::Skew, Measure::Kurt,
                                 Measure::Max};
  for (int t = 0; t < 100; ++t) {
    const Index rows = 2 + static_cast<Index>(rng.below(299));
    const Index cols = 1 + static_cast<Index>(rng.below(512));
    const Matrix X = activations(rng, rows, cols);
    std::vector<Index> p(static_cast<std::size_t>(rows));
    for (Index i = 0; i < rows; ++i) p[static_cast<std::size_t>(i)] = i;
    for (std::size_t i = p.size(); i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
    Matrix P(rows, cols);
    for (Index i = 0; i < rows; ++i) P.row(i) = X.row(p[static_cast<std::size_t>(i)]);

    const FeatureMatrix a(X), b(P);
    bool same = true;
    for (Measure m : all) same = same && aggregate(a, m) == aggregate(b, m);
    for (auto norm : {Normalization::None, Normalization::PerBlock, Normalization::Global})
      same = same && aggregate_combo(a, all, norm).values() == aggregate_combo(b, all, norm).values();
    identical += same;
  }
  return {identical == 100,
          fmt("%d/100 permuted matrices give bit-identical mean, sd, skew, kurt, max and combined "
              "descriptors",
              identical)};
}

// ---------------------------------------------------------------------------

Outcome vlad_brute_force() {
  Rng rng(4242);
  double worst = 0.0;
  bool sizes_ok = true;
  for (int t = 0; t < 100; ++t) {
    const Index k = 1 + static_cast<Index>(rng.below(8));
    const Index dp = 1 + static_cast<Index>(rng.below(16));
    const Index m = 1 + static_cast<Index>(rng.below(50));
    Codebook cb;
    cb.centers = oracle::random_matrix(rng, k, dp, -1.5, 1.5);
    Matrix frames = oracle::random_matrix(rng, m, dp, -2.0, 2.0);
    if (t % 10 == 0) frames.row(0) = cb.centers.row(0);  // zero residual rows
    for (auto norm : {VladNormalization::Raw, VladNormalization::PowerL2}) {
      const auto code = vlad_encode(cb, frames, norm);
      sizes_ok = sizes_ok && code.values.size() == k * dp;
      const Vector ref =
          oracle::brute_force_vlad(cb.centers, frames, norm == VladNormalization::PowerL2);
      worst = std::max(worst, (code.values - ref).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-10 && sizes_ok,
          fmt("100 instances (M<=50, k<=8, D'<=16), raw and power-l2; max abs diff %.2e "
              "(limit 1e-10); code length k*D' %s",
              worst, sizes_ok ? "always" : "NOT always")};
}

// ---------------------------------------------------------------------------

Outcome kmeans_blobs() {
  const Index dim = 8, per_blob = 200;
  const double sigma = 1.0;
  int recovered = 0;
  int non_monotone = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(mix_seed(9001, seed));
    Vector dir(dim);
    for (Index j = 0; j < dim; ++j) dir[j] = rng.normal();
    dir.normalize();
    const Vector mu0 = Vector::Zero(dim);
    const Vector mu1 = 100.0 * sigma * dir;
    Matrix X(2 * per_blob, dim);
    for (Index i = 0; i < 2 * per_blob; ++i)
      for (Index j = 0; j < dim; ++j)
        X(i, j) = (i < per_blob ? mu0[j] : mu1[j]) + sigma * rng.normal();

    const Codebook cb = kmeanspp_fit(X, 2, seed);
    for (std::size_t i = 1; i < cb.inertia_history.size(); ++i)
      non_monotone += cb.inertia_history[i] > cb.inertia_history[i - 1];
    const Vector c0 = cb.centers.row(0).transpose(), c1 = cb.centers.row(1).transpose();
    const bool straight = (c0 - mu0).norm() <= sigma && (c1 - mu1).norm() <= sigma;
    const bool swapped = (c0 - mu1).norm() <= sigma && (c1 - mu0).norm() <= sigma;
    recovered += straight || swapped;
  }
  return {recovered >= 99 && non_monotone == 0,
          fmt("blobs 100 sigma apart, k=2: means recovered within 1 sigma for %d/100 seeds "
              "(need 99); %d inertia increases across all recorded iterations",
              recovered, non_monotone)};
}

// ---------------------------------------------------------------------------

/// Points in [-1,1]^d labelled by a random hyperplane, keeping a margin.
void separable_problem(Rng& rng, Index n, Index dim, Matrix& X, std::vector<int>& y) {
  Vector w(dim);
  for (Index j = 0; j < dim; ++j) w[j] = rng.normal();
  const double b = 0.3 * rng.normal();
  X.resize(n, dim);
  y.assign(static_cast<std::size_t>(n), 0);
  Index filled = 0;
  int pos = 0, neg = 0;
  while (filled < n) {
    Vector x(dim);
    for (Index j = 0; j < dim; ++j) x[j] = 2.0 * rng.uniform() - 1.0;
    const double s = (w.dot(x) + b) / w.norm();
    if (std::abs(s) < 0.05) continue;
    const int label = s > 0 ? 1 : -1;
    // keep both classes present
    if (filled == n - 1 && (label > 0 ? neg : pos) == 0) continue;
    (label > 0 ? pos : neg)++;
    X.row(filled) = x.transpose();
    y[static_cast<std::size_t>(filled++)] = label;
  }
}

struct SolveCheck {
  bool feasible = true;
  double kkt_gap = 0.0;
  bool converged = true;
};

SolveCheck train_and_check(const Matrix& X, const std::vector<int>& y, KernelKind kind, double c,
                           DualSolution* out = nullptr) {
  auto gram = std::make_shared<const Matrix>(gram_matrix(kind, X, X));
  DenseKernel k(gram);
  const DualSolution sol = solve_dual(k, y, c);
  const Matrix Q = oracle::signed_gram(X, y, kind == KernelKind::Hik);
  const auto kkt = oracle::check_kkt(Q, y, sol.alpha, c);
  if (out) *out = sol;
  return {kkt.feasible, kkt.gap, sol.converged};
}

Outcome svm_correctness() {
  Rng rng(31337);
  const double tolerance = SolverOptions{}.tolerance;
  int perfect = 0, models = 0, kkt_fail = 0;
  double worst_gap = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Index n = 4 + static_cast<Index>(rng.below(37));
    const Index dim = 2 + static_cast<Index>(rng.below(9));
    Matrix X;
    std::vector<int> y;
    separable_problem(rng, n, dim, X, y);
    const auto check = train_and_check(X, y, KernelKind::Linear, 1e3);
    ++models;
    worst_gap = std::max(worst_gap, check.kkt_gap);
    kkt_fail += !(check.feasible && check.converged && check.kkt_gap <= tolerance);

    const auto model = train_binary(X, y, KernelKind::Linear, 1e3);
    int correct = 0;
    for (Index i = 0; i < n; ++i)
      correct += (model.decision(X.row(i).transpose()) > 0 ? 1 : -1) == y[static_cast<std::size_t>(i)];
    perfect += correct == n;
  }

  double worst_obj = 0.0;
  int qp_problems = 0;
  for (int t = 0; t < 40; ++t) {
    const Index n = 2 + static_cast<Index>(rng.below(19));
    Matrix X;
    std::vector<int> y;
    if (t % 2 == 0) {
      separable_problem(rng, n, 3, X, y);
    } else {
      oracle::separable_blobs(rng, n, 3, 0.5, 1.0, X, y);  // overlapping
    }
    for (auto kind : {KernelKind::Linear, KernelKind::Hik}) {
      const Matrix data = kind == KernelKind::Hik ? Matrix(X.array().abs()) : X;
      DualSolution sol;
      const auto check = train_and_check(data, y, kind, 1.0, &sol);
      ++models;
      worst_gap = std::max(worst_gap, check.kkt_gap);
      kkt_fail += !(check.feasible && check.converged && check.kkt_gap <= tolerance);
      const Matrix Q = oracle::signed_gram(data, y, kind == KernelKind::Hik);
      const double best = oracle::qp_dual_optimum(Q, y, 1.0);
      worst_obj = std::max(worst_obj, std::abs(oracle::dual_objective(Q, sol.alpha) - best));
      ++qp_problems;
    }
  }
  return {perfect == 50 && kkt_fail == 0 && worst_obj <= 1e-4,
          fmt("KKT/feasibility failures %d/%d models (worst gap %.2e, tol %.0e); "
              "separable at C=1e3: %d/50 with 100%% training accuracy; "
              "dual objective vs QP oracle on %d problems (n<=20): max diff %.2e (limit 1e-4)",
              kkt_fail, models, worst_gap, tolerance, perfect, qp_problems, worst_obj)};
}

// ---------------------------------------------------------------------------

LabeledVideos through_disk(const LabeledVideos& videos, const testutil::TempDir& dir) {
  write_dataset(videos, dir.path());
  return load_videos(read_manifest(dir / "manifest.json"));
}

double lovo_accuracy(const LabeledVideos& videos, Measure measure) {
  DescriptorRecipe recipe;
  recipe.measures = {measure};
  const auto set = build_descriptor_set(videos, recipe);
  return lovo_evaluate(set.labels, set.classes, set.descriptors, {KernelKind::Linear, 1.0, {}})
      .overall_accuracy;
}

Outcome synthetic_variance() {
  const auto start = Clock::now();
  testutil::TempDir dir("accept_variance");
  SynthOptions opts;
  opts.kind = SynthKind::Variance;  // 5 classes x 10 videos x 60 frames x 32 dims
  const auto videos = through_disk(synthesize(opts), dir);
  const double sd = lovo_accuracy(videos, Measure::Sd);
  const double mean = lovo_accuracy(videos, Measure::Mean);
  const double secs = seconds_since(start);
  return {sd >= 95.0 && mean <= 40.0 && secs < 120.0,
          fmt("5x10x60x32, equal means / class-specific variance, LOVO linear: sd %.2f%% "
              "(need >= 95), mean %.2f%% (need <= 40); %.1f s (limit 120 s)",
              sd, mean, secs)};
}

// ---------------------------------------------------------------------------

Outcome frames_curve() {
  testutil::TempDir dir("accept_frames");
  SynthOptions opts;
  opts.kind = SynthKind::NoisyMean;
  const auto videos = through_disk(synthesize(opts), dir);
  const std::vector<std::size_t> ns{1, 30};
  const SvmParams params{KernelKind::Linear, 1.0, {}};
  const auto a = frames_vs_accuracy(videos, ns, 18, 2015, params);
  const auto b = frames_vs_accuracy(videos, ns, 18, 2015, params);
  bool deterministic = true;
  for (std::size_t i = 0; i < ns.size(); ++i)
    deterministic = deterministic && a.points[i].accuracies == b.points[i].accuracies &&
                    a.points[i].mean == b.points[i].mean;
  const auto& one = a.points[0];
  const auto& thirty = a.points[1];
  const double gain = thirty.mean - one.mean;
  const double spread1 = one.max - one.min, spread30 = thirty.max - thirty.min;
  return {gain >= 10.0 && spread30 < spread1 && deterministic,
          fmt("noisy-mean 5x10x60x32, 18 trials: mean N=1 %.2f%%, N=30 %.2f%% (gain %.2f, need "
              ">= 10); min-max spread N=1 %.2f, N=30 %.2f (need strictly smaller); rerun %s",
              one.mean, thirty.mean, gain, spread1, spread30,
              deterministic ? "bit-identical" : "DIFFERS")};
}

// ---------------------------------------------------------------------------

Outcome majority_vote_gain() {
  testutil::TempDir dir("accept_vote");
  SynthOptions opts;
  opts.kind = SynthKind::VoteNoise;
  opts.videos_per_class = 8;
  opts.frames = 20;
  opts.dim = 16;
  opts.noise_fraction = 0.4;
  const auto videos = through_disk(synthesize(opts), dir);
  const SvmParams params{KernelKind::Linear, 1.0, {}};
  const double single = lovo_majority_vote(videos, 1, params).overall_accuracy;
  const double vote = lovo_majority_vote(videos, 10, params).overall_accuracy;
  return {vote > single,
          fmt("5x8x20x16 with 40%% confusing frames per video: majority vote over 10 frames "
              "%.2f%% vs single centre frame %.2f%% (need strictly greater)",
              vote, single)};
}

// ---------------------------------------------------------------------------

Outcome format_round_trip() {
  testutil::TempDir dir("accept_format");
  const auto path = dir / "x.safv";
  Rng rng(65537);
  int exact = 0;
  std::size_t largest = 0;
  for (int t = 0; t < 1000; ++t) {
    const Index rows = 1 + static_cast<Index>(rng.below(512));
    const Index cols = 1 + static_cast<Index>(rng.below(4096));
    const bool relu = rng.below(2) == 1;
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) {
        std::uint32_t bits;
        float f;
        do {
          bits = static_cast<std::uint32_t>(rng.next());
          if (relu) bits &= 0x7FFFFFFFu;
          std::memcpy(&f, &bits, 4);
        } while (!std::isfinite(f));
        m(i, j) = static_cast<double>(f);
      }
    const FeatureMatrix X(m, relu);
    write_feature_file(path, X);
    const auto bytes = read_bytes(path);
    const FeatureMatrix back = read_feature_file(path);
    bool same = back.post_relu() == relu && back.frames() == rows && back.dim() == cols &&
                bytes.size() == kFeatureHeaderBytes + 4 * static_cast<std::size_t>(rows * cols);
    for (Index i = 0; same && i < rows; ++i)
      for (Index j = 0; same && j < cols; ++j) {
        const float a = static_cast<float>(m(i, j)), b = static_cast<float>(back.values()(i, j));
        same = std::memcmp(&a, &b, 4) == 0;
      }
    same = same && encode_feature_file(back) == bytes;
    exact += same;
    largest = std::max(largest, bytes.size());
  }

  int rejected = 0, total = 0;
  for (const auto& [name, bytes] : corpus::malformed()) {
    ++total;
    write_bytes(path, bytes);
    try {
      read_feature_file(path);
    } catch (const FormatError&) {
      ++rejected;
    }
  }
  return {exact == 1000 && rejected == total,
          fmt("%d/1000 random files (up to 512x4096, largest %zu bytes) round-trip bit-exactly "
              "via disk; %d/%d malformed files rejected",
              exact, largest, rejected, total)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"moment oracle equivalence", moment_oracle},
      {"permutation invariance", permutation_invariance},
      {"VLAD brute-force equivalence", vlad_brute_force},
      {"K-Means++ sanity", kmeans_blobs},
      {"SVM correctness", svm_correctness},
      {"synthetic end-to-end (sd vs mean)", synthetic_variance},
      {"frames-vs-accuracy shape", frames_curve},
      {"majority-vote property", majority_vote_gain},
      {"feature file round-trip", format_round_trip},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu acceptance criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
