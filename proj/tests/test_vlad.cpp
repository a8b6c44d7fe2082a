#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "scenepool/sampling.hpp"
#include "scenepool/vlad.hpp"

using namespace scenepool;

namespace {

Matrix gaussian(Rng& rng, Index n, const Vector& sd) {
  Matrix m(n, sd.size());
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < sd.size(); ++j) m(i, j) = sd[j] * rng.normal();
  return m;
}

Codebook book(std::initializer_list<std::initializer_list<double>> rows) {
  Codebook cb;
  cb.centers.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) cb.centers(i, j++) = v;
    ++i;
  }
  return cb;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("pca recovers axis aligned variances") {
  Rng rng(4);
  const Matrix X = gaussian(rng, 20000, vec({3.0, 1.0, 0.1}));
  const auto pca = fit_pca(X, 2);
  REQUIRE(pca.d_prime() == 2);
  CHECK(std::abs(pca.components(0, 0)) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(std::abs(pca.components(1, 1)) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(std::abs(pca.components(0, 2)) < 0.01);
  CHECK(std::abs(pca.components(1, 2)) < 0.01);
  CHECK(pca.scales[0] == doctest::Approx(3.0).epsilon(0.03));
  CHECK(pca.scales[1] == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("pca rank errors") {
  const Matrix same = Matrix::Constant(10, 4, 2.5);
  CHECK_THROWS_AS(fit_pca(same, 1), InvalidArgument);

  // points on a line in 3-D span one direction
  Matrix line(6, 3);
  for (Index i = 0; i < 6; ++i) line.row(i) << i, 2.0 * i, -1.0 * i;
  CHECK_NOTHROW(fit_pca(line, 1));
  try {
    fit_pca(line, 2);
    FAIL("expected a rank error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("rank 1") != std::string::npos);
  }
  Rng rng(1);
  const Matrix X = oracle::random_matrix(rng, 5, 3);
  CHECK_THROWS_AS(fit_pca(X, 0), InvalidArgument);
  CHECK_THROWS_AS(fit_pca(X, 4), InvalidArgument);
  CHECK_THROWS_AS(fit_pca(X.topRows(2), 2), InvalidArgument);
}

TEST_CASE("full rank whitening gives mahalanobis distances") {
  Rng rng(12);
  Matrix A = oracle::random_matrix(rng, 4, 4);
  const Matrix X = gaussian(rng, 500, Vector::Ones(4)) * A;
  const auto pca = fit_pca(X, 4);
  CHECK((pca.components * pca.components.transpose()).isApprox(Matrix::Identity(4, 4), 1e-12));

  const Vector mu = X.colwise().mean();
  const Matrix C = (X.rowwise() - mu.transpose()).transpose() * (X.rowwise() - mu.transpose()) /
                   static_cast<double>(X.rows());
  const Matrix Cinv = C.inverse();
  for (int t = 0; t < 20; ++t) {
    const Vector a = X.row(static_cast<Index>(rng.below(500)));
    const Vector b = X.row(static_cast<Index>(rng.below(500)));
    const double maha = std::sqrt((a - b).dot(Cinv * (a - b)));
    const double whitened = (pca.project(a) - pca.project(b)).norm();
    CHECK(whitened == doctest::Approx(maha).epsilon(1e-9));
  }
}

TEST_CASE("projection properties") {
  Rng rng(6);
  const Matrix X = oracle::random_matrix(rng, 300, 10) * oracle::random_matrix(rng, 10, 10);
  const auto pca = fit_pca(X, 6);
  CHECK(pca.project(pca.mean).norm() < 1e-12);

  const Matrix P = pca.project_rows(X);
  const Vector mean = P.colwise().mean();
  for (Index j = 0; j < P.cols(); ++j) {
    const double var = (P.col(j).array() - mean[j]).square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
  }

  const Vector a = X.row(0), b = X.row(1);
  // affine map: the mean offset is applied once per call
  const Vector lhs = pca.project(a + b - pca.mean) + pca.project(pca.mean);
  const Vector rhs = pca.project(a) + pca.project(b);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(pca.project(Vector::Zero(3)), DimensionMismatch);
}

TEST_CASE("pca with fewer samples than dimensions") {
  Rng rng(31);
  const Matrix X = oracle::random_matrix(rng, 12, 200, 0.0, 1.0);
  const auto pca = fit_pca(X, 8);
  CHECK((pca.components * pca.components.transpose()).isApprox(Matrix::Identity(8, 8), 1e-10));
  for (Index i = 1; i < 8; ++i) CHECK(pca.scales[i] <= pca.scales[i - 1]);
  const Matrix P = pca.project_rows(X);
  const Vector mean = P.colwise().mean();
  for (Index j = 0; j < P.cols(); ++j)
    CHECK((P.col(j).array() - mean[j]).square().mean() == doctest::Approx(1.0).epsilon(1e-6));
  // the small-sample path yields the same subspace as the covariance path
  const Matrix Xc = X.rowwise() - X.colwise().mean();
  Eigen::SelfAdjointEigenSolver<Matrix> es(Xc.transpose() * Xc / 12.0);
  const Vector top = es.eigenvectors().col(199);
  CHECK(std::abs(top.dot(pca.components.row(0).transpose())) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("kmeans exact cases") {
  Matrix square(4, 2);
  square << 0, 0, 0, 1, 1, 0, 1, 1;
  const auto cb = kmeanspp_fit(square, 4, 3);
  CHECK(cb.inertia == doctest::Approx(0.0));
  for (Index i = 0; i < 4; ++i) {
    const Index c = assign(cb, square.row(i).transpose());
    CHECK(cb.centers.row(c) == square.row(i));
  }

  Matrix line(3, 1);
  line << 0, 1, 2;
  const auto cl = kmeanspp_fit(line, 3, 9);
  CHECK(cl.inertia == doctest::Approx(0.0));
  std::vector<double> centers{cl.centers(0, 0), cl.centers(1, 0), cl.centers(2, 0)};
  std::sort(centers.begin(), centers.end());
  CHECK(centers == std::vector<double>{0, 1, 2});
}

TEST_CASE("kmeans separates two blobs") {
  Rng rng(77);
  const Index n = 200;
  Matrix X(n, 2);
  for (Index i = 0; i < n; ++i) {
    X(i, 0) = 0.1 * rng.normal() + (i < n / 2 ? 0.0 : 10.0);
    X(i, 1) = 0.1 * rng.normal();
  }
  const Vector m0 = X.topRows(n / 2).colwise().mean();
  const Vector m1 = X.bottomRows(n / 2).colwise().mean();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto cb = kmeanspp_fit(X, 2, seed);
    const Index c0 = assign(cb, m0);
    const Index c1 = assign(cb, m1);
    CHECK(c0 != c1);
    CHECK((cb.centers.row(c0).transpose() - m0).norm() < 0.1);
    CHECK((cb.centers.row(c1).transpose() - m1).norm() < 0.1);
    for (std::size_t i = 1; i < cb.inertia_history.size(); ++i)
      CHECK(cb.inertia_history[i] <= cb.inertia_history[i - 1]);
  }
}

TEST_CASE("kmeans is reproducible and checks its inputs") {
  Rng rng(2);
  const Matrix X = oracle::random_matrix(rng, 100, 5);
  const auto a = kmeanspp_fit(X, 6, 11);
  const auto b = kmeanspp_fit(X, 6, 11);
  CHECK(a.centers == b.centers);
  CHECK(a.inertia_history == b.inertia_history);
  CHECK(a.iterations == b.iterations);
  CHECK(a.iterations >= 1);
  CHECK(a.inertia == a.inertia_history.back());

  CHECK_THROWS_AS(kmeanspp_fit(X.topRows(3), 4, 1), InvalidArgument);
  CHECK_THROWS_AS(kmeanspp_fit(Matrix::Ones(10, 2), 2, 1), InvalidArgument);
}

TEST_CASE("assign ties and brute force") {
  const auto cb = book({{0, 0}, {2, 0}, {-2, 0}, {5, 5}});
  CHECK(assign(cb, vec({5, 5})) == 3);
  CHECK(assign(cb, vec({1, 0})) == 0);   // equidistant from centres 0 and 1
  CHECK(assign(cb, vec({-1, 0})) == 0);  // equidistant from centres 0 and 2
  CHECK_THROWS_AS(assign(cb, vec({1, 2, 3})), DimensionMismatch);

  Rng rng(14);
  const Codebook rc{oracle::random_matrix(rng, 7, 5), 0.0, {}, 0};
  for (int t = 0; t < 500; ++t) {
    const Vector x = oracle::random_matrix(rng, 1, 5, -2, 2).row(0).transpose();
    CHECK(assign(rc, x) == oracle::linear_scan_argmin(rc.centers, x));
  }
}

TEST_CASE("vlad hand example") {
  const auto cb = book({{0}, {10}});
  Matrix frames(3, 1);
  frames << 1, 2, 9;
  const auto raw = vlad_encode(cb, frames, VladNormalization::Raw);
  REQUIRE(raw.values.size() == 2);
  CHECK(raw.values[0] == 3);
  CHECK(raw.values[1] == -1);
  CHECK_FALSE(raw.normalized);

  const auto pn = vlad_encode(cb, frames, VladNormalization::PowerL2);
  CHECK(pn.normalized);
  CHECK(pn.values[0] == doctest::Approx(std::sqrt(3.0) / 2.0));
  CHECK(pn.values[1] == doctest::Approx(-0.5));
}

TEST_CASE("vlad of frames on centres is zero") {
  const auto cb = book({{0, 1}, {4, 4}, {-3, 2}});
  Matrix frames(4, 2);
  frames << 4, 4, 0, 1, 0, 1, -3, 2;
  for (auto n : {VladNormalization::Raw, VladNormalization::PowerL2}) {
    const auto code = vlad_encode(cb, frames, n);
    CHECK(code.values == Vector::Zero(6));
  }
}

TEST_CASE("vlad matches the brute force reference and ignores frame order") {
  Rng rng(123);
  for (int t = 0; t < 30; ++t) {
    const Index k = 1 + static_cast<Index>(rng.below(8));
    const Index dp = 1 + static_cast<Index>(rng.below(16));
    const Index m = 1 + static_cast<Index>(rng.below(50));
    const Codebook cb{oracle::random_matrix(rng, k, dp), 0.0, {}, 0};
    const Matrix frames = oracle::random_matrix(rng, m, dp, -2, 2);
    for (auto n : {VladNormalization::Raw, VladNormalization::PowerL2}) {
      const auto code = vlad_encode(cb, frames, n);
      CHECK(code.values.size() == k * dp);
      const Vector ref = oracle::brute_force_vlad(cb.centers, frames, n == VladNormalization::PowerL2);
      CHECK((code.values - ref).cwiseAbs().maxCoeff() <= 1e-10);
    }
    Matrix reversed = frames.colwise().reverse();
    CHECK((vlad_encode(cb, reversed).values - vlad_encode(cb, frames).values).cwiseAbs().maxCoeff() <=
          1e-12);
  }
}

TEST_CASE("fit_vlad end to end") {
  Rng rng(5);
  std::vector<FeatureMatrix> videos;
  for (int v = 0; v < 6; ++v) videos.emplace_back(oracle::random_matrix(rng, 20, 12, 0.0, 1.0), true);
  VladOptions opts;
  opts.k = 4;
  opts.d_prime = 5;
  const auto model = fit_vlad(videos, opts);
  CHECK(model.code_size() == 20);
  CHECK(model.pca.dim() == 12);
  const auto code = model.encode(videos[0]);
  CHECK(code.values.size() == 20);
  CHECK(code.values.norm() == doctest::Approx(1.0));
  const auto again = fit_vlad(videos, opts);
  CHECK(again.codebook.centers == model.codebook.centers);
  CHECK_THROWS_AS(model.encode(FeatureMatrix(Matrix::Ones(3, 7))), DimensionMismatch);
}
