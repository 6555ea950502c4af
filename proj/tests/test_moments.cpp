#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>

#include "cape/moments.hpp"
#include "cape/rng.hpp"
#include "test_util.hpp"

using namespace cape;

namespace {

ReturnPanel make_panel(const Eigen::MatrixXd& returns) {
  ReturnPanel p;
  p.returns = returns;
  for (int i = 0; i < returns.rows(); ++i)
    p.dates.push_back("d" + std::to_string(i));
  for (int j = 0; j < returns.cols(); ++j)
    p.assets.push_back("a" + std::to_string(j));
  return p;
}

ReturnPanel random_panel(int n, int p, std::uint64_t seed) {
  StreamRng rng(seed, 0, StreamRng::kGeneric);
  return make_panel(0.01 * testutil::random_matrix(n, p, rng));
}

}  // namespace

TEST_CASE("sample_mean basic examples") {
  Eigen::MatrixXd r(2, 1);
  r << 0.1, 0.3;
  CHECK(sample_mean(make_panel(r)) (0) == doctest::Approx(0.2).epsilon(1e-15));

  // identical rows -> the row itself
  Eigen::MatrixXd rep(5, 3);
  for (int i = 0; i < 5; ++i) rep.row(i) << 0.01, -0.02, 0.005;
  Eigen::VectorXd mu = sample_mean(make_panel(rep));
  CHECK(mu(0) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(mu(1) == doctest::Approx(-0.02).epsilon(1e-15));
  CHECK(mu(2) == doctest::Approx(0.005).epsilon(1e-15));
}

TEST_CASE("sample_mean matches naive per-column loop") {
  ReturnPanel panel = random_panel(3, 2, 11);
  Eigen::VectorXd mu = sample_mean(panel);
  for (int j = 0; j < 2; ++j) {
    double acc = 0;
    for (int i = 0; i < 3; ++i) acc += panel.returns(i, j);
    CHECK(std::abs(mu(j) - acc / 3.0) <= 1e-15);
  }
}

TEST_CASE("sample_covariance examples") {
  Eigen::MatrixXd rep(4, 2);
  for (int i = 0; i < 4; ++i) rep.row(i) << 0.03, -0.01;
  CHECK(sample_covariance(make_panel(rep)).cwiseAbs().maxCoeff() <= 1e-18);

  Eigen::MatrixXd two(2, 1);
  two << 0.0, 2.0;
  CHECK(sample_covariance(make_panel(two))(0, 0) ==
        doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("sample_covariance matches two-pass oracle") {
  ReturnPanel panel = random_panel(10, 3, 17);
  Eigen::MatrixXd s = sample_covariance(panel);
  // Independent two-pass computation.
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(3);
  for (int i = 0; i < 10; ++i) mu += panel.returns.row(i).transpose();
  mu /= 10.0;
  Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(3, 3);
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd d = panel.returns.row(i).transpose() - mu;
    oracle += d * d.transpose();
  }
  oracle /= 9.0;
  CHECK((s - oracle).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("sample_covariance symmetric PSD on random panels") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ReturnPanel panel = random_panel(8 + int(seed % 5), 4, 100 + seed);
    Eigen::MatrixXd s = sample_covariance(panel);
    CHECK((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("linear shrinkage trivial cases") {
  // p = 1: target m*I equals S, so the output is the sample variance.
  ReturnPanel panel = random_panel(30, 1, 5);
  Eigen::MatrixXd s = sample_covariance(panel);
  LinearShrinkageResult res = linear_shrinkage(panel);
  CHECK(res.sigma(0, 0) == doctest::Approx(s(0, 0)).epsilon(1e-14));

  // S = m*I: rows alternate so the sample covariance is diagonal-isotropic.
  Eigen::MatrixXd r(4, 2);
  r << 1, 1, -1, 1, 1, -1, -1, -1;  // columns uncorrelated, equal variance
  ReturnPanel iso = make_panel(r);
  Eigen::MatrixXd si = sample_covariance(iso);
  REQUIRE((si - (si.trace() / 2.0) *
                    Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <=
          1e-14);
  LinearShrinkageResult res2 = linear_shrinkage(iso);
  CHECK((res2.sigma - si).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("linear shrinkage matches independent formula transcription") {
  // Spiked panel: one strong common component plus noise.
  StreamRng rng(42, 0, StreamRng::kGeneric);
  const int n = 50, p = 20;
  Eigen::MatrixXd r(n, p);
  for (int i = 0; i < n; ++i) {
    double common = rng.normal();
    for (int j = 0; j < p; ++j) r(i, j) = 0.8 * common + 0.3 * rng.normal();
  }
  ReturnPanel panel = make_panel(r);

  // Independent transcription of the pinned formulas.
  Eigen::RowVectorXd mu = r.colwise().mean();
  Eigen::MatrixXd x = r.rowwise() - mu;
  Eigen::MatrixXd s = x.transpose() * x / double(n - 1);
  double m = s.trace() / double(p);
  double d2 = (s - m * Eigen::MatrixXd::Identity(p, p)).squaredNorm();
  double b2 = 0.0;
  for (int t = 0; t < n; ++t) {
    Eigen::VectorXd xt = x.row(t).transpose();
    b2 += (xt * xt.transpose() - s).squaredNorm();
  }
  b2 /= double(n) * double(n);
  double rho = std::min(1.0, b2 / d2);
  Eigen::MatrixXd expected =
      rho * m * Eigen::MatrixXd::Identity(p, p) + (1.0 - rho) * s;

  LinearShrinkageResult res = linear_shrinkage(panel);
  CHECK(res.intensity == doctest::Approx(rho).epsilon(1e-12));
  CHECK(res.target_scale == doctest::Approx(m).epsilon(1e-12));
  CHECK((res.sigma - expected).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("linear shrinkage intensity and conditioning invariants") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    int n = 10 + int(seed % 20);
    int p = 2 + int(seed % 7);
    ReturnPanel panel = random_panel(n, p, 500 + seed);
    LinearShrinkageResult res = linear_shrinkage(panel);
    CHECK(res.intensity >= 0.0);
    CHECK(res.intensity <= 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(res.sigma);
    CHECK(eig.eigenvalues().minCoeff() >=
          res.intensity * res.target_scale - 1e-10);
  }
}

TEST_CASE("permutation equivariance of estimated moments") {
  ReturnPanel panel = random_panel(15, 4, 77);
  MomentEstimate base = estimate_moments(panel, "linear-shrinkage");

  std::vector<int> perm = {2, 0, 3, 1};
  ReturnPanel shuffled = panel;
  for (int j = 0; j < 4; ++j) {
    shuffled.returns.col(j) = panel.returns.col(perm[j]);
    shuffled.assets[j] = panel.assets[perm[j]];
  }
  MomentEstimate other = estimate_moments(shuffled, "linear-shrinkage");
  for (int j = 0; j < 4; ++j) {
    CHECK(other.mu(j) == doctest::Approx(base.mu(perm[j])).epsilon(1e-14));
    for (int k = 0; k < 4; ++k)
      CHECK(other.sigma(j, k) ==
            doctest::Approx(base.sigma(perm[j], perm[k])).epsilon(1e-12));
  }
}

TEST_CASE("estimate_moments tags and validation") {
  ReturnPanel panel = random_panel(12, 3, 3);
  CHECK(estimate_moments(panel, "sample").estimator_tag == "sample");
  CHECK(estimate_moments(panel, "lse").estimator_tag == "linear-shrinkage");
  CHECK(estimate_moments(panel, "linear-shrinkage").estimator_tag ==
        "linear-shrinkage");
  CHECK_THROWS_AS(estimate_moments(panel, "bogus"), std::invalid_argument);

  ReturnPanel bad = panel;
  bad.returns(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  ReturnPanel one_row = make_panel(Eigen::MatrixXd::Zero(1, 2));
  CHECK_THROWS_AS(one_row.validate(), std::invalid_argument);
}
