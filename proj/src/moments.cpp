#include "cape/moments.hpp"

#include <algorithm>
#include <stdexcept>

namespace cape {

Eigen::VectorXd sample_mean(const ReturnPanel& panel) {
  if (panel.days() < 1 || panel.num_assets() < 1)
    throw std::invalid_argument("sample_mean: empty panel");
  panel.validate();
  return panel.returns.colwise().mean().transpose();
}

Eigen::MatrixXd sample_covariance(const ReturnPanel& panel) {
  panel.validate();
  const int n = panel.days();
  if (n < 2) throw std::invalid_argument("sample_covariance: need n >= 2");
  Eigen::RowVectorXd mean = panel.returns.colwise().mean();
  Eigen::MatrixXd centered = panel.returns.rowwise() - mean;
  Eigen::MatrixXd cov = (centered.transpose() * centered) / double(n - 1);
  return ((cov + cov.transpose()) / 2.0).eval();
}

LinearShrinkageResult linear_shrinkage(const ReturnPanel& panel) {
  panel.validate();
  const int n = panel.days();
  const int p = panel.num_assets();
  if (n < 2) throw std::invalid_argument("linear_shrinkage: need n >= 2");

  Eigen::RowVectorXd mean = panel.returns.colwise().mean();
  Eigen::MatrixXd centered = panel.returns.rowwise() - mean;
  Eigen::MatrixXd S = (centered.transpose() * centered) / double(n - 1);
  S = ((S + S.transpose()) / 2.0).eval();

  const double m = S.trace() / double(p);
  Eigen::MatrixXd target = m * Eigen::MatrixXd::Identity(p, p);
  const double d2 = (S - target).squaredNorm();

  // b2 = (1/n^2) sum_t || x_t x_t' - S ||_F^2
  double b_sum = 0.0;
  for (int t = 0; t < n; ++t) {
    Eigen::VectorXd x = centered.row(t).transpose();
    b_sum += (x * x.transpose() - S).squaredNorm();
  }
  const double b2 = b_sum / (double(n) * double(n));

  double rho = 0.0;
  if (d2 > 1e-300) rho = std::clamp(b2 / d2, 0.0, 1.0);

  LinearShrinkageResult result;
  result.intensity = rho;
  result.target_scale = m;
  result.sigma = rho * target + (1.0 - rho) * S;
  result.sigma = ((result.sigma + result.sigma.transpose()) / 2.0).eval();
  return result;
}

Eigen::MatrixXd linear_shrinkage_covariance(const ReturnPanel& panel) {
  return linear_shrinkage(panel).sigma;
}

MomentEstimate estimate_moments(const ReturnPanel& panel,
                                const std::string& estimator_tag) {
  MomentEstimate est;
  est.mu = sample_mean(panel);
  if (estimator_tag == "sample") {
    est.sigma = sample_covariance(panel);
    est.estimator_tag = "sample";
  } else if (estimator_tag == "lse" || estimator_tag == "linear-shrinkage") {
    est.sigma = linear_shrinkage_covariance(panel);
    est.estimator_tag = "linear-shrinkage";
  } else {
    throw std::invalid_argument("estimate_moments: unknown estimator `" +
                                estimator_tag + "`");
  }
  return est;
}

}  // namespace cape
