#pragma once

#include <Eigen/Core>
#include <string>

#include "cape/panel.hpp"

namespace cape {

/// (mu, sigma) pair with estimator provenance.
/// sigma is always returned symmetrized: (A + A^T) / 2.
struct MomentEstimate {
  Eigen::VectorXd mu;     // length p, per-day expected excess return
  Eigen::MatrixXd sigma;  // p x p, per-day covariance
  std::string estimator_tag;  // "sample" or "linear-shrinkage"
};

/// Columnwise arithmetic mean.
Eigen::VectorXd sample_mean(const ReturnPanel& panel);

/// Centered covariance with divisor n-1, symmetrized.
Eigen::MatrixXd sample_covariance(const ReturnPanel& panel);

struct LinearShrinkageResult {
  Eigen::MatrixXd sigma;
  double intensity;     // rho in [0, 1]
  double target_scale;  // m = trace(S) / p
};

/// Convex combination rho*m*I + (1-rho)*S with the well-conditioned target
/// m*I, m = trace(S)/p, and
///   rho = min(1, b2 / d2),
///   b2  = (1/n^2) * sum_t ||x_t x_t' - S||_F^2   (x_t the centered rows),
///   d2  = ||S - m*I||_F^2.
LinearShrinkageResult linear_shrinkage(const ReturnPanel& panel);

Eigen::MatrixXd linear_shrinkage_covariance(const ReturnPanel& panel);

/// estimator_tag: "sample" or one of {"lse", "linear-shrinkage"}.
/// The mean is the sample mean in either case.
MomentEstimate estimate_moments(const ReturnPanel& panel,
                                const std::string& estimator_tag);

}  // namespace cape
