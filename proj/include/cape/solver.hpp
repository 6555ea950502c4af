#pragma once

#include <Eigen/Core>
#include <optional>
#include <stdexcept>
#include <string>

namespace cape {

/// Canonical subproblem:
///   min_w  w'Qw + c'w + sum_j theta_j |w_j|   s.t.  1'w = budget
/// Q symmetric PSD, theta elementwise nonnegative.
struct WeightedL1QP {
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  double budget = 1.0;
  Eigen::VectorXd l1_weights;  // theta, length p, >= 0
};

struct SolverConfig {
  int max_iterations = 10000;
  double primal_tol = 1e-8;
  double dual_tol = 1e-8;
  double penalty_parameter = 1.0;  // splitting step size, adapted at runtime
  double zero_clip = 1e-8;         // |w_j| below this snaps to exact 0
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& msg, double primal_res, double dual_res)
      : std::runtime_error(msg), primal_residual(primal_res),
        dual_residual(dual_res) {}
  double primal_residual;
  double dual_residual;
};

class SingularityError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// sign(v) * max(|v| - t, 0); the proximal map of t*|.|.
double soft_threshold(double v, double t);

/// Exact minimizer of w'Qw + c'w s.t. 1'w = b via the bordered KKT system.
/// Throws SingularityError when the KKT matrix is singular.
Eigen::VectorXd kkt_equality_qp(const Eigen::MatrixXd& Q,
                                const Eigen::VectorXd& c, double b);

/// Stationarity residual of w for the weighted-l1 QP: the distance of
/// -(2Qw + c + h*1) from the subdifferential of sum theta_j |w_j|, with the
/// equality multiplier h chosen to minimize the residual.
double kkt_residual(const WeightedL1QP& problem, const Eigen::VectorXd& w,
                    double zero_clip = 1e-8);

/// Operator-splitting solve: exact bordered-KKT step for the smooth block,
/// coordinatewise soft-threshold for the l1 block, residual-balanced penalty
/// adaptation, then an active-set polish so returned supports carry exact
/// zeros and the budget holds to 1e-8.
/// Throws ConvergenceError after max_iterations, std::invalid_argument on a
/// non-PSD Q.
Eigen::VectorXd solve_weighted_l1_qp(
    const WeightedL1QP& problem, const SolverConfig& config,
    const std::optional<Eigen::VectorXd>& warm_start = std::nullopt);

}  // namespace cape
