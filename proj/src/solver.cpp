#include "cape/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace cape {

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

Eigen::VectorXd kkt_equality_qp(const Eigen::MatrixXd& Q,
                                const Eigen::VectorXd& c, double b) {
  const Eigen::Index p = Q.rows();
  if (Q.cols() != p || c.size() != p)
    throw std::invalid_argument("kkt_equality_qp: dimension mismatch");
  // Bordered system [2Q 1; 1' 0] [w; h] = [-c; b].
  Eigen::MatrixXd kkt(p + 1, p + 1);
  kkt.topLeftCorner(p, p) = 2.0 * Q;
  kkt.topRightCorner(p, 1).setOnes();
  kkt.bottomLeftCorner(1, p).setOnes();
  kkt(p, p) = 0.0;
  Eigen::VectorXd rhs(p + 1);
  rhs.head(p) = -c;
  rhs(p) = b;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible())
    throw SingularityError("kkt_equality_qp: singular KKT system");
  Eigen::VectorXd sol = lu.solve(rhs);
  return sol.head(p);
}

namespace {

// Equality multiplier minimizing the stationarity residual: on the support
// the condition 2Qw + c + h + theta*sign(w) = 0 pins h coordinatewise; take
// the mean. With an empty support pick h from the intersection of the
// subdifferential intervals (its midpoint when nonempty).
double best_multiplier(const Eigen::VectorXd& grad,
                       const Eigen::VectorXd& theta, const Eigen::VectorXd& w,
                       double zero_clip) {
  double sum = 0.0;
  int count = 0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (std::abs(w(j)) >= zero_clip) {
      sum += -grad(j) - theta(j) * (w(j) > 0 ? 1.0 : -1.0);
      ++count;
    }
  }
  if (count > 0) return sum / count;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    lo = std::max(lo, -grad(j) - theta(j));
    hi = std::min(hi, -grad(j) + theta(j));
  }
  if (lo <= hi) return (lo + hi) / 2.0;
  return (lo + hi) / 2.0;  // infeasible either way; midpoint minimizes max violation
}

}  // namespace

double kkt_residual(const WeightedL1QP& problem, const Eigen::VectorXd& w,
                    double zero_clip) {
  const Eigen::VectorXd grad = 2.0 * problem.Q * w + problem.c;
  const double h = best_multiplier(grad, problem.l1_weights, w, zero_clip);
  double res = 0.0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    const double g = grad(j) + h;
    if (std::abs(w(j)) >= zero_clip) {
      res = std::max(res, std::abs(g + problem.l1_weights(j) *
                                           (w(j) > 0 ? 1.0 : -1.0)));
    } else {
      res = std::max(res, std::max(0.0, std::abs(g) - problem.l1_weights(j)));
    }
  }
  return res;
}

namespace {

// Exact solve on a candidate support with fixed signs:
//   min w_A' Q_AA w_A + (c_A + theta_A .* s_A)' w_A   s.t. 1'w_A = b.
// Dense bordered solve on the restricted block.
Eigen::VectorXd restricted_signed_solve(const WeightedL1QP& problem,
                                        const std::vector<int>& support,
                                        const std::vector<double>& signs) {
  const int k = static_cast<int>(support.size());
  Eigen::MatrixXd Q(k, k);
  Eigen::VectorXd c(k);
  for (int a = 0; a < k; ++a) {
    c(a) = problem.c(support[a]) + problem.l1_weights(support[a]) * signs[a];
    for (int b2 = 0; b2 < k; ++b2)
      Q(a, b2) = problem.Q(support[a], support[b2]);
  }
  return kkt_equality_qp(Q, c, problem.budget);
}

struct PolishResult {
  Eigen::VectorXd w;
  bool ok = false;
};

// Active-set refinement from a candidate support/sign pattern. Alternates
// exact restricted solves with support updates (drop zero-clipped or
// sign-flipped coordinates, add the worst dual violator) until the KKT
// conditions hold.
PolishResult polish(const WeightedL1QP& problem, const Eigen::VectorXd& z,
                    const SolverConfig& config, double kkt_tol) {
  const Eigen::Index p = problem.Q.rows();
  std::vector<int> support;
  std::vector<double> signs;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (std::abs(z(j)) >= config.zero_clip) {
      support.push_back(static_cast<int>(j));
      signs.push_back(z(j) > 0 ? 1.0 : -1.0);
    }
  }

  PolishResult out;
  out.w = Eigen::VectorXd::Zero(p);

  const int max_passes = 4 * static_cast<int>(p) + 20;
  for (int pass = 0; pass < max_passes; ++pass) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    if (support.empty()) {
      if (std::abs(problem.budget) > 1e-12) return out;  // cannot meet budget
    } else {
      Eigen::VectorXd w_restricted;
      try {
        w_restricted = restricted_signed_solve(problem, support, signs);
      } catch (const SingularityError&) {
        return out;
      }
      for (size_t a = 0; a < support.size(); ++a)
        w(support[a]) = w_restricted(a);
    }

    // Drop coordinates that collapsed to zero or flipped sign.
    bool changed = false;
    std::vector<int> next_support;
    std::vector<double> next_signs;
    for (size_t a = 0; a < support.size(); ++a) {
      const double wj = w(support[a]);
      if (std::abs(wj) < config.zero_clip) {
        changed = true;
        continue;
      }
      const double s = wj > 0 ? 1.0 : -1.0;
      if (s != signs[a]) changed = true;
      next_support.push_back(support[a]);
      next_signs.push_back(s);
    }
    if (changed) {
      support = std::move(next_support);
      signs = std::move(next_signs);
      continue;
    }

    // Dual feasibility off the support; admit the worst violator.
    const Eigen::VectorXd grad = 2.0 * problem.Q * w + problem.c;
    const double h =
        best_multiplier(grad, problem.l1_weights, w, config.zero_clip);
    double worst = 0.0;
    int worst_j = -1;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (std::abs(w(j)) >= config.zero_clip) continue;
      const double viol = std::abs(grad(j) + h) - problem.l1_weights(j);
      if (viol > worst) {
        worst = viol;
        worst_j = static_cast<int>(j);
      }
    }
    if (worst > kkt_tol && worst_j >= 0) {
      support.push_back(worst_j);
      signs.push_back(grad(worst_j) + h > 0 ? -1.0 : 1.0);
      continue;
    }

    out.w = w;
    out.ok = kkt_residual(problem, w, config.zero_clip) <= kkt_tol;
    return out;
  }
  return out;
}

void check_psd(const Eigen::MatrixXd& Q) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(Q);
  if (ldlt.info() != Eigen::Success)
    throw std::invalid_argument("solve_weighted_l1_qp: Q factorization failed");
  const double scale = std::max(1.0, Q.diagonal().cwiseAbs().maxCoeff());
  if (ldlt.vectorD().minCoeff() < -1e-8 * scale)
    throw std::invalid_argument("solve_weighted_l1_qp: Q is not PSD");
}

}  // namespace

Eigen::VectorXd solve_weighted_l1_qp(
    const WeightedL1QP& problem, const SolverConfig& config,
    const std::optional<Eigen::VectorXd>& warm_start) {
  const Eigen::Index p = problem.Q.rows();
  if (problem.Q.cols() != p || problem.c.size() != p ||
      problem.l1_weights.size() != p)
    throw std::invalid_argument("solve_weighted_l1_qp: dimension mismatch");
  if ((problem.Q - problem.Q.transpose()).cwiseAbs().maxCoeff() >
      1e-10 * std::max(1.0, problem.Q.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("solve_weighted_l1_qp: Q is not symmetric");
  if (problem.l1_weights.minCoeff() < 0.0)
    throw std::invalid_argument("solve_weighted_l1_qp: negative l1 weight");
  if (!std::isfinite(problem.budget))
    throw std::invalid_argument("solve_weighted_l1_qp: non-finite budget");
  check_psd(problem.Q);

  double rho = config.penalty_parameter;

  // x-step: min x'Qx + c'x + (rho/2)||x - v||^2  s.t. 1'x = b, solved via the
  // factorized A = 2Q + rho*I and the multiplier eliminated analytically.
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd a_inv_one;
  double one_a_inv_one = 0.0;
  auto refactor = [&]() {
    Eigen::MatrixXd A = 2.0 * problem.Q;
    A.diagonal().array() += rho;
    llt.compute(A);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("solve_weighted_l1_qp: factorization failed");
    a_inv_one = llt.solve(Eigen::VectorXd::Ones(p));
    one_a_inv_one = a_inv_one.sum();
  };
  refactor();

  Eigen::VectorXd z =
      warm_start ? *warm_start
                 : Eigen::VectorXd::Constant(p, problem.budget / double(p));
  Eigen::VectorXd u = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd x = z;

  // Residual targets for leaving the splitting loop; final accuracy comes
  // from the polish step. Targets tighten whenever a polish attempt fails.
  double target_primal = config.primal_tol;
  double target_dual = config.dual_tol;
  const double kkt_tol = std::max(1e-10, std::min(1e-6, 100.0 * config.primal_tol));

  double primal_res = std::numeric_limits<double>::infinity();
  double dual_res = std::numeric_limits<double>::infinity();

  for (int it = 0; it < config.max_iterations; ++it) {
    // x-update
    Eigen::VectorXd rhs = rho * (z - u) - problem.c;
    Eigen::VectorXd y = llt.solve(rhs);
    const double h = (y.sum() - problem.budget) / one_a_inv_one;
    x = y - h * a_inv_one;

    // z-update
    Eigen::VectorXd z_old = z;
    for (Eigen::Index j = 0; j < p; ++j)
      z(j) = soft_threshold(x(j) + u(j), problem.l1_weights(j) / rho);

    u += x - z;

    primal_res = (x - z).cwiseAbs().maxCoeff();
    dual_res = rho * (z - z_old).cwiseAbs().maxCoeff();

    if (primal_res <= target_primal && dual_res <= target_dual) {
      PolishResult polished = polish(problem, z, config, kkt_tol);
      if (polished.ok) return polished.w;
      Eigen::VectorXd x_clipped = x;
      for (Eigen::Index j = 0; j < p; ++j)
        if (std::abs(x_clipped(j)) < config.zero_clip) x_clipped(j) = 0.0;
      polished = polish(problem, x_clipped, config, kkt_tol);
      if (polished.ok) return polished.w;
      target_primal = std::max(target_primal * 0.1, 1e-14);
      target_dual = std::max(target_dual * 0.1, 1e-14);
    } else if ((it + 1) % 25 == 0) {
      // Residual balancing.
      if (primal_res > 10.0 * dual_res && rho < 1e8) {
        rho *= 2.0;
        u /= 2.0;
        refactor();
      } else if (dual_res > 10.0 * primal_res && rho > 1e-8) {
        rho /= 2.0;
        u *= 2.0;
        refactor();
      }
    }
  }

  // Last attempt before reporting failure.
  PolishResult polished = polish(problem, z, config, kkt_tol);
  if (polished.ok) return polished.w;
  throw ConvergenceError("solve_weighted_l1_qp: no convergence within " +
                             std::to_string(config.max_iterations) +
                             " iterations",
                         primal_res, dual_res);
}

}  // namespace cape
