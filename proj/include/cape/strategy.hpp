#pragma once

#include <Eigen/Core>
#include <set>
#include <string>
#include <vector>

#include "cape/moments.hpp"
#include "cape/panel.hpp"
#include "cape/solver.hpp"

namespace cape {

enum class CostKind { kQuadratic, kProportional };

/// Per-asset transaction-cost coefficients: beta_j for quadratic cost
/// sum beta_j d_j^2, alpha_j for proportional cost sum alpha_j |d_j|.
struct CostModel {
  CostKind kind = CostKind::kQuadratic;
  Eigen::VectorXd coefficients;  // length p, >= 0

  static CostModel quadratic(const Eigen::VectorXd& beta);
  static CostModel proportional(const Eigen::VectorXd& alpha);
  static CostModel uniform(CostKind kind, double coeff, int p);
  static CostModel zero(int p);
  void validate(int p) const;
};

struct ScadParams {
  double lambda = 0.0;
  double a = 3.7;  // must be > 2
};

/// P'_lambda(tau) = lambda [ I(tau <= lambda)
///                           + (a*lambda - tau)_+ / ((a-1)*lambda) I(tau > lambda) ].
/// Returns lambda at tau = 0, 0 when lambda = 0. Throws if a <= 2.
double scad_derivative(double tau, const ScadParams& params);

enum class StrategyKind {
  kEqualWeight,  // 1/N
  kMV,           // plain mean-variance
  kPMV,          // l1-penalized mean-variance, cost-blind
  kCMV,          // cost-aware mean-variance, no sparsity penalty
  kCapeL,        // cost-aware, l1 penalty
  kCapeS,        // cost-aware, SCAD penalty via LLA
};

std::string strategy_name(StrategyKind kind);

struct StrategySpec {
  StrategyKind kind = StrategyKind::kCapeS;
  double gamma = 1.0 / 3.0;  // inverse risk aversion
  ScadParams scad;           // CAPE-S only
  double lambda_l1 = 0.0;    // PMV / CAPE-L penalty; CAPE-S Lasso init when > 0
  int lla_max_rounds = 10;
  double lla_tol = 1e-8;

  bool cost_aware() const {
    return kind == StrategyKind::kCMV || kind == StrategyKind::kCapeL ||
           kind == StrategyKind::kCapeS;
  }
};

/// One decision point: moments, costs and the drifted pre-rebalance weights
/// (zero vector at stage 1).
struct RebalanceProblem {
  MomentEstimate moments;
  CostModel cost;
  Eigen::VectorXd w_plus;  // pre-rebalance weights; zero at stage 1
  int stage = 1;
  int sample_size = 0;  // estimation-window length, for default penalty scales

  void validate() const;
};

/// Stage-1 portfolio; returned weights sum to 1 within 1e-8.
Eigen::VectorXd construct_portfolio(const RebalanceProblem& problem,
                                    const StrategySpec& spec,
                                    const SolverConfig& config);

struct RebalanceResult {
  Eigen::VectorXd delta;    // sums to 0 within 1e-8
  Eigen::VectorXd weights;  // w_plus + delta
};

/// Stage t >= 2 trade; solves the delta-program with linear term
/// 2*Sigma*w_plus - gamma*mu and budget 0.
RebalanceResult rebalance_portfolio(const RebalanceProblem& problem,
                                    const StrategySpec& spec,
                                    const SolverConfig& config);

/// Iteratively reweighted l1: theta_j^(l-1) = base_l1_j + P'_lambda(|w_j^(l-1)|),
/// each round solved by solve_weighted_l1_qp warm-started at the previous
/// iterate. Stops when the sup-norm step is <= tol or after max_rounds.
Eigen::VectorXd lla_iterate(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c,
                            double budget, const Eigen::VectorXd& base_l1,
                            const Eigen::VectorXd& init,
                            const ScadParams& scad, const SolverConfig& config,
                            int max_rounds = 10, double tol = 1e-8);

struct OracleSolution {
  Eigen::VectorXd weights;  // zero off support; delta for stage >= 2
  bool used_fallback = false;  // proportional sign-iteration did not settle
  bool ridge_jitter = false;   // restricted submatrix needed regularization
};

/// Support-restricted exact solution. Quadratic cost: bordered-KKT solve with
/// (Sigma + diag(beta)) restricted. Proportional cost: sign-iteration on the
/// restricted nonsmooth problem, falling back to the iterative solver.
OracleSolution oracle_solution(const std::set<int>& support,
                               const RebalanceProblem& problem,
                               const StrategySpec& spec);

struct TuneDiagnostics {
  std::vector<double> lambdas;
  std::vector<double> sharpes;       // NaN where the fit failed
  std::vector<std::string> errors;   // empty string where the fit succeeded
  bool cost_adjusted = true;
};

class TuningError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TuneResult {
  double lambda_opt;
  TuneDiagnostics diagnostics;
};

/// Fits the strategy at each grid value on the estimation window and scores
/// the in-sample Sharpe ratio of the fitted weights over that same window
/// (net of the stage cost charge when cost_adjusted). Smallest lambda wins
/// ties. Throws TuningError when every fit fails.
TuneResult tune_lambda(const ReturnPanel& panel, const CostModel& cost,
                       const StrategySpec& spec,
                       const std::vector<double>& grid,
                       const SolverConfig& config,
                       const std::string& estimator_tag,
                       bool cost_adjusted = true);

/// Support indices after zero-clip snapping.
std::set<int> support_of(const Eigen::VectorXd& w, double zero_clip = 1e-8);

}  // namespace cape
