#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "cape/panel.hpp"
#include "cape/strategy.hpp"

namespace cape {

struct BacktestPlan {
  int window_n = 200;       // estimation window, trading days
  int stages_m = 5;         // number of portfolio decisions
  int rebalance_every = 0;  // holding-period days; 0 means window_n
  // Wealth units per panel return unit: 1.0 when the panel holds decimal
  // fractions, 0.01 when it holds percent values (the factor-model
  // calibration is in daily percent). Moments, costs and penalties all work
  // in panel units; only compounding and the percent report columns scale.
  double return_scale = 1.0;
  StrategySpec strategy;
  CostModel cost;
  std::string estimator_tag = "sample";
  SolverConfig solver;

  int holding_days() const {
    return rebalance_every > 0 ? rebalance_every : window_n;
  }
};

/// Per-stage performance record. Stage 1 is the first construction; reports
/// label stages S1..Sm. Return and cost are percent of normalized initial
/// wealth; the return is the cumulative holding-period return.
struct StageReport {
  int stage = 0;
  double gross_return_pct = 0.0;
  double cost_pct = 0.0;
  double turnover = 0.0;
  double leverage = 0.0;
  double sharpe = 0.0;  // annualized (sqrt(251)), net of cost, this stage only
  std::string error;    // nonempty when the stage-t solve failed (held instead)
};

struct BacktestResult {
  std::vector<StageReport> stages;
  double overall_sharpe = 0.0;  // over the concatenated out-of-sample days
  std::vector<Eigen::VectorXd> weights;       // w_t per stage
  std::vector<Eigen::VectorXd> pre_weights;   // w+_{t-1} per stage (0 at t=1)
  std::vector<double> daily_net_returns;      // concatenated, cost on day 1
};

class WipeoutError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class UndefinedSharpeError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// w+ = (f_n o ... o f_1)(w), f_i(w) = w (+) elementwise (1+R_i) / (1 + w'R_i).
/// Throws WipeoutError when portfolio value along the path hits <= 1e-12.
Eigen::VectorXd drift_weights(const Eigen::VectorXd& w,
                              const Eigen::MatrixXd& holding_returns);

/// sum_i |w_new_i - w_plus_prev_i|.
double turnover(const Eigen::VectorXd& w_new,
                const Eigen::VectorXd& w_plus_prev);

/// sum_i |min(w_i, 0)|: total short exposure.
double leverage(const Eigen::VectorXd& w);

/// Quadratic: sum beta_j d_j^2; proportional: sum alpha_j |d_j|.
double transaction_cost_charge(const Eigen::VectorXd& delta,
                               const CostModel& cost);

/// mean/std of daily net returns * sqrt(251).
/// Throws UndefinedSharpeError on fewer than 2 days or zero variance.
double sharpe_ratio(const std::vector<double>& daily_net_returns);

/// Multi-stage engine: at each decision day estimate moments from the
/// trailing window, construct/rebalance, charge the cost against the first
/// holding day, and drift through the holding period. Stage-t solver
/// failures (t >= 2) hold the drifted weights and are recorded in the
/// report; a stage-1 failure aborts.
BacktestResult run_backtest(const ReturnPanel& panel, const BacktestPlan& plan);

}  // namespace cape
