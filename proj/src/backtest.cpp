#include "cape/backtest.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cape {

namespace {
constexpr double kAnnualization = 251.0;
}

Eigen::VectorXd drift_weights(const Eigen::VectorXd& w,
                              const Eigen::MatrixXd& holding_returns) {
  if (holding_returns.cols() != w.size())
    throw std::invalid_argument("drift_weights: dimension mismatch");
  if (std::abs(w.sum() - 1.0) > 1e-8)
    throw std::invalid_argument("drift_weights: weights must sum to 1");
  Eigen::VectorXd cur = w;
  for (Eigen::Index i = 0; i < holding_returns.rows(); ++i) {
    const Eigen::VectorXd r = holding_returns.row(i).transpose();
    const double growth = 1.0 + cur.dot(r);
    if (growth <= 1e-12)
      throw WipeoutError("drift_weights: portfolio value hit zero on day " +
                         std::to_string(i + 1));
    cur = cur.cwiseProduct(Eigen::VectorXd::Ones(cur.size()) + r) / growth;
  }
  return cur;
}

double turnover(const Eigen::VectorXd& w_new,
                const Eigen::VectorXd& w_plus_prev) {
  if (w_new.size() != w_plus_prev.size())
    throw std::invalid_argument("turnover: dimension mismatch");
  return (w_new - w_plus_prev).cwiseAbs().sum();
}

double leverage(const Eigen::VectorXd& w) {
  return w.cwiseMin(0.0).cwiseAbs().sum();
}

double transaction_cost_charge(const Eigen::VectorXd& delta,
                               const CostModel& cost) {
  if (delta.size() != cost.coefficients.size())
    throw std::invalid_argument("transaction_cost_charge: dimension mismatch");
  if (cost.kind == CostKind::kQuadratic)
    return cost.coefficients.dot(delta.cwiseProduct(delta));
  return cost.coefficients.dot(delta.cwiseAbs());
}

double sharpe_ratio(const std::vector<double>& daily_net_returns) {
  const size_t n = daily_net_returns.size();
  if (n < 2)
    throw UndefinedSharpeError("sharpe_ratio: need at least 2 returns");
  const double mean =
      std::accumulate(daily_net_returns.begin(), daily_net_returns.end(), 0.0) /
      double(n);
  double ss = 0.0;
  for (double r : daily_net_returns) ss += (r - mean) * (r - mean);
  const double var = ss / double(n - 1);
  if (var <= 0.0)
    throw UndefinedSharpeError("sharpe_ratio: zero return variance");
  return mean / std::sqrt(var) * std::sqrt(kAnnualization);
}

BacktestResult run_backtest(const ReturnPanel& panel,
                            const BacktestPlan& plan) {
  panel.validate();
  if (plan.window_n < 2)
    throw std::invalid_argument("run_backtest: window_n must be >= 2");
  if (plan.stages_m < 1)
    throw std::invalid_argument("run_backtest: stages_m must be >= 1");
  if (!(plan.return_scale > 0.0))
    throw std::invalid_argument("run_backtest: return_scale must be > 0");
  const double scale = plan.return_scale;
  const int hold = plan.holding_days();
  const int needed = plan.window_n + plan.stages_m * hold;
  if (panel.days() < needed)
    throw std::invalid_argument(
        "run_backtest: panel too short, need " + std::to_string(needed) +
        " rows, got " + std::to_string(panel.days()));

  const int p = panel.num_assets();
  BacktestResult result;
  Eigen::VectorXd w_plus = Eigen::VectorXd::Zero(p);

  for (int t = 1; t <= plan.stages_m; ++t) {
    const int decision = plan.window_n + (t - 1) * hold;  // first holding row
    ReturnPanel est = panel.window(decision - plan.window_n, plan.window_n);

    RebalanceProblem problem;
    problem.moments = estimate_moments(est, plan.estimator_tag);
    problem.cost = plan.cost;
    problem.stage = t;
    problem.sample_size = plan.window_n;
    if (t >= 2) problem.w_plus = w_plus;

    Eigen::VectorXd w;
    Eigen::VectorXd delta;
    std::string stage_error;
    try {
      if (t == 1) {
        w = construct_portfolio(problem, plan.strategy, plan.solver);
        delta = w;
      } else {
        RebalanceResult reb =
            rebalance_portfolio(problem, plan.strategy, plan.solver);
        w = reb.weights;
        delta = reb.delta;
      }
    } catch (const std::exception& e) {
      if (t == 1)
        throw;  // nothing to hold; abort the run
      // Hold the drifted book: no trade, no cost.
      stage_error = e.what();
      w = w_plus;
      delta = Eigen::VectorXd::Zero(p);
    }

    // Proportional coefficients are fractions of traded notional, so the
    // wealth charge is scale-free and converts into panel return units by
    // 1/scale. Quadratic coefficients are panel-unit (they fold into the
    // panel-unit covariance), so their charge is already in panel units.
    double cost = transaction_cost_charge(delta, plan.cost);
    if (plan.cost.kind == CostKind::kProportional) cost /= scale;

    // Holding period: daily gross returns with drifting weights; the stage
    // cost is charged against the first holding day. stage_net stays in
    // panel return units (Sharpe is scale-invariant); compounding converts
    // to wealth units via return_scale.
    Eigen::VectorXd cur = w;
    std::vector<double> stage_net(hold);
    double wealth = 1.0;
    for (int i = 0; i < hold; ++i) {
      const Eigen::VectorXd r =
          scale * panel.returns.row(decision + i).transpose();
      const double g = cur.dot(r);
      const double growth = 1.0 + g;
      if (growth <= 1e-12)
        throw WipeoutError("run_backtest: wipeout in stage " +
                           std::to_string(t) + ", day " + std::to_string(i + 1));
      wealth *= growth;
      stage_net[i] = (i == 0) ? g / scale - cost : g / scale;
      cur = cur.cwiseProduct(Eigen::VectorXd::Ones(p) + r) / growth;
    }

    StageReport report;
    report.stage = t;
    report.gross_return_pct = (wealth - 1.0) * 100.0;
    report.cost_pct = cost * scale * 100.0;
    report.turnover = turnover(w, t == 1 ? Eigen::VectorXd::Zero(p).eval()
                                         : w_plus);
    report.leverage = leverage(w);
    try {
      report.sharpe = sharpe_ratio(stage_net);
    } catch (const UndefinedSharpeError&) {
      report.sharpe = std::numeric_limits<double>::quiet_NaN();
    }
    report.error = stage_error;

    result.pre_weights.push_back(t == 1 ? Eigen::VectorXd::Zero(p).eval()
                                        : w_plus);
    result.weights.push_back(w);
    result.stages.push_back(report);
    result.daily_net_returns.insert(result.daily_net_returns.end(),
                                    stage_net.begin(), stage_net.end());
    w_plus = cur;
  }

  try {
    result.overall_sharpe = sharpe_ratio(result.daily_net_returns);
  } catch (const UndefinedSharpeError&) {
    result.overall_sharpe = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

}  // namespace cape
