#include "cape/strategy.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cape/backtest.hpp"

namespace cape {

CostModel CostModel::quadratic(const Eigen::VectorXd& beta) {
  CostModel m;
  m.kind = CostKind::kQuadratic;
  m.coefficients = beta;
  return m;
}

CostModel CostModel::proportional(const Eigen::VectorXd& alpha) {
  CostModel m;
  m.kind = CostKind::kProportional;
  m.coefficients = alpha;
  return m;
}

CostModel CostModel::uniform(CostKind kind, double coeff, int p) {
  CostModel m;
  m.kind = kind;
  m.coefficients = Eigen::VectorXd::Constant(p, coeff);
  return m;
}

CostModel CostModel::zero(int p) {
  return uniform(CostKind::kQuadratic, 0.0, p);
}

void CostModel::validate(int p) const {
  if (coefficients.size() != p)
    throw std::invalid_argument("CostModel: coefficient length != p");
  if (!coefficients.allFinite() || coefficients.minCoeff() < 0.0)
    throw std::invalid_argument("CostModel: coefficients must be finite and >= 0");
}

double scad_derivative(double tau, const ScadParams& params) {
  if (params.a <= 2.0)
    throw std::invalid_argument("scad_derivative: need a > 2");
  if (tau < 0.0) throw std::invalid_argument("scad_derivative: need tau >= 0");
  const double lambda = params.lambda;
  if (lambda == 0.0) return 0.0;
  if (tau <= lambda) return lambda;
  return std::max(params.a * lambda - tau, 0.0) / (params.a - 1.0);
}

std::string strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kEqualWeight: return "1/N";
    case StrategyKind::kMV: return "MV";
    case StrategyKind::kPMV: return "PMV";
    case StrategyKind::kCMV: return "CMV";
    case StrategyKind::kCapeL: return "CAPE-L";
    case StrategyKind::kCapeS: return "CAPE-S";
  }
  return "?";
}

void RebalanceProblem::validate() const {
  const int p = static_cast<int>(moments.mu.size());
  if (moments.sigma.rows() != p || moments.sigma.cols() != p)
    throw std::invalid_argument("RebalanceProblem: moment dimension mismatch");
  cost.validate(p);
  if (stage < 1) throw std::invalid_argument("RebalanceProblem: stage >= 1");
  if (stage == 1) {
    if (w_plus.size() != 0 && w_plus.cwiseAbs().maxCoeff() > 0.0)
      throw std::invalid_argument("RebalanceProblem: w_plus must be 0 at stage 1");
  } else {
    if (w_plus.size() != p)
      throw std::invalid_argument("RebalanceProblem: w_plus length != p");
    if (std::abs(w_plus.sum() - 1.0) > 1e-8)
      throw std::invalid_argument("RebalanceProblem: w_plus must sum to 1");
  }
}

namespace {

// Objective pieces shared by construction (b=1, c=-gamma*mu) and
// reallocation (b=0, c=2*Sigma*w_plus - gamma*mu). Quadratic cost folds
// diag(beta) into Q; proportional cost folds alpha into the l1 weights.
struct ProblemTerms {
  Eigen::MatrixXd Q;       // Sigma (+ diag(beta) when cost applies)
  Eigen::VectorXd c;
  double budget;
  Eigen::VectorXd alpha;   // zero unless proportional cost applies
};

ProblemTerms assemble(const RebalanceProblem& problem, double gamma,
                      bool cost_aware) {
  const int p = static_cast<int>(problem.moments.mu.size());
  ProblemTerms terms;
  terms.Q = problem.moments.sigma;
  terms.alpha = Eigen::VectorXd::Zero(p);
  if (problem.stage == 1) {
    terms.budget = 1.0;
    terms.c = -gamma * problem.moments.mu;
  } else {
    terms.budget = 0.0;
    terms.c = 2.0 * problem.moments.sigma * problem.w_plus -
              gamma * problem.moments.mu;
  }
  if (cost_aware) {
    if (problem.cost.kind == CostKind::kQuadratic) {
      terms.Q += Eigen::MatrixXd(problem.cost.coefficients.asDiagonal());
    } else {
      terms.alpha = problem.cost.coefficients;
    }
  }
  return terms;
}

double default_lasso_lambda(int p, int n) {
  return std::sqrt(std::log(double(std::max(p, 2))) / double(std::max(n, 2)));
}

// Solve one strategy's program for a single stage given assembled terms.
Eigen::VectorXd solve_stage(const RebalanceProblem& problem,
                            const StrategySpec& spec,
                            const SolverConfig& config) {
  const int p = static_cast<int>(problem.moments.mu.size());

  switch (spec.kind) {
    case StrategyKind::kEqualWeight: {
      Eigen::VectorXd w = Eigen::VectorXd::Constant(p, 1.0 / double(p));
      if (problem.stage == 1) return w;
      return (w - problem.w_plus).eval();
    }
    case StrategyKind::kMV: {
      ProblemTerms t = assemble(problem, spec.gamma, false);
      return kkt_equality_qp(t.Q, t.c, t.budget);
    }
    case StrategyKind::kCMV: {
      ProblemTerms t = assemble(problem, spec.gamma, true);
      if (problem.cost.kind == CostKind::kQuadratic)
        return kkt_equality_qp(t.Q, t.c, t.budget);
      WeightedL1QP qp{t.Q, t.c, t.budget, t.alpha};
      return solve_weighted_l1_qp(qp, config);
    }
    case StrategyKind::kPMV: {
      ProblemTerms t = assemble(problem, spec.gamma, false);
      WeightedL1QP qp{t.Q, t.c, t.budget,
                      Eigen::VectorXd::Constant(p, spec.lambda_l1)};
      return solve_weighted_l1_qp(qp, config);
    }
    case StrategyKind::kCapeL: {
      ProblemTerms t = assemble(problem, spec.gamma, true);
      Eigen::VectorXd theta =
          t.alpha.array() + std::max(spec.lambda_l1, 0.0);
      WeightedL1QP qp{t.Q, t.c, t.budget, theta};
      return solve_weighted_l1_qp(qp, config);
    }
    case StrategyKind::kCapeS: {
      ProblemTerms t = assemble(problem, spec.gamma, true);
      const double lasso_lambda =
          spec.lambda_l1 > 0.0
              ? spec.lambda_l1
              : default_lasso_lambda(
                    p, problem.sample_size > 0 ? problem.sample_size : 200);
      Eigen::VectorXd theta0 = t.alpha.array() + lasso_lambda;
      WeightedL1QP init_qp{t.Q, t.c, t.budget, theta0};
      Eigen::VectorXd init = solve_weighted_l1_qp(init_qp, config);
      return lla_iterate(t.Q, t.c, t.budget, t.alpha, init, spec.scad, config,
                         spec.lla_max_rounds, spec.lla_tol);
    }
  }
  throw std::invalid_argument("unknown strategy kind");
}

}  // namespace

Eigen::VectorXd construct_portfolio(const RebalanceProblem& problem,
                                    const StrategySpec& spec,
                                    const SolverConfig& config) {
  problem.validate();
  if (problem.stage != 1)
    throw std::invalid_argument("construct_portfolio: stage must be 1");
  return solve_stage(problem, spec, config);
}

RebalanceResult rebalance_portfolio(const RebalanceProblem& problem,
                                    const StrategySpec& spec,
                                    const SolverConfig& config) {
  problem.validate();
  if (problem.stage < 2)
    throw std::invalid_argument("rebalance_portfolio: stage must be >= 2");
  RebalanceResult result;
  result.delta = solve_stage(problem, spec, config);
  result.weights = problem.w_plus + result.delta;
  return result;
}

Eigen::VectorXd lla_iterate(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c,
                            double budget, const Eigen::VectorXd& base_l1,
                            const Eigen::VectorXd& init,
                            const ScadParams& scad, const SolverConfig& config,
                            int max_rounds, double tol) {
  const Eigen::Index p = Q.rows();
  if (std::abs(init.sum() - budget) > 1e-6)
    throw std::invalid_argument("lla_iterate: init violates the budget");
  Eigen::VectorXd w = init;
  for (int round = 1; round <= max_rounds; ++round) {
    Eigen::VectorXd theta(p);
    for (Eigen::Index j = 0; j < p; ++j)
      theta(j) = base_l1(j) + scad_derivative(std::abs(w(j)), scad);
    WeightedL1QP qp{Q, c, budget, theta};
    Eigen::VectorXd next;
    try {
      next = solve_weighted_l1_qp(qp, config, w);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("lla_iterate round " + std::to_string(round) +
                                 ": " + e.what(),
                             e.primal_residual, e.dual_residual);
    }
    const double step = (next - w).cwiseAbs().maxCoeff();
    w = next;
    if (step <= tol) break;
  }
  return w;
}

namespace {

Eigen::VectorXd embed(const std::vector<int>& support,
                      const Eigen::VectorXd& values, int p) {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(p);
  for (size_t a = 0; a < support.size(); ++a) full(support[a]) = values(a);
  return full;
}

}  // namespace

OracleSolution oracle_solution(const std::set<int>& support,
                               const RebalanceProblem& problem,
                               const StrategySpec& spec) {
  problem.validate();
  if (support.empty())
    throw std::invalid_argument("oracle_solution: empty support");
  const int p = static_cast<int>(problem.moments.mu.size());
  std::vector<int> idx(support.begin(), support.end());
  if (idx.front() < 0 || idx.back() >= p)
    throw std::invalid_argument("oracle_solution: support index out of range");
  const int k = static_cast<int>(idx.size());

  ProblemTerms terms = assemble(problem, spec.gamma, true);
  Eigen::MatrixXd Qr(k, k);
  Eigen::VectorXd cr(k), ar(k);
  for (int a = 0; a < k; ++a) {
    cr(a) = terms.c(idx[a]);
    ar(a) = terms.alpha(idx[a]);
    for (int b = 0; b < k; ++b) Qr(a, b) = terms.Q(idx[a], idx[b]);
  }

  OracleSolution out;
  const double m = Qr.trace() / double(k);

  auto restricted_kkt = [&](const Eigen::VectorXd& lin) {
    try {
      return kkt_equality_qp(Qr, lin, terms.budget);
    } catch (const SingularityError&) {
      out.ridge_jitter = true;
      Eigen::MatrixXd Qj = Qr;
      Qj.diagonal().array() += 1e-10 * std::max(m, 1.0);
      return kkt_equality_qp(Qj, lin, terms.budget);
    }
  };

  if (problem.cost.kind == CostKind::kQuadratic ||
      terms.alpha.cwiseAbs().maxCoeff() == 0.0) {
    out.weights = embed(idx, restricted_kkt(cr), p);
    return out;
  }

  // Proportional cost: the subgradient g of the cost term is defined by the
  // solution itself, so iterate signs until self-consistent.
  Eigen::VectorXd g = restricted_kkt(cr);  // signs of the costless solution
  Eigen::VectorXd signs(k);
  for (int a = 0; a < k; ++a) signs(a) = g(a) >= 0 ? 1.0 : -1.0;
  const int max_sign_rounds = 100;
  for (int round = 0; round < max_sign_rounds; ++round) {
    Eigen::VectorXd lin = cr + ar.cwiseProduct(signs);
    Eigen::VectorXd w = restricted_kkt(lin);
    bool consistent = true;
    for (int a = 0; a < k; ++a) {
      if (std::abs(w(a)) < 1e-12) continue;  // zero allows any subgradient
      const double s = w(a) > 0 ? 1.0 : -1.0;
      if (s != signs(a)) {
        signs(a) = s;
        consistent = false;
      }
    }
    if (consistent) {
      out.weights = embed(idx, w, p);
      return out;
    }
  }

  // Sign pattern never settled; solve the restricted nonsmooth problem with
  // the iterative solver instead.
  out.used_fallback = true;
  WeightedL1QP qp{Qr, cr, terms.budget, ar};
  SolverConfig config;
  out.weights = embed(idx, solve_weighted_l1_qp(qp, config), p);
  return out;
}

std::set<int> support_of(const Eigen::VectorXd& w, double zero_clip) {
  std::set<int> s;
  for (Eigen::Index j = 0; j < w.size(); ++j)
    if (std::abs(w(j)) >= zero_clip) s.insert(static_cast<int>(j));
  return s;
}

TuneResult tune_lambda(const ReturnPanel& panel, const CostModel& cost,
                       const StrategySpec& spec,
                       const std::vector<double>& grid,
                       const SolverConfig& config,
                       const std::string& estimator_tag, bool cost_adjusted) {
  if (grid.empty()) throw std::invalid_argument("tune_lambda: empty grid");
  for (size_t i = 1; i < grid.size(); ++i)
    if (grid[i] <= grid[i - 1])
      throw std::invalid_argument("tune_lambda: grid must be strictly increasing");

  RebalanceProblem problem;
  problem.moments = estimate_moments(panel, estimator_tag);
  problem.cost = cost;
  problem.stage = 1;
  problem.sample_size = panel.days();

  TuneResult result;
  result.diagnostics.cost_adjusted = cost_adjusted;
  double best_sr = -std::numeric_limits<double>::infinity();
  double best_lambda = std::numeric_limits<double>::quiet_NaN();

  for (double lambda : grid) {
    StrategySpec fit_spec = spec;
    if (spec.kind == StrategyKind::kCapeS)
      fit_spec.scad.lambda = lambda;
    else
      fit_spec.lambda_l1 = lambda;

    result.diagnostics.lambdas.push_back(lambda);
    try {
      Eigen::VectorXd w = construct_portfolio(problem, fit_spec, config);
      std::vector<double> daily(panel.days());
      for (int i = 0; i < panel.days(); ++i)
        daily[i] = panel.returns.row(i).dot(w);
      if (cost_adjusted) daily[0] -= transaction_cost_charge(w, cost);
      const double sr = sharpe_ratio(daily);
      result.diagnostics.sharpes.push_back(sr);
      result.diagnostics.errors.emplace_back();
      if (sr > best_sr) {  // strict: ties keep the smaller lambda
        best_sr = sr;
        best_lambda = lambda;
      }
    } catch (const std::exception& e) {
      result.diagnostics.sharpes.push_back(
          std::numeric_limits<double>::quiet_NaN());
      result.diagnostics.errors.emplace_back(e.what());
    }
  }

  if (!std::isfinite(best_lambda)) {
    std::string msg = "tune_lambda: every fit failed:";
    for (size_t i = 0; i < grid.size(); ++i)
      msg += "\n  lambda=" + std::to_string(grid[i]) + ": " +
             result.diagnostics.errors[i];
    throw TuningError(msg);
  }
  result.lambda_opt = best_lambda;
  return result;
}

}  // namespace cape
