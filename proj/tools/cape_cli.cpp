// Command-line front end: simulate factor-model experiments, backtest CSV
// panels, and tune the sparsity penalty. Data goes to files/stdout,
// diagnostics to stderr; every run is deterministic given (config, seed).
#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "cape/backtest.hpp"
#include "cape/moments.hpp"
#include "cape/panel.hpp"
#include "cape/report.hpp"
#include "cape/simgen.hpp"
#include "cape/strategy.hpp"

namespace {

using namespace cape;

StrategyKind parse_strategy(const std::string& name) {
  static const std::map<std::string, StrategyKind> table = {
      {"1/N", StrategyKind::kEqualWeight}, {"1/n", StrategyKind::kEqualWeight},
      {"equal", StrategyKind::kEqualWeight},
      {"MV", StrategyKind::kMV},           {"mv", StrategyKind::kMV},
      {"PMV", StrategyKind::kPMV},         {"pmv", StrategyKind::kPMV},
      {"CMV", StrategyKind::kCMV},         {"cmv", StrategyKind::kCMV},
      {"CAPE-L", StrategyKind::kCapeL},    {"cape-l", StrategyKind::kCapeL},
      {"CAPE-S", StrategyKind::kCapeS},    {"cape-s", StrategyKind::kCapeS},
  };
  auto it = table.find(name);
  if (it == table.end())
    throw CLI::ValidationError("--strategy", "unknown strategy '" + name +
                                                 "' (use 1/N, MV, PMV, CMV, "
                                                 "CAPE-L or CAPE-S)");
  return it->second;
}

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> grid;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size())
      throw CLI::ValidationError("--lambda-grid", "bad value '" + tok + "'");
    grid.push_back(v);
  }
  if (grid.empty())
    throw CLI::ValidationError("--lambda-grid", "grid is empty");
  return grid;
}

bool needs_lambda(StrategyKind kind) {
  return kind == StrategyKind::kPMV || kind == StrategyKind::kCapeL ||
         kind == StrategyKind::kCapeS;
}

void apply_lambda(StrategySpec& spec, double lambda) {
  if (spec.kind == StrategyKind::kCapeS)
    spec.scad.lambda = lambda;
  else
    spec.lambda_l1 = lambda;
}

// Shared flags across subcommands, mirrored into the plan after parsing.
struct CommonOpts {
  std::vector<std::string> strategies;
  std::string cost_kind = "quadratic";
  double beta = 0.15;
  double alpha = 0.001;
  double gamma = 1.0 / 3.0;
  std::string lambda_grid;
  double scad_a = 3.7;
  int window = 200;
  int stages = 5;
  int rebalance_every = 0;
  std::string estimator = "sample";
  std::string out_dir = ".";
  double return_scale = 1.0;

  void attach(CLI::App* cmd, bool multi_strategy) {
    cmd->set_config("--config", "", "Flat key=value config file; flags win");
    auto* s = cmd->add_option("--strategy", strategies,
                              "Strategy: 1/N, MV, PMV, CMV, CAPE-L, CAPE-S "
                              "(repeatable)");
    if (!multi_strategy) s->expected(0, 1);
    cmd->add_option("--cost-kind", cost_kind, "quadratic or proportional")
        ->check(CLI::IsMember({"quadratic", "proportional"}));
    cmd->add_option("--beta", beta, "Uniform quadratic cost coefficient");
    cmd->add_option("--alpha", alpha, "Uniform proportional cost coefficient");
    cmd->add_option("--gamma", gamma, "Inverse risk aversion");
    cmd->add_option("--lambda-grid", lambda_grid,
                    "Comma-separated penalty grid; a single value pins lambda");
    cmd->add_option("--scad-a", scad_a, "SCAD concavity parameter (> 2)");
    cmd->add_option("--window", window, "Estimation window, trading days");
    cmd->add_option("--stages", stages, "Number of rebalancing stages");
    cmd->add_option("--rebalance-every", rebalance_every,
                    "Holding-period days (default: window)");
    cmd->add_option("--estimator", estimator, "Covariance estimator")
        ->check(CLI::IsMember({"sample", "lse", "linear-shrinkage"}));
    cmd->add_option("--out-dir", out_dir, "Output directory");
    cmd->add_option("--return-scale", return_scale,
                    "Wealth units per panel return unit (1.0 for decimal "
                    "panels, 0.01 for percent panels)");
  }

  CostKind kind() const {
    return cost_kind == "quadratic" ? CostKind::kQuadratic
                                    : CostKind::kProportional;
  }

  CostModel uniform_cost(int p) const {
    return CostModel::uniform(kind(),
                              kind() == CostKind::kQuadratic ? beta : alpha, p);
  }

  StrategySpec make_spec(StrategyKind k) const {
    StrategySpec spec;
    spec.kind = k;
    spec.gamma = gamma;
    spec.scad.a = scad_a;
    return spec;
  }
};

// Resolves the penalty for one decision problem: fixed value, tuned over the
// grid on the estimation window, or the sqrt(log p / n) default.
double resolve_lambda(const CommonOpts& opts, const StrategySpec& spec,
                      const ReturnPanel& est_window, const CostModel& cost,
                      const SolverConfig& solver) {
  if (!opts.lambda_grid.empty()) {
    auto grid = parse_grid(opts.lambda_grid);
    if (grid.size() == 1) return grid[0];
    TuneResult tr = tune_lambda(est_window, cost, spec, grid, solver,
                                opts.estimator);
    return tr.lambda_opt;
  }
  return std::sqrt(std::log(double(est_window.num_assets())) /
                   double(est_window.days()));
}

void write_csv_file(const std::filesystem::path& path,
                    const std::string& contents) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const CommonOpts& opts, int p, int replicates,
                 std::uint64_t seed) {
  if (opts.strategies.empty())
    throw CLI::ValidationError("--strategy", "simulate needs at least one");
  std::vector<StrategyKind> kinds;
  for (const auto& s : opts.strategies) kinds.push_back(parse_strategy(s));

  FactorModelParams params = default_params();
  SimulatedUniverse universe = build_universe(p, params, seed);
  const int n_days = opts.window +
                     opts.stages * (opts.rebalance_every > 0
                                        ? opts.rebalance_every
                                        : opts.window);
  SolverConfig solver;
  CostModel cost = opts.uniform_cost(p);

  std::ostringstream per_rep;
  per_rep << "replicate,stage,method,return_pct,cost_pct,turnover,leverage,"
             "sharpe\n";
  per_rep << std::setprecision(12);

  // metric samples: [strategy][stage 1..m + 0=overall][metric] -> values
  struct Samples {
    std::vector<double> ret, cost, turn, lev, sharpe;
  };
  std::map<std::pair<std::string, int>, Samples> agg;
  std::map<std::string, int> ok_count;

  for (int r = 0; r < replicates; ++r) {
    ReturnPanel panel = generate_panel(universe, n_days, params,
                                       static_cast<std::uint64_t>(r));
    for (StrategyKind kind : kinds) {
      const std::string method = strategy_name(kind);
      try {
        StrategySpec spec = opts.make_spec(kind);
        if (needs_lambda(kind)) {
          ReturnPanel est = panel.window(0, opts.window);
          apply_lambda(spec, resolve_lambda(opts, spec, est, cost, solver));
        }
        BacktestPlan plan;
        plan.window_n = opts.window;
        plan.stages_m = opts.stages;
        plan.rebalance_every = opts.rebalance_every;
        plan.strategy = spec;
        plan.cost = cost;
        plan.estimator_tag = opts.estimator;
        plan.solver = solver;
        plan.return_scale = opts.return_scale;
        BacktestResult result = run_backtest(panel, plan);

        for (const StageReport& s : result.stages) {
          per_rep << r << ",S" << s.stage << ',' << method << ','
                  << s.gross_return_pct << ',' << s.cost_pct << ','
                  << s.turnover << ',' << s.leverage << ',' << s.sharpe
                  << '\n';
          Samples& samp = agg[{method, s.stage}];
          samp.ret.push_back(s.gross_return_pct);
          samp.cost.push_back(s.cost_pct);
          samp.turn.push_back(s.turnover);
          samp.lev.push_back(s.leverage);
          samp.sharpe.push_back(s.sharpe);
        }
        agg[{method, 0}].sharpe.push_back(result.overall_sharpe);
        ok_count[method] += 1;
      } catch (const std::exception& e) {
        std::cerr << "warning: replicate " << r << " " << method
                  << " failed: " << e.what() << '\n';
      }
    }
  }

  std::ostringstream agg_out;
  agg_out << "stage,method,replicates_ok,return_pct_mean,return_pct_se,"
             "cost_pct_mean,cost_pct_se,turnover_mean,turnover_se,"
             "leverage_mean,leverage_se,sharpe_mean,sharpe_se\n";
  agg_out << std::setprecision(12);
  for (StrategyKind kind : kinds) {
    const std::string method = strategy_name(kind);
    if (ok_count[method] == 0) {
      std::cerr << "warning: " << method << ": every replicate failed\n";
      continue;
    }
    for (int stage = 1; stage <= opts.stages; ++stage) {
      const Samples& s = agg[{method, stage}];
      if (s.sharpe.empty()) continue;
      auto m = [&](const std::vector<double>& v) { return mean_se(v); };
      MeanSe ret = m(s.ret), cst = m(s.cost), turn = m(s.turn),
             lev = m(s.lev), sr = m(s.sharpe);
      agg_out << 'S' << stage << ',' << method << ',' << s.sharpe.size() << ','
              << ret.mean << ',' << ret.se << ',' << cst.mean << ',' << cst.se
              << ',' << turn.mean << ',' << turn.se << ',' << lev.mean << ','
              << lev.se << ',' << sr.mean << ',' << sr.se << '\n';
    }
    MeanSe overall = mean_se(agg[{method, 0}].sharpe);
    agg_out << "overall," << method << ',' << ok_count[method]
            << ",,,,,,,,," << overall.mean << ',' << overall.se << '\n';
  }

  std::filesystem::path dir(opts.out_dir);
  std::filesystem::create_directories(dir);
  write_csv_file(dir / "replicates.csv", per_rep.str());
  write_csv_file(dir / "aggregate.csv", agg_out.str());
  std::cerr << "simulate: wrote " << (dir / "replicates.csv").string()
            << " and " << (dir / "aggregate.csv").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- backtest

int cmd_backtest(const CommonOpts& opts, const std::string& returns_csv,
                 const std::string& cost_csv, const std::string& out_file) {
  if (opts.strategies.size() != 1)
    throw CLI::ValidationError("--strategy",
                               "backtest needs exactly one strategy");
  StrategyKind kind = parse_strategy(opts.strategies[0]);

  ReturnPanel panel = ReturnPanel::from_csv(returns_csv);
  const int p = panel.num_assets();
  CostModel cost = cost_csv.empty()
                       ? opts.uniform_cost(p)
                       : CostTable::from_csv(cost_csv).to_cost_model(
                             opts.kind(), panel.assets);

  SolverConfig solver;
  StrategySpec spec = opts.make_spec(kind);
  if (needs_lambda(kind)) {
    ReturnPanel est = panel.window(0, opts.window);
    apply_lambda(spec, resolve_lambda(opts, spec, est, cost, solver));
  }

  BacktestPlan plan;
  plan.window_n = opts.window;
  plan.stages_m = opts.stages;
  plan.rebalance_every = opts.rebalance_every;
  plan.strategy = spec;
  plan.cost = cost;
  plan.estimator_tag = opts.estimator;
  plan.solver = solver;
  plan.return_scale = opts.return_scale;
  BacktestResult result = run_backtest(panel, plan);

  std::ostringstream out;
  write_report_rows(out, strategy_name(kind), result, /*with_header=*/true);
  if (out_file.empty() || out_file == "-") {
    std::cout << out.str();
  } else {
    std::filesystem::path path(out_file);
    if (path.has_parent_path())
      std::filesystem::create_directories(path.parent_path());
    write_csv_file(path, out.str());
    std::cerr << "backtest: wrote " << path.string() << '\n';
  }
  for (const StageReport& s : result.stages)
    if (!s.error.empty())
      std::cerr << "warning: stage " << s.stage << " held previous weights: "
                << s.error << '\n';
  return 0;
}

// ---------------------------------------------------------------- tune

int cmd_tune(const CommonOpts& opts, const std::string& returns_csv,
             const std::string& out_file) {
  if (opts.strategies.size() != 1)
    throw CLI::ValidationError("--strategy", "tune needs exactly one strategy");
  StrategyKind kind = parse_strategy(opts.strategies[0]);
  if (!needs_lambda(kind))
    throw CLI::ValidationError("--strategy",
                               strategy_name(kind) + " has no penalty to tune");
  if (opts.lambda_grid.empty())
    throw CLI::ValidationError("--lambda-grid", "tune requires a grid");
  auto grid = parse_grid(opts.lambda_grid);

  ReturnPanel panel = ReturnPanel::from_csv(returns_csv);
  ReturnPanel est = panel.days() > opts.window ? panel.window(0, opts.window)
                                               : panel;
  CostModel cost = opts.uniform_cost(est.num_assets());
  SolverConfig solver;
  StrategySpec spec = opts.make_spec(kind);
  TuneResult tr =
      tune_lambda(est, cost, spec, grid, solver, opts.estimator);

  std::ostringstream curve;
  curve << "lambda,sharpe\n" << std::setprecision(12);
  for (size_t i = 0; i < tr.diagnostics.lambdas.size(); ++i)
    curve << tr.diagnostics.lambdas[i] << ',' << tr.diagnostics.sharpes[i]
          << '\n';
  if (!out_file.empty()) {
    std::filesystem::path path(out_file);
    if (path.has_parent_path())
      std::filesystem::create_directories(path.parent_path());
    write_csv_file(path, curve.str());
    std::cerr << "tune: wrote " << path.string() << '\n';
  }
  std::cout << std::setprecision(12) << tr.lambda_opt << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cost-aware sparse mean-variance portfolio toolkit"};
  app.require_subcommand(1);

  CommonOpts sim_opts, bt_opts, tune_opts;
  int p = 100, replicates = 1;
  std::uint64_t seed = 0;
  std::string returns_csv, cost_csv, out_file;

  auto* sim = app.add_subcommand("simulate",
                                 "Monte-Carlo factor-model experiment");
  sim_opts.strategies = {"1/N", "MV", "PMV", "CMV", "CAPE-L", "CAPE-S"};
  sim_opts.return_scale = 0.01;  // the factor model is in daily percent units
  sim_opts.attach(sim, /*multi_strategy=*/true);
  sim->add_option("--p", p, "Universe size");
  sim->add_option("--replicates", replicates, "Replicate count")
      ->check(CLI::PositiveNumber);
  sim->add_option("--seed", seed, "Universe / replicate base seed");

  auto* bt = app.add_subcommand("backtest", "Staged backtest on a CSV panel");
  bt_opts.attach(bt, /*multi_strategy=*/false);
  bt->add_option("--returns", returns_csv, "Returns CSV (date,<asset>,...)")
      ->required();
  bt->add_option("--cost-csv", cost_csv,
                 "Per-asset cost CSV (asset,proportional_cost); quadratic "
                 "coefficients derive as 2*alpha^2");
  bt->add_option("--out", out_file, "Report CSV path ('-' for stdout)");

  auto* tn = app.add_subcommand("tune", "Penalty grid search on a CSV panel");
  tune_opts.attach(tn, /*multi_strategy=*/false);
  tn->add_option("--returns", returns_csv, "Returns CSV")->required();
  tn->add_option("--out", out_file, "Curve CSV path");

  try {
    app.parse(argc, argv);
    if (sim->parsed()) return cmd_simulate(sim_opts, p, replicates, seed);
    if (bt->parsed())
      return cmd_backtest(bt_opts, returns_csv, cost_csv, out_file);
    return cmd_tune(tune_opts, returns_csv, out_file);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
