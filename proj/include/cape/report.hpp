#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cape/backtest.hpp"
#include "cape/panel.hpp"
#include "cape/strategy.hpp"

namespace cape {

/// One parsed report row; `stage` is 0 for the overall row.
struct ReportRow {
  int stage = 0;  // 0 = overall
  std::string method;
  double return_pct = 0.0;
  double cost_pct = 0.0;
  double turnover = 0.0;
  double leverage = 0.0;
  double sharpe = 0.0;
};

/// Report CSV layout: header
///   stage,method,return_pct,cost_pct,turnover,leverage,sharpe
/// one row per stage (S1..Sm) and a final `overall` row whose sharpe column
/// carries the overall Sharpe ratio.
void write_report_rows(std::ostream& out, const std::string& method,
                       const BacktestResult& result, bool with_header);
std::vector<ReportRow> parse_report_csv(const std::string& path);

/// Per-asset cost table: CSV `asset,proportional_cost`, decimal fractions.
/// Quadratic coefficients derive as beta_j = 2 * alpha_j^2.
struct CostTable {
  std::vector<std::string> assets;
  std::vector<double> proportional;

  static CostTable from_csv(const std::string& path);
  /// Aligns to the panel's asset order; throws listing missing assets.
  CostModel to_cost_model(CostKind kind,
                          const std::vector<std::string>& panel_assets) const;
};

/// mean and standard error of the mean over replicates.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_se(const std::vector<double>& values);

}  // namespace cape
