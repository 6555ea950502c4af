#include "cape/report.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace cape {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_double(const std::string& s, const std::string& path, int line_no,
                    const char* column) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) +
                             ": cannot parse " + column + " value '" + s + "'");
  }
}

}  // namespace

void write_report_rows(std::ostream& out, const std::string& method,
                       const BacktestResult& result, bool with_header) {
  if (with_header)
    out << "stage,method,return_pct,cost_pct,turnover,leverage,sharpe\n";
  out << std::setprecision(12);
  for (const StageReport& s : result.stages) {
    out << 'S' << s.stage << ',' << method << ',' << s.gross_return_pct << ','
        << s.cost_pct << ',' << s.turnover << ',' << s.leverage << ','
        << s.sharpe << '\n';
  }
  double total_return_pct = 0.0;
  double total_cost_pct = 0.0;
  double total_turnover = 0.0;
  double mean_leverage = 0.0;
  double growth = 1.0;
  for (const StageReport& s : result.stages) {
    growth *= 1.0 + s.gross_return_pct / 100.0;
    total_cost_pct += s.cost_pct;
    total_turnover += s.turnover;
    mean_leverage += s.leverage;
  }
  total_return_pct = (growth - 1.0) * 100.0;
  if (!result.stages.empty())
    mean_leverage /= static_cast<double>(result.stages.size());
  out << "overall," << method << ',' << total_return_pct << ','
      << total_cost_pct << ',' << total_turnover << ',' << mean_leverage << ','
      << result.overall_sharpe << '\n';
}

std::vector<ReportRow> parse_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report CSV: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(path + ": empty report CSV");
  if (split_csv_line(line) !=
      std::vector<std::string>{"stage", "method", "return_pct", "cost_pct",
                               "turnover", "leverage", "sharpe"})
    throw std::runtime_error(path + ":1: unexpected report header '" + line +
                             "'");
  std::vector<ReportRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 7)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 7 fields, got " +
                               std::to_string(fields.size()));
    ReportRow row;
    if (fields[0] == "overall") {
      row.stage = 0;
    } else if (fields[0].size() >= 2 && fields[0][0] == 'S') {
      try {
        row.stage = std::stoi(fields[0].substr(1));
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": bad stage label '" + fields[0] + "'");
      }
      if (row.stage < 1)
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": bad stage label '" + fields[0] + "'");
    } else {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": bad stage label '" + fields[0] + "'");
    }
    row.method = fields[1];
    row.return_pct = parse_double(fields[2], path, line_no, "return_pct");
    row.cost_pct = parse_double(fields[3], path, line_no, "cost_pct");
    row.turnover = parse_double(fields[4], path, line_no, "turnover");
    row.leverage = parse_double(fields[5], path, line_no, "leverage");
    row.sharpe = parse_double(fields[6], path, line_no, "sharpe");
    rows.push_back(std::move(row));
  }
  return rows;
}

CostTable CostTable::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open cost CSV: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(path + ": empty cost CSV");
  auto header = split_csv_line(line);
  if (header != std::vector<std::string>{"asset", "proportional_cost"})
    throw std::runtime_error(path + ":1: unexpected cost header '" + line +
                             "'");
  CostTable table;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 2)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 2 fields, got " +
                               std::to_string(fields.size()));
    if (fields[0].empty())
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": empty asset name");
    double alpha = parse_double(fields[1], path, line_no, "proportional_cost");
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": proportional cost must be finite and >= 0");
    table.assets.push_back(fields[0]);
    table.proportional.push_back(alpha);
  }
  return table;
}

CostModel CostTable::to_cost_model(
    CostKind kind, const std::vector<std::string>& panel_assets) const {
  std::unordered_map<std::string, double> by_asset;
  for (size_t i = 0; i < assets.size(); ++i) {
    if (!by_asset.emplace(assets[i], proportional[i]).second)
      throw std::runtime_error("cost table: duplicate asset '" + assets[i] +
                               "'");
  }
  Eigen::VectorXd coeff(static_cast<Eigen::Index>(panel_assets.size()));
  std::string missing;
  for (size_t j = 0; j < panel_assets.size(); ++j) {
    auto it = by_asset.find(panel_assets[j]);
    if (it == by_asset.end()) {
      if (!missing.empty()) missing += ", ";
      missing += panel_assets[j];
      continue;
    }
    const double alpha = it->second;
    coeff(static_cast<Eigen::Index>(j)) =
        kind == CostKind::kQuadratic ? 2.0 * alpha * alpha : alpha;
  }
  if (!missing.empty())
    throw std::runtime_error("cost table: missing assets: " + missing);
  return kind == CostKind::kQuadratic ? CostModel::quadratic(coeff)
                                      : CostModel::proportional(coeff);
}

MeanSe mean_se(const std::vector<double>& values) {
  if (values.empty())
    throw std::invalid_argument("mean_se: need at least one value");
  MeanSe out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() == 1) {
    out.se = 0.0;
    return out;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.se = std::sqrt(ss / static_cast<double>(values.size() - 1) /
                     static_cast<double>(values.size()));
  return out;
}

}  // namespace cape
