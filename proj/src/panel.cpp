#include "cape/panel.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cape {

void ReturnPanel::validate() const {
  const auto n = returns.rows();
  const auto p = returns.cols();
  if (n < 2) throw std::invalid_argument("ReturnPanel: need at least 2 rows");
  if (p < 1) throw std::invalid_argument("ReturnPanel: need at least 1 asset");
  if (static_cast<Eigen::Index>(dates.size()) != n)
    throw std::invalid_argument("ReturnPanel: date count != row count");
  if (static_cast<Eigen::Index>(assets.size()) != p)
    throw std::invalid_argument("ReturnPanel: asset count != column count");
  if (!returns.allFinite())
    throw std::invalid_argument("ReturnPanel: non-finite return entry");
  std::set<std::string> uniq(assets.begin(), assets.end());
  if (uniq.size() != assets.size())
    throw std::invalid_argument("ReturnPanel: duplicate asset identifiers");
}

ReturnPanel ReturnPanel::window(int first, int count) const {
  if (first < 0 || count < 1 || first + count > days())
    throw std::invalid_argument("ReturnPanel::window: range out of bounds");
  ReturnPanel out;
  out.assets = assets;
  out.dates.assign(dates.begin() + first, dates.begin() + first + count);
  out.returns = returns.middleRows(first, count);
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

ReturnPanel ReturnPanel::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open returns CSV: " + path);

  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("empty returns CSV: " + path);
  auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "date")
    throw std::invalid_argument(
        "returns CSV header must be `date,<asset>,...`: " + path);

  ReturnPanel panel;
  panel.assets.assign(header.begin() + 1, header.end());
  const int p = static_cast<int>(panel.assets.size());

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != p + 1)
      throw std::invalid_argument("returns CSV line " + std::to_string(line_no) +
                                  ": expected " + std::to_string(p + 1) +
                                  " fields, got " +
                                  std::to_string(fields.size()));
    panel.dates.push_back(fields[0]);
    std::vector<double> row(p);
    for (int j = 0; j < p; ++j) {
      try {
        row[j] = std::stod(fields[j + 1]);
      } catch (const std::exception&) {
        throw std::invalid_argument("returns CSV line " +
                                    std::to_string(line_no) +
                                    ": bad number `" + fields[j + 1] + "`");
      }
      if (!std::isfinite(row[j]))
        throw std::invalid_argument("returns CSV line " +
                                    std::to_string(line_no) +
                                    ": non-finite return");
    }
    rows.push_back(std::move(row));
  }

  panel.returns.resize(static_cast<Eigen::Index>(rows.size()), p);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < p; ++j) panel.returns(i, j) = rows[i][j];
  panel.validate();
  return panel;
}

void ReturnPanel::to_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write returns CSV: " + path);
  out << "date";
  for (const auto& a : assets) out << ',' << a;
  out << '\n';
  out.precision(12);
  for (int i = 0; i < days(); ++i) {
    out << dates[i];
    for (int j = 0; j < num_assets(); ++j) out << ',' << returns(i, j);
    out << '\n';
  }
}

}  // namespace cape
