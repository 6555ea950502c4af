#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace cape {

/// Dated n x p matrix of simple excess returns (decimal fractions, per day).
/// Rows are trading days, columns are assets. All entries must be finite.
struct ReturnPanel {
  std::vector<std::string> dates;
  std::vector<std::string> assets;
  Eigen::MatrixXd returns;  // n x p

  int days() const { return static_cast<int>(returns.rows()); }
  int num_assets() const { return static_cast<int>(returns.cols()); }

  /// Throws std::invalid_argument on dimension mismatch, non-finite entries,
  /// duplicate asset ids, n < 2 or p < 1.
  void validate() const;

  /// Row-range view as a new panel (rows [first, first + count)).
  ReturnPanel window(int first, int count) const;

  /// CSV schema: header `date,<asset_1>,...,<asset_p>`, one row per day.
  static ReturnPanel from_csv(const std::string& path);
  void to_csv(const std::string& path) const;
};

}  // namespace cape
