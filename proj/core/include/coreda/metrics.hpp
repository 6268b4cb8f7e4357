#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace coreda {

// Correlation of a constant vector (or n < 2) has no defined value; callers
// get an explicit flag instead of a quiet NaN.
struct SpearmanResult {
  double rho = 0.0;
  bool degenerate = false;
};

struct R2Result {
  double r2 = 0.0;
  bool degenerate = false;
};

/// Spearman rank correlation with average (fractional) ranks for ties.
SpearmanResult spearman(std::span<const double> a, std::span<const double> b);

double mae(std::span<const double> preds, std::span<const double> labels);
double rmse(std::span<const double> preds, std::span<const double> labels);
R2Result r2(std::span<const double> preds, std::span<const double> labels);

// average ranks, 1-based; exposed for tests
std::vector<double> average_ranks(std::span<const double> v);

struct EvalRow {
  std::string id;
  std::optional<double> true_label;
  double prediction = 0.0;
  std::vector<double> per_exemplar;  // reconstruction per exemplar, pre-average
};

struct EvalReport {
  std::size_t n = 0;
  SpearmanResult scc;
  double mae = 0.0;
  double rmse = 0.0;
  R2Result r2;
  std::vector<EvalRow> rows;
};

/// Aggregates over the labelled rows of `rows`.
EvalReport make_report(std::vector<EvalRow> rows);

void write_report(const EvalReport& report, const std::string& report_path,
                  const std::string& rows_csv_path);

}  // namespace coreda
