#include "coreda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "coreda/errors.hpp"
#include <nlohmann/json.hpp>

namespace coreda {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, const char* op) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(op) + ": length mismatch " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
  }
}

double pearson_or_nan(std::span<const double> a, std::span<const double> b, bool* degenerate) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) {
    *degenerate = true;
    return 0.0;
  }
  return cov / std::sqrt(va * vb);
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    // positions i..j (0-based) share the average of ranks i+1..j+1
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

SpearmanResult spearman(std::span<const double> a, std::span<const double> b) {
  check_lengths(a, b, "spearman");
  SpearmanResult res;
  if (a.size() < 2) {
    res.degenerate = true;
    return res;
  }
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  res.rho = pearson_or_nan(ra, rb, &res.degenerate);
  return res;
}

double mae(std::span<const double> preds, std::span<const double> labels) {
  check_lengths(preds, labels, "mae");
  if (preds.empty()) throw DimensionError("mae: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) acc += std::fabs(preds[i] - labels[i]);
  return acc / static_cast<double>(preds.size());
}

double rmse(std::span<const double> preds, std::span<const double> labels) {
  check_lengths(preds, labels, "rmse");
  if (preds.empty()) throw DimensionError("rmse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double e = preds[i] - labels[i];
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(preds.size()));
}

R2Result r2(std::span<const double> preds, std::span<const double> labels) {
  check_lengths(preds, labels, "r2");
  R2Result res;
  if (preds.size() < 2) {
    res.degenerate = true;
    return res;
  }
  double mean = 0.0;
  for (double l : labels) mean += l;
  mean /= static_cast<double>(labels.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double e = preds[i] - labels[i];
    const double d = labels[i] - mean;
    ss_res += e * e;
    ss_tot += d * d;
  }
  if (ss_tot == 0.0) {
    res.degenerate = true;
    return res;
  }
  res.r2 = 1.0 - ss_res / ss_tot;
  return res;
}

EvalReport make_report(std::vector<EvalRow> rows) {
  EvalReport report;
  report.rows = std::move(rows);
  std::vector<double> preds, labels;
  for (const auto& row : report.rows) {
    if (!row.true_label) continue;
    preds.push_back(row.prediction);
    labels.push_back(*row.true_label);
  }
  report.n = preds.size();
  if (report.n >= 1) {
    report.mae = mae(preds, labels);
    report.rmse = rmse(preds, labels);
  }
  report.scc = spearman(preds, labels);
  report.r2 = r2(preds, labels);
  return report;
}

void write_report(const EvalReport& report, const std::string& report_path,
                  const std::string& rows_csv_path) {
  nlohmann::json j;
  j["n"] = report.n;
  j["scc"] = report.scc.rho;
  j["scc_degenerate"] = report.scc.degenerate;
  j["mae"] = report.mae;
  j["rmse"] = report.rmse;
  j["r2"] = report.r2.r2;
  j["r2_degenerate"] = report.r2.degenerate;
  j["rows_csv"] = rows_csv_path;

  std::ofstream rf(report_path);
  if (!rf) throw IoError("cannot open " + report_path + " for writing");
  rf << j.dump(2) << '\n';

  std::size_t m = 0;
  for (const auto& row : report.rows) m = std::max(m, row.per_exemplar.size());
  std::ofstream cf(rows_csv_path);
  if (!cf) throw IoError("cannot open " + rows_csv_path + " for writing");
  cf << "id,true_label,prediction";
  for (std::size_t e = 0; e < m; ++e) cf << ",recon_" << e;
  cf << '\n';
  cf.precision(17);
  for (const auto& row : report.rows) {
    cf << row.id << ',';
    if (row.true_label) cf << *row.true_label;
    cf << ',' << row.prediction;
    for (std::size_t e = 0; e < m; ++e) {
      cf << ',';
      if (e < row.per_exemplar.size()) cf << row.per_exemplar[e];
    }
    cf << '\n';
  }
  if (!cf) throw IoError("failed writing " + rows_csv_path);
}

}  // namespace coreda
