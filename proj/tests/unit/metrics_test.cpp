#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <vector>

#include "coreda/metrics.hpp"
#include "coreda/rng.hpp"

using namespace coreda;

namespace {

// O(n^2) rank: 1 + (#smaller) + (#equal - 1)/2.
std::vector<double> ranks_quadratic(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::size_t smaller = 0, equal = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      smaller += v[j] < v[i];
      equal += v[j] == v[i];
    }
    r[i] = 1.0 + static_cast<double>(smaller) + (static_cast<double>(equal) - 1.0) / 2.0;
  }
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  return num / std::sqrt(da * db);
}

}  // namespace

TEST_CASE("average ranks handle ties fractionally") {
  const std::vector<double> v{3.0, 1.0, 3.0, 2.0};
  const auto r = average_ranks(v);
  CHECK(r == std::vector<double>{3.5, 1.0, 3.5, 2.0});
  CHECK(average_ranks(std::vector<double>{5.0}) == std::vector<double>{1.0});
}

TEST_CASE("spearman matches a frozen hand value") {
  const std::vector<double> a{1.0, 2.0, 2.0, 3.0};
  const std::vector<double> b{1.0, 3.0, 2.0, 4.0};
  const auto s = spearman(a, b);
  CHECK_FALSE(s.degenerate);
  CHECK(s.rho == doctest::Approx(0.9486832980505138).epsilon(1e-12));

  CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}).rho == doctest::Approx(1.0));
  CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}).rho == doctest::Approx(-1.0));
}

TEST_CASE("spearman equals pearson of quadratic ranks on random data") {
  Rng rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(40);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      // coarse grid forces frequent ties
      a[i] = std::floor(rng.uniform(-3.0, 3.0));
      b[i] = std::floor(rng.uniform(-3.0, 3.0));
    }
    const auto got = spearman(a, b);
    const auto ra = ranks_quadratic(a);
    const auto rb = ranks_quadratic(b);
    const bool const_a = std::all_of(a.begin(), a.end(), [&](double x) { return x == a[0]; });
    const bool const_b = std::all_of(b.begin(), b.end(), [&](double x) { return x == b[0]; });
    if (const_a || const_b) {
      CHECK(got.degenerate);
      continue;
    }
    CHECK_FALSE(got.degenerate);
    CHECK(std::fabs(got.rho - pearson(ra, rb)) <= 1e-12);
    CHECK(got.rho >= -1.0 - 1e-12);
    CHECK(got.rho <= 1.0 + 1e-12);
  }
}

TEST_CASE("spearman is invariant under monotone transforms") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + rng.uniform_index(30);
    std::vector<double> a(n), b(n), ta(n), tb(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform(-5.0, 5.0);
      b[i] = rng.uniform(-5.0, 5.0);
      ta[i] = std::exp(0.7 * a[i]) + 3.0;  // strictly increasing
      tb[i] = std::atan(b[i]) * 2.0 - 1.0;
    }
    const auto base = spearman(a, b);
    const auto mapped = spearman(ta, tb);
    REQUIRE_FALSE(base.degenerate);
    CHECK(std::fabs(base.rho - mapped.rho) <= 1e-12);
  }
}

TEST_CASE("degenerate inputs are flagged, never NaN") {
  const auto c = spearman(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3});
  CHECK(c.degenerate);
  CHECK_FALSE(std::isnan(c.rho));
  CHECK(spearman(std::vector<double>{1}, std::vector<double>{2}).degenerate);

  const auto rr = r2(std::vector<double>{1, 2}, std::vector<double>{3, 3});
  CHECK(rr.degenerate);
}

TEST_CASE("mae rmse r2 against hand values") {
  const std::vector<double> preds{1.0, 2.0, 4.0};
  const std::vector<double> labels{1.0, 3.0, 3.0};
  CHECK(mae(preds, labels) == doctest::Approx(2.0 / 3.0));
  CHECK(rmse(preds, labels) == doctest::Approx(std::sqrt(2.0 / 3.0)));
  // ss_res = 2, mean label = 7/3, ss_tot = 8/3
  const auto rr = r2(preds, labels);
  CHECK_FALSE(rr.degenerate);
  CHECK(rr.r2 == doctest::Approx(1.0 - 2.0 / (8.0 / 3.0)));
}

TEST_CASE("report aggregates only labelled rows and survives a disk trip") {
  std::vector<EvalRow> rows;
  for (int i = 0; i < 5; ++i) {
    EvalRow r;
    r.id = "v" + std::to_string(i);
    r.prediction = static_cast<double>(i);
    if (i != 2) r.true_label = static_cast<double>(i) + (i == 4 ? -3.0 : 0.1);
    r.per_exemplar = {r.prediction - 0.5, r.prediction + 0.5};
    rows.push_back(std::move(r));
  }
  const EvalReport rep = make_report(rows);
  CHECK(rep.n == 4);  // the unlabeled row is excluded from aggregates
  CHECK(rep.rows.size() == 5);
  std::vector<double> p{0, 1, 3, 4}, y{0.1, 1.1, 3.1, 1.0};
  CHECK(rep.scc.rho == doctest::Approx(spearman(p, y).rho));
  CHECK(rep.mae == doctest::Approx(mae(p, y)));

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "coreda_metrics_test";
  fs::create_directories(dir);
  const std::string jpath = (dir / "report.json").string();
  const std::string cpath = (dir / "rows.csv").string();
  write_report(rep, jpath, cpath);

  std::ifstream jf(jpath);
  REQUIRE(jf.good());
  const std::string jtext((std::istreambuf_iterator<char>(jf)), std::istreambuf_iterator<char>());
  CHECK(jtext.find("\"scc\"") != std::string::npos);

  std::ifstream cf(cpath);
  REQUIRE(cf.good());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(cf, line)) ++lines;
  CHECK(lines == 6);  // header + 5 rows
}
