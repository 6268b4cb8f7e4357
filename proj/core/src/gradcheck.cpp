#include "coreda/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "coreda/errors.hpp"
#include "coreda/rng.hpp"

namespace coreda {

namespace {

std::vector<std::size_t> pick_coords(std::size_t n, std::size_t want, Rng& rng) {
  if (want == 0 || want >= n) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    return all;
  }
  // partial Fisher-Yates over an index array
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(want);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckResult check_gradients(const GradCheckCase& c, double h, double tol,
                                std::uint64_t coord_seed) {
  GradCheckResult res;
  res.name = c.name;

  zero_grads(c.params);
  Tensor root = c.build();
  backward(root);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(c.params.size());
  for (const auto& p : c.params) {
    analytic.emplace_back(p.grad().begin(), p.grad().end());
  }

  for (std::size_t pi = 0; pi < c.params.size(); ++pi) {
    Tensor p = c.params[pi];
    auto w = p.mutable_data();
    Rng rng(mix_seed(coord_seed, pi));
    for (std::size_t j : pick_coords(w.size(), c.max_coords_per_param, rng)) {
      const double orig = w[j];
      w[j] = orig + h;
      const double f_plus = c.build().item();
      w[j] = orig - h;
      const double f_minus = c.build().item();
      w[j] = orig;

      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double a = analytic[pi][j];
      const double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
      res.max_rel_err = std::max(res.max_rel_err, std::fabs(a - numeric) / denom);
      ++res.coords_checked;
    }
  }

  res.pass = res.max_rel_err <= tol && res.coords_checked > 0;
  return res;
}

}  // namespace coreda
