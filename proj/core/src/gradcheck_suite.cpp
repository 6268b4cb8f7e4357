#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "coreda/gradcheck.hpp"
#include "coreda/model.hpp"
#include "coreda/rng.hpp"
#include "coreda/sampling.hpp"
#include "coreda/synth.hpp"
#include "coreda/tensor.hpp"
#include "coreda/trainer.hpp"

namespace coreda {

namespace {

Tensor rand_param(std::vector<std::size_t> shape, Rng& rng) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  std::vector<double> data(n);
  for (auto& v : data) v = rng.uniform(-0.9, 0.9);
  return Tensor::from_data(std::move(shape), std::move(data), true);
}

std::vector<double> rand_values(std::size_t n, Rng& rng) {
  std::vector<double> data(n);
  for (auto& v : data) v = rng.uniform(-1.0, 1.0);
  return data;
}

// Every op gets a scalar root with coordinate-dependent curvature so that a
// permuted or rescaled backward rule cannot cancel out.
std::vector<GradCheckCase> op_cases(std::uint64_t seed) {
  std::vector<GradCheckCase> cases;
  std::uint64_t idx = 0;
  auto fresh = [&] { return Rng(mix_seed(seed, idx++)); };

  {
    Rng rng = fresh();
    Tensor a = rand_param({3, 4}, rng);
    Tensor b = rand_param({4, 2}, rng);
    cases.push_back({"matmul", {a, b}, [a, b] { return sum(tanh(matmul(a, b))); }});
  }
  {
    Rng rng = fresh();
    Tensor a = rand_param({5}, rng);
    Tensor b = rand_param({5}, rng);
    cases.push_back({"add", {a, b}, [a, b] { return sum(tanh(add(a, b))); }});
  }
  {
    Rng rng = fresh();
    Tensor a = rand_param({5}, rng);
    Tensor b = rand_param({5}, rng);
    cases.push_back({"sub", {a, b}, [a, b] { return sum(tanh(sub(a, b))); }});
  }
  {
    Rng rng = fresh();
    Tensor a = rand_param({7}, rng);
    cases.push_back({"scale", {a}, [a] { return sum(tanh(scale(a, -1.7))); }});
  }
  {
    Rng rng = fresh();
    Tensor a = rand_param({6}, rng);
    cases.push_back({"tanh", {a}, [a] { return sum(tanh(a)); }});
  }
  {
    Rng rng = fresh();
    Tensor a = rand_param({8}, rng);
    cases.push_back({"sum", {a}, [a] { return tanh(sum(a)); }});
  }
  {
    Rng rng = fresh();
    Tensor x = rand_param({4, 3}, rng);
    Tensor b = rand_param({3}, rng);
    cases.push_back({"add_rowvec", {x, b}, [x, b] { return sum(tanh(add_rowvec(x, b))); }});
  }
  {
    Rng rng = fresh();
    Tensor x = rand_param({5, 4}, rng);
    cases.push_back({"gap_temporal", {x}, [x] { return sum(tanh(gap_temporal(x))); }});
  }
  {
    Rng rng = fresh();
    Tensor a = rand_param({4}, rng);
    Tensor b = rand_param({4}, rng);
    cases.push_back({"concat_vec", {a, b}, [a, b] { return sum(tanh(concat_vec(a, b))); }});
  }
  {
    Rng rng = fresh();
    Tensor pred = rand_param({6}, rng);
    Tensor target = rand_param({6}, rng);
    cases.push_back({"mse", {pred, target}, [pred, target] { return mse(pred, target); }});
  }
  {
    Rng rng = fresh();
    Tensor a = rand_param({3, 4}, rng);
    cases.push_back({"reshape", {a}, [a] { return sum(tanh(reshape(a, {2, 6}))); }});
  }
  {
    Rng rng = fresh();
    Tensor a = rand_param({4}, rng);
    Tensor b = rand_param({4}, rng);
    Tensor c = rand_param({4}, rng);
    cases.push_back({"stack", {a, b, c}, [a, b, c] {
                       std::vector<Tensor> xs{a, b, c};
                       return sum(tanh(stack(xs)));
                     }});
  }
  return cases;
}

// detach has no finite-difference face: perturbing its input moves the value
// path too. Instead the detached graph is compared against a twin where the
// branch is a grad-free constant with the same data; values and every
// gradient must agree exactly, and the severed leaf must stay at zero.
GradCheckResult detach_case(std::uint64_t seed) {
  GradCheckResult res;
  res.name = "detach";

  Rng rng(mix_seed(seed, 0x5eed));
  Tensor a = rand_param({5}, rng);
  Tensor b = rand_param({5}, rng);

  const std::vector<Tensor> leaves1{a, b};
  zero_grads(leaves1);
  Tensor branch = tanh(b);
  Tensor root1 = mse(add(a, detach(branch)), Tensor::vector(rand_values(5, rng)));
  backward(root1);
  std::vector<double> ga1(a.grad().begin(), a.grad().end());
  std::vector<double> gb1(b.grad().begin(), b.grad().end());
  double value1 = root1.item();

  Rng rng2(mix_seed(seed, 0x5eed));
  Tensor a2 = rand_param({5}, rng2);
  Tensor b2 = rand_param({5}, rng2);
  const std::vector<Tensor> leaves2{a2, b2};
  zero_grads(leaves2);
  Tensor constant =
      Tensor::from_data({5}, std::vector<double>(branch.data().begin(), branch.data().end()));
  Tensor root2 = mse(add(a2, constant), Tensor::vector(rand_values(5, rng2)));
  backward(root2);

  double max_diff = std::fabs(value1 - root2.item());
  for (std::size_t i = 0; i < ga1.size(); ++i) {
    max_diff = std::max(max_diff, std::fabs(ga1[i] - a2.grad()[i]));
    res.coords_checked += 1;
  }
  for (double g : gb1) {
    max_diff = std::max(max_diff, std::fabs(g));
    res.coords_checked += 1;
  }
  res.max_rel_err = max_diff;
  res.pass = max_diff <= 1e-12 && res.coords_checked > 0;
  return res;
}

// One full training step at toy scale: triplet batch, every loss term alive,
// gradients checked for all sixteen parameters. The target pseudo-labels are
// frozen at their initial values so the rebuilt graphs stay comparable.
GradCheckCase composed_step_case(std::uint64_t seed) {
  GenConfig gen;
  gen.L = 8;
  gen.c = 1;
  gen.h = 8;
  gen.w = 8;
  gen.jitter_max = 1.5;

  EncoderConfig ec;
  ec.d = 6;
  ec.hidden = 8;
  ec.c = gen.c;
  ec.h = gen.h;
  ec.w = gen.w;
  ec.l = 2;
  ClipSpec spec{2, 2};

  Rng data_rng(mix_seed(seed, 0xdada));
  std::vector<VideoSample> source, target;
  const double skills[3] = {9.0, 17.5, 26.0};
  for (int i = 0; i < 3; ++i) {
    auto v = gen_video(skills[i], source_domain(), gen, data_rng);
    v.id = "s" + std::to_string(i);
    source.push_back(std::move(v));
  }
  for (int i = 0; i < 2; ++i) {
    auto v = gen_video(14.0 + 7.0 * i, target_domain(), gen, data_rng);
    v.label.reset();
    v.id = "t" + std::to_string(i);
    target.push_back(std::move(v));
  }

  Rng batch_rng(mix_seed(seed, 0xba7c));
  auto batch = std::make_shared<TripletBatch>(sample_triplets(source, target, 2, spec, batch_rng));

  auto m = std::make_shared<Model>(init_params(ec, mix_seed(seed, 0x0de1)));

  auto pseudo = std::make_shared<std::vector<double>>();
  for (const auto& clip : batch->target_clips) {
    pseudo->push_back(predict_abs(encode(clip, *m), *m).item());
  }

  GradCheckCase c;
  c.name = "coreda_step";
  c.params = m->all_params();
  c.max_coords_per_param = 4;
  c.build = [batch, m, pseudo] {
    GraphOptions opt;
    opt.pseudo_label_override = pseudo.get();
    LossWeights w{1.0, 0.5, 0.75};
    return build_step_losses(*batch, *m, w, opt).total;
  };
  return c;
}

}  // namespace

GradCheckReport run_gradcheck_suite(std::uint64_t seed) {
  GradCheckReport report;

  for (const auto& c : op_cases(seed)) {
    report.results.push_back(check_gradients(c, report.h, report.tol, mix_seed(seed, 0xc0)));
  }
  report.results.push_back(detach_case(seed));
  report.results.push_back(
      check_gradients(composed_step_case(seed), report.h, report.tol, mix_seed(seed, 0xc1)));

  report.all_pass = true;
  for (const auto& r : report.results) report.all_pass = report.all_pass && r.pass;
  return report;
}

}  // namespace coreda
