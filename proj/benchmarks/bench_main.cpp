#include <benchmark/benchmark.h>

#include <vector>

#include "coreda/inference.hpp"
#include "coreda/metrics.hpp"
#include "coreda/model.hpp"
#include "coreda/rng.hpp"
#include "coreda/synth.hpp"
#include "coreda/tensor.hpp"
#include "coreda/trainer.hpp"

namespace {

using namespace coreda;

void bm_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  std::vector<double> buf(n * n);
  for (auto& v : buf) v = rng.uniform(-1.0, 1.0);
  const Tensor a = Tensor::from_data({n, n}, buf, true);
  const Tensor b = Tensor::from_data({n, n}, buf, false);
  for (auto _ : state) {
    const Tensor c = matmul(a, b);
    benchmark::DoNotOptimize(c.data().data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(bm_matmul)->Arg(32)->Arg(64)->Arg(128);

struct StepFixture {
  GenConfig gen;
  std::vector<VideoSample> source, target;
  Model model;
  TrainConfig cfg;

  StepFixture() : model(init_params(make_cfg().encoder, 3)), cfg(make_cfg()) {
    Rng rng(2);
    for (int i = 0; i < 8; ++i) {
      VideoSample v = gen_video(6.0 + 3.0 * i, source_domain(), gen_cfg(), rng);
      v.id = "s" + std::to_string(i);
      source.push_back(std::move(v));
    }
    for (int i = 0; i < 4; ++i) {
      VideoSample v = gen_video(8.0 + 5.0 * i, target_domain(), gen_cfg(), rng);
      v.id = "t" + std::to_string(i);
      v.label.reset();
      target.push_back(std::move(v));
    }
  }

  static GenConfig gen_cfg() {
    GenConfig g;
    g.L = 16;
    g.h = 16;
    g.w = 16;
    return g;
  }

  static TrainConfig make_cfg() {
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.clip_spec = {4, 4};
    cfg.encoder.d = 32;
    cfg.encoder.hidden = 64;
    cfg.encoder.c = 1;
    cfg.encoder.h = 16;
    cfg.encoder.w = 16;
    cfg.encoder.l = 4;
    return cfg;
  }
};

void bm_train_step(benchmark::State& state) {
  StepFixture fx;
  const auto params = fx.model.all_params();
  Rng rng(4);
  for (auto _ : state) {
    const TripletBatch batch =
        sample_triplets(fx.source, fx.target, fx.cfg.batch_size, fx.cfg.clip_spec, rng);
    zero_grads(params);
    const StepGraph g = build_step_losses(batch, fx.model, fx.cfg.weights, GraphOptions{});
    backward(g.total);
    benchmark::DoNotOptimize(g.values.total);
  }
}
BENCHMARK(bm_train_step)->Unit(benchmark::kMillisecond);

void bm_predict_target(benchmark::State& state) {
  StepFixture fx;
  Rng rng(5);
  const ExemplarSet ex = select_exemplars(fx.source, 8, rng);
  const VideoSample probe = gen_video(17.0, target_domain(), StepFixture::gen_cfg(), rng);
  for (auto _ : state) {
    const TargetPrediction p = predict_target(fx.model, probe, ex, MixConfig{}, 4);
    benchmark::DoNotOptimize(p.prediction);
  }
}
BENCHMARK(bm_predict_target)->Unit(benchmark::kMillisecond);

void bm_spearman(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(6);
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = rng.uniform(0.0, 10.0);
    b[i] = a[i] + rng.normal(0.0, 2.0);
  }
  for (auto _ : state) {
    const auto r = spearman(a, b);
    benchmark::DoNotOptimize(r.rho);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}
BENCHMARK(bm_spearman)->Arg(60)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
