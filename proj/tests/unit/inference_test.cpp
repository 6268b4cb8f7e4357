#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "coreda/errors.hpp"
#include "coreda/inference.hpp"
#include "coreda/synth.hpp"

using namespace coreda;

namespace {

GenConfig tiny_gen() {
  GenConfig g;
  g.L = 12;
  g.h = 10;
  g.w = 10;
  g.jitter_max = 2.0;
  return g;
}

std::vector<VideoSample> labeled_pool(const std::vector<double>& skills, std::uint64_t seed) {
  std::vector<VideoSample> pool;
  Rng rng(seed);
  int i = 0;
  for (double s : skills) {
    VideoSample v = gen_video(s, source_domain(), tiny_gen(), rng);
    v.id = "p" + std::to_string(i++);
    pool.push_back(std::move(v));
  }
  return pool;
}

EncoderConfig tiny_enc() {
  EncoderConfig c;
  c.d = 6;
  c.hidden = 8;
  c.c = 1;
  c.h = 10;
  c.w = 10;
  c.l = 4;
  return c;
}

}  // namespace

TEST_CASE("exemplar selection stratifies across the label range") {
  // 4 bins over [6,30]: [6,12) [12,18) [18,24) [24,30]
  auto pool = labeled_pool({7.0, 8.0, 13.0, 14.0, 19.0, 20.0, 25.0, 26.0}, 3);
  Rng rng(5);
  const ExemplarSet ex = select_exemplars(pool, 4, rng);
  REQUIRE(ex.size() == 4);
  CHECK(ex.labels[0] < 12.0);
  CHECK(ex.labels[1] >= 12.0);
  CHECK(ex.labels[1] < 18.0);
  CHECK(ex.labels[2] >= 18.0);
  CHECK(ex.labels[2] < 24.0);
  CHECK(ex.labels[3] >= 24.0);
  const std::set<std::string> ids{ex.videos[0].id, ex.videos[1].id, ex.videos[2].id,
                                  ex.videos[3].id};
  CHECK(ids.size() == 4);
  CHECK(ex.backgrounds[0].shape() == std::vector<std::size_t>{1, 10, 10});
}

TEST_CASE("empty bins are backfilled without repeats") {
  // all labels land in the lowest of 4 bins
  auto pool = labeled_pool({6.5, 7.0, 7.5, 8.0, 8.5, 9.0}, 9);
  Rng rng(2);
  const ExemplarSet ex = select_exemplars(pool, 4, rng);
  REQUIRE(ex.size() == 4);
  std::set<std::string> ids;
  for (const auto& v : ex.videos) ids.insert(v.id);
  CHECK(ids.size() == 4);
}

TEST_CASE("exemplar selection validates its inputs") {
  auto pool = labeled_pool({7.0, 20.0}, 1);
  Rng rng(1);
  CHECK_THROWS_AS(select_exemplars(pool, 3, rng), ContractError);  // pool smaller than M
  CHECK_THROWS_AS(select_exemplars(pool, 0, rng), ContractError);
  pool[1].label.reset();
  CHECK_THROWS_AS(select_exemplars(pool, 2, rng), ContractError);
}

TEST_CASE("background extraction is the per-pixel temporal median") {
  // L=4 even: lower-middle element, index (4-1)/2 = 1 of the sorted column
  std::vector<double> vals = {0.9, 0.1, 0.4, 0.6,   // pixel columns interleaved per frame
                              0.2, 0.8, 0.3, 0.7};
  // frames [4,1,1,2]: t-major, so pixel0 column {0.9,0.4,0.2,0.3}, pixel1 {0.1,0.6,0.8,0.7}
  VideoSample v;
  v.frames = Tensor::from_data({4, 1, 1, 2}, std::move(vals));
  const Tensor bg = extract_background(v);
  REQUIRE(bg.shape() == std::vector<std::size_t>{1, 1, 2});
  CHECK(bg.data()[0] == 0.3);
  CHECK(bg.data()[1] == 0.6);
}

TEST_CASE("extract_background recovers the closed-form frame where the blob is rare") {
  GenConfig gen = tiny_gen();
  gen.h = 16;
  gen.w = 16;
  DomainConfig dom = target_domain();
  dom.noise_sigma = 0.0;
  Rng rng(8);
  const VideoSample v = gen_video(22.0, dom, gen, rng);
  const Tensor want = background_frame(dom, gen);
  const Tensor got = extract_background(v);
  REQUIRE(got.shape() == want.shape());

  const std::size_t L = v.frames.shape()[0];
  const std::size_t px = want.size();
  std::size_t checked = 0;
  for (std::size_t p = 0; p < px; ++p) {
    CHECK(got.data()[p] >= want.data()[p]);  // the blob only ever brightens
    std::size_t touched = 0;
    for (std::size_t t = 0; t < L; ++t) touched += v.frames.data()[t * px + p] != want.data()[p];
    if (2 * touched < L) {
      CHECK(got.data()[p] == want.data()[p]);
      ++checked;
    }
  }
  CHECK(checked > px / 4);  // the support truncation leaves most pixels blob-free
}

TEST_CASE("mix_background blends, clips and short-circuits lambda zero") {
  VideoSample v;
  v.frames = Tensor::from_data({2, 1, 1, 2}, {0.0, 1.0, 0.5, 0.25});
  const Tensor bg = Tensor::from_data({1, 1, 2}, {1.0, 0.5});

  const Tensor same = mix_background(v.frames, bg, 0.0);
  for (std::size_t i = 0; i < 4; ++i) CHECK(same.data()[i] == v.frames.data()[i]);

  const Tensor mixed = mix_background(v.frames, bg, 0.4);
  CHECK(mixed.data()[0] == doctest::Approx(0.4));          // 0.6*0 + 0.4*1
  CHECK(mixed.data()[1] == doctest::Approx(0.8));          // 0.6*1 + 0.4*0.5
  CHECK(mixed.data()[2] == doctest::Approx(0.7));
  CHECK(mixed.data()[3] == doctest::Approx(0.35));

  CHECK_THROWS_AS(mix_background(v.frames, bg, 1.5), ContractError);
  CHECK_THROWS_AS(mix_background(v.frames, Tensor::zeros({1, 2, 2}), 0.2), DimensionError);
  CHECK_THROWS_AS(validate(MixConfig{-0.1}), ContractError);
}

TEST_CASE("predict_target averages per-exemplar reconstructions, abs head untouched") {
  auto pool = labeled_pool({8.0, 15.0, 22.0, 28.0}, 21);
  Rng rng(4);
  const ExemplarSet ex = select_exemplars(pool, 4, rng);

  const Model m = init_params(tiny_enc(), 17);
  Rng vr(33);
  VideoSample target = gen_video(18.0, target_domain(), tiny_gen(), vr);

  m.counters->reset();
  const TargetPrediction pred = predict_target(m, target, ex, MixConfig{0.25}, 4);
  REQUIRE(pred.per_exemplar.size() == 4);
  double mean = 0.0;
  for (double r : pred.per_exemplar) mean += r;
  mean /= 4.0;
  CHECK(pred.prediction == doctest::Approx(mean).epsilon(1e-12));
  CHECK(m.counters->abs_head.load() == 0);
  CHECK(m.counters->rel_head.load() == 4);
  CHECK(m.counters->encode.load() == 8);  // target and exemplar per pairing

  // an untrained rel head emits near-zero deltas, so recon tracks the anchors
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::fabs(pred.per_exemplar[i] - ex.labels[i]) < 6.0);
  }

  CHECK_THROWS_AS(predict_target(m, target, ex, MixConfig{0.25}, 6), ContractError);
  CHECK_THROWS_AS(predict_target(m, target, ExemplarSet{}, MixConfig{0.25}, 4), ContractError);
}

TEST_CASE("lambda zero mixing leaves predictions identical to raw frames") {
  auto pool = labeled_pool({10.0, 25.0}, 41);
  Rng rng(6);
  const ExemplarSet ex = select_exemplars(pool, 2, rng);
  const Model m = init_params(tiny_enc(), 9);
  Rng vr(51);
  const VideoSample target = gen_video(12.0, target_domain(), tiny_gen(), vr);

  const TargetPrediction a = predict_target(m, target, ex, MixConfig{0.0}, 4);
  const TargetPrediction b = predict_target(m, target, ex, MixConfig{0.0}, 4);
  CHECK(a.prediction == b.prediction);  // bitwise deterministic path
  for (std::size_t i = 0; i < 2; ++i) CHECK(a.per_exemplar[i] == b.per_exemplar[i]);
}
