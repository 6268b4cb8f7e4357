#pragma once

#include <vector>

#include "coreda/model.hpp"
#include "coreda/rng.hpp"
#include "coreda/synth.hpp"

namespace coreda {

struct ExemplarSet {
  std::vector<VideoSample> videos;  // labeled source samples, one per bin
  std::vector<double> labels;
  std::vector<Tensor> backgrounds;  // [c,h,w] temporal medians
  std::size_t size() const { return videos.size(); }
};

struct MixConfig {
  double lambda = 0.25;
};

void validate(const MixConfig& mix);

// Splits [6,30] into M equal-width bins, draws one exemplar uniformly from
// each non-empty bin and backfills empty bins from the remaining pool.
ExemplarSet select_exemplars(const std::vector<VideoSample>& source, int M, Rng& rng);

// Per-pixel median over time; the lower-middle element for even lengths.
Tensor extract_background(const VideoSample& v);

// (1-lambda)*frames + lambda*bg, the background broadcast over time, clipped
// to [0,1]. lambda = 0 returns the frames unchanged.
Tensor mix_background(const Tensor& frames, const Tensor& bg, double lambda);

struct TargetPrediction {
  double prediction = 0.0;
  std::vector<double> per_exemplar;  // reconstruction against each exemplar
};

// For each exemplar: blend its background into the target video, tile both
// videos into clips, predict the score difference and anchor it on the
// exemplar label. The final score is the mean over exemplars; the absolute
// head is never consulted.
TargetPrediction predict_target(const Model& m, const VideoSample& x_t, const ExemplarSet& ex,
                                const MixConfig& mix, int l);

}  // namespace coreda
