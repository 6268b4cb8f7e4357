#pragma once

#include "coreda/rng.hpp"
#include "coreda/synth.hpp"
#include "coreda/tensor.hpp"

namespace coreda {

struct ClipSpec {
  int K = 12;
  int l = 12;
};

void validate(const ClipSpec& spec);

// Splits the video into K equal segments of floor(L/K) frames (the trailing
// L mod K frames are never used) and draws l consecutive frames uniformly
// within each segment. Output shape [(K*l), c, h, w].
Tensor train_clip_sample(const VideoSample& v, const ClipSpec& spec, Rng& rng);

// Deterministic full-coverage tiling: K' = ceil(L/l) clips starting at
// 0, l, 2l, ...; when L mod l != 0 the final clip is the last l frames.
Tensor test_clip_tile(const VideoSample& v, int l);
Tensor test_clip_tile(const Tensor& frames, int l);

// Number of clips test_clip_tile yields for a given length.
int test_clip_count(int L, int l);

}  // namespace coreda
