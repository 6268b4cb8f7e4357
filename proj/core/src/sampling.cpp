#include "coreda/sampling.hpp"

#include <cstring>
#include <string>

#include "coreda/errors.hpp"

namespace coreda {

void validate(const ClipSpec& spec) {
  if (spec.K < 1 || spec.l < 1) throw ContractError("clip spec: K and l must be >= 1");
}

namespace {

struct FrameView {
  std::size_t L, frame_vals;
  std::span<const double> data;
};

FrameView frame_view(const Tensor& frames) {
  const auto& shape = frames.shape();
  if (shape.size() != 4) throw DimensionError("clip sampling: expected [L,c,h,w] frames");
  return {shape[0], shape[1] * shape[2] * shape[3], frames.data()};
}

Tensor gather_frames(const Tensor& frames, const std::vector<std::size_t>& idx) {
  const auto view = frame_view(frames);
  const auto& shape = frames.shape();
  std::vector<double> out(idx.size() * view.frame_vals);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::memcpy(out.data() + i * view.frame_vals, view.data.data() + idx[i] * view.frame_vals,
                view.frame_vals * sizeof(double));
  }
  return Tensor::from_data({idx.size(), shape[1], shape[2], shape[3]}, std::move(out));
}

}  // namespace

Tensor train_clip_sample(const VideoSample& v, const ClipSpec& spec, Rng& rng) {
  validate(spec);
  const auto view = frame_view(v.frames);
  const std::size_t L = view.L;
  const std::size_t K = static_cast<std::size_t>(spec.K);
  const std::size_t l = static_cast<std::size_t>(spec.l);
  const std::size_t seg = L / K;
  if (seg < l) {
    throw ContractError("train_clip_sample: floor(L/K) < l with L=" + std::to_string(L) +
                        ", K=" + std::to_string(spec.K) + ", l=" + std::to_string(spec.l));
  }

  std::vector<std::size_t> idx;
  idx.reserve(K * l);
  for (std::size_t s = 0; s < K; ++s) {
    const std::size_t base = s * seg;
    const std::size_t start = base + rng.uniform_index(seg - l + 1);
    for (std::size_t f = 0; f < l; ++f) idx.push_back(start + f);
  }
  return gather_frames(v.frames, idx);
}

int test_clip_count(int L, int l) {
  if (l < 1) throw ContractError("test_clip_count: l must be >= 1");
  if (L < l) throw ContractError("test_clip_count: L < l");
  return (L + l - 1) / l;
}

Tensor test_clip_tile(const Tensor& frames, int l) {
  const auto view = frame_view(frames);
  const std::size_t L = view.L;
  if (l < 1) throw ContractError("test_clip_tile: l must be >= 1");
  if (L < static_cast<std::size_t>(l)) {
    throw ContractError("test_clip_tile: video length " + std::to_string(L) +
                        " shorter than clip length " + std::to_string(l));
  }
  const std::size_t ll = static_cast<std::size_t>(l);
  const std::size_t kp = (L + ll - 1) / ll;

  std::vector<std::size_t> idx;
  idx.reserve(kp * ll);
  for (std::size_t k = 0; k < kp; ++k) {
    std::size_t start = k * ll;
    if (start + ll > L) start = L - ll;  // back-align the final clip
    for (std::size_t f = 0; f < ll; ++f) idx.push_back(start + f);
  }
  return gather_frames(frames, idx);
}

Tensor test_clip_tile(const VideoSample& v, int l) { return test_clip_tile(v.frames, l); }

}  // namespace coreda
