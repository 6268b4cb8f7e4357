#include "coreda/inference.hpp"

#include <algorithm>
#include <cmath>

#include "coreda/errors.hpp"
#include "coreda/sampling.hpp"

namespace coreda {

void validate(const MixConfig& mix) {
  if (mix.lambda < 0.0 || mix.lambda > 1.0) {
    throw ContractError("mix config: lambda must lie in [0,1]");
  }
}

ExemplarSet select_exemplars(const std::vector<VideoSample>& source, int M, Rng& rng) {
  if (M < 1) throw ContractError("select_exemplars: M must be >= 1");
  if (source.size() < static_cast<std::size_t>(M)) {
    throw ContractError("select_exemplars: pool of " + std::to_string(source.size()) +
                        " is smaller than M=" + std::to_string(M));
  }
  for (const auto& v : source) {
    if (!v.label) throw ContractError("select_exemplars: unlabeled sample " + v.id);
  }

  const std::size_t m = static_cast<std::size_t>(M);
  std::vector<std::vector<std::size_t>> bins(m);
  for (std::size_t i = 0; i < source.size(); ++i) {
    const double y = *source[i].label;
    auto bin = static_cast<std::size_t>((y - 6.0) / 24.0 * static_cast<double>(m));
    bin = std::min(bin, m - 1);
    bins[bin].push_back(i);
  }

  std::vector<std::size_t> chosen;
  std::vector<bool> picked(source.size(), false);
  std::vector<std::size_t> empty_bins;
  for (std::size_t b = 0; b < m; ++b) {
    if (bins[b].empty()) {
      empty_bins.push_back(b);
      chosen.push_back(source.size());  // placeholder, backfilled below
      continue;
    }
    const std::size_t i = bins[b][rng.uniform_index(bins[b].size())];
    picked[i] = true;
    chosen.push_back(i);
  }
  for (std::size_t b : empty_bins) {
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (!picked[i]) rest.push_back(i);
    }
    const std::size_t i = rest[rng.uniform_index(rest.size())];
    picked[i] = true;
    chosen[b] = i;
  }

  ExemplarSet ex;
  for (std::size_t i : chosen) {
    ex.videos.push_back(source[i]);
    ex.labels.push_back(*source[i].label);
    ex.backgrounds.push_back(extract_background(source[i]));
  }
  return ex;
}

Tensor extract_background(const VideoSample& v) {
  const auto& shape = v.frames.shape();
  if (shape.size() != 4 || shape[0] == 0) {
    throw DimensionError("extract_background: expected non-empty [L,c,h,w] frames");
  }
  const std::size_t L = shape[0];
  const std::size_t px = shape[1] * shape[2] * shape[3];
  const auto data = v.frames.data();

  std::vector<double> bg(px);
  std::vector<double> column(L);
  const std::size_t mid = (L - 1) / 2;
  for (std::size_t p = 0; p < px; ++p) {
    for (std::size_t t = 0; t < L; ++t) column[t] = data[t * px + p];
    std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid),
                     column.end());
    bg[p] = column[mid];
  }
  return Tensor::from_data({shape[1], shape[2], shape[3]}, std::move(bg));
}

Tensor mix_background(const Tensor& frames, const Tensor& bg, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) throw ContractError("mix_background: lambda must lie in [0,1]");
  const auto& fs = frames.shape();
  const auto& bs = bg.shape();
  if (fs.size() != 4 || bs.size() != 3 || fs[1] != bs[0] || fs[2] != bs[1] || fs[3] != bs[2]) {
    throw DimensionError("mix_background: frames " + shape_str(fs) +
                         " do not match background " + shape_str(bs));
  }
  const auto fd = frames.data();
  if (lambda == 0.0) {
    return Tensor::from_data(fs, std::vector<double>(fd.begin(), fd.end()));
  }
  const auto bd = bg.data();
  const std::size_t px = bs[0] * bs[1] * bs[2];
  std::vector<double> out(fd.size());
  for (std::size_t t = 0; t < fs[0]; ++t) {
    for (std::size_t p = 0; p < px; ++p) {
      const double v = (1.0 - lambda) * fd[t * px + p] + lambda * bd[p];
      out[t * px + p] = std::min(1.0, std::max(0.0, v));
    }
  }
  return Tensor::from_data(fs, std::move(out));
}

TargetPrediction predict_target(const Model& m, const VideoSample& x_t, const ExemplarSet& ex,
                                const MixConfig& mix, int l) {
  validate(mix);
  if (ex.size() == 0) throw ContractError("predict_target: empty exemplar set");
  if (l != m.cfg.l) {
    throw ContractError("predict_target: clip length " + std::to_string(l) +
                        " does not match the model (l=" + std::to_string(m.cfg.l) + ")");
  }

  TargetPrediction out;
  out.per_exemplar.reserve(ex.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < ex.size(); ++i) {
    Tensor mixed = mix_background(x_t.frames, ex.backgrounds[i], mix.lambda);
    Tensor feats_t = encode(test_clip_tile(mixed, l), m);
    Tensor feats_e = encode(test_clip_tile(ex.videos[i].frames, l), m);
    const double delta = predict_rel(feats_t, feats_e, m).item();
    const double recon = reconstruct(delta, ex.labels[i]);
    out.per_exemplar.push_back(recon);
    acc += recon;
  }
  out.prediction = acc / static_cast<double>(ex.size());
  return out;
}

}  // namespace coreda
