#include "coreda/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "coreda/errors.hpp"

namespace coreda {

const char* background_kind_name(BackgroundKind k) {
  return k == BackgroundKind::horizontal_grating ? "horizontal_grating" : "checkerboard";
}

BackgroundKind background_kind_from_name(const std::string& name) {
  if (name == "horizontal_grating") return BackgroundKind::horizontal_grating;
  if (name == "checkerboard") return BackgroundKind::checkerboard;
  throw FormatError("unknown background kind '" + name + "'");
}

const char* domain_name(Domain d) { return d == Domain::source ? "source" : "target"; }

Domain domain_from_name(const std::string& name) {
  if (name == "source") return Domain::source;
  if (name == "target") return Domain::target;
  throw FormatError("unknown domain '" + name + "'");
}

DomainConfig source_domain() {
  DomainConfig d;
  d.background_kind = BackgroundKind::horizontal_grating;
  d.background_period = 8;
  d.gain = 1.0;
  d.offset = 0.0;
  d.noise_sigma = 0.01;
  return d;
}

DomainConfig target_domain() {
  DomainConfig d;
  d.background_kind = BackgroundKind::checkerboard;
  d.background_period = 4;
  d.gain = 1.3;
  d.offset = 0.1;
  d.noise_sigma = 0.03;
  return d;
}

void validate(const DomainConfig& dom) {
  if (dom.gain <= 0.0) throw ContractError("domain config: gain must be > 0");
  if (dom.noise_sigma < 0.0) throw ContractError("domain config: noise_sigma must be >= 0");
  if (dom.background_period < 2) throw ContractError("domain config: background_period must be >= 2");
}

void validate(const GenConfig& gen) {
  if (gen.L < 2) throw ContractError("gen config: L must be >= 2");
  if (gen.c < 1) throw ContractError("gen config: c must be >= 1");
  if (gen.h < 8 || gen.w < 8) throw ContractError("gen config: h and w must be >= 8");
  if (gen.blob_sigma <= 0.0) throw ContractError("gen config: blob_sigma must be > 0");
  if (gen.jitter_max < 0.0) throw ContractError("gen config: jitter_max must be >= 0");
  if (gen.jitter_max >= std::min(gen.h, gen.w) / 4.0) {
    throw ContractError("gen config: jitter_max must be < min(h,w)/4");
  }
}

double background_value(const DomainConfig& dom, int y, int x) {
  const double p = static_cast<double>(dom.background_period);
  if (dom.background_kind == BackgroundKind::horizontal_grating) {
    return 0.5 + 0.25 * std::sin(2.0 * std::numbers::pi * static_cast<double>(y) / p);
  }
  const int cell = std::max(1, dom.background_period / 2);
  const bool on = ((y / cell) + (x / cell)) % 2 == 0;
  return on ? 0.75 : 0.25;
}

namespace {

double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

double clip01(double v) { return std::min(1.0, std::max(0.0, v)); }

}  // namespace

Tensor background_frame(const DomainConfig& dom, const GenConfig& gen) {
  Tensor f = Tensor::zeros({static_cast<std::size_t>(gen.c), static_cast<std::size_t>(gen.h),
                            static_cast<std::size_t>(gen.w)});
  auto d = f.mutable_data();
  for (int ch = 0; ch < gen.c; ++ch) {
    for (int y = 0; y < gen.h; ++y) {
      for (int x = 0; x < gen.w; ++x) {
        const double v = clip01(dom.gain * background_value(dom, y, x) + dom.offset);
        d[static_cast<std::size_t>((ch * gen.h + y) * gen.w + x)] = quantize_f32(v);
      }
    }
  }
  return f;
}

double jitter_amplitude(double skill, const GenConfig& gen) {
  return gen.jitter_max * (30.0 - skill) / 24.0;
}

RenderedVideo render_video(double skill, const DomainConfig& dom, const GenConfig& gen, Rng& rng) {
  if (skill < 6.0 || skill > 30.0) {
    throw ContractError("render_video: skill must lie in [6,30], got " + std::to_string(skill));
  }
  validate(dom);
  validate(gen);

  const std::size_t L = static_cast<std::size_t>(gen.L);
  const std::size_t c = static_cast<std::size_t>(gen.c);
  const std::size_t h = static_cast<std::size_t>(gen.h);
  const std::size_t w = static_cast<std::size_t>(gen.w);

  RenderedVideo out;
  out.sample.frames = Tensor::zeros({L, c, h, w});
  out.path_y.resize(L);
  out.path_x.resize(L);
  out.center_y.resize(L);
  out.center_x.resize(L);

  const double radius = std::min(gen.h, gen.w) / 4.0;
  const double cy0 = (gen.h - 1) / 2.0;
  const double cx0 = (gen.w - 1) / 2.0;
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double sj = jitter_amplitude(skill, gen);
  const double inv2s2 = 1.0 / (2.0 * gen.blob_sigma * gen.blob_sigma);
  // compact support: beyond 3 sigma the blob contributes nothing, so pixels
  // it never visits keep the exact closed-form background value
  const double support2 = 9.0 * gen.blob_sigma * gen.blob_sigma;

  auto data = out.sample.frames.mutable_data();
  for (std::size_t t = 0; t < L; ++t) {
    const double angle = phase + 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(L);
    const double py = cy0 + radius * std::sin(angle);
    const double px = cx0 + radius * std::cos(angle);
    const double jy = rng.uniform(-sj, sj);
    const double jx = rng.uniform(-sj, sj);
    out.path_y[t] = py;
    out.path_x[t] = px;
    out.center_y[t] = py + jy;
    out.center_x[t] = px + jx;

    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const double dy = static_cast<double>(y) - out.center_y[t];
          const double dx = static_cast<double>(x) - out.center_x[t];
          const double r2 = dy * dy + dx * dx;
          const double blob = r2 <= support2 ? gen.blob_amplitude * std::exp(-r2 * inv2s2) : 0.0;
          double v = dom.gain * (background_value(dom, static_cast<int>(y), static_cast<int>(x)) + blob) +
                     dom.offset;
          if (dom.noise_sigma > 0.0) v += rng.normal(0.0, dom.noise_sigma);
          data[((t * c + ch) * h + y) * w + x] = quantize_f32(clip01(v));
        }
      }
    }
  }

  out.sample.label = skill;
  return out;
}

VideoSample gen_video(double skill, const DomainConfig& dom, const GenConfig& gen, Rng& rng) {
  return render_video(skill, dom, gen, rng).sample;
}

OracleEstimate oracle_skill_estimate(const VideoSample& v, double jitter_max) {
  const auto& shape = v.frames.shape();
  if (shape.size() != 4) throw DimensionError("oracle_skill_estimate: expected [L,c,h,w] frames");
  const std::size_t L = shape[0];
  const std::size_t px = shape[1] * shape[2] * shape[3];
  const std::size_t h = shape[2];
  const std::size_t w = shape[3];
  const auto& data = v.frames.data();

  // Per-pixel temporal median (lower-middle element for even L).
  std::vector<double> median(px);
  std::vector<double> column(L);
  for (std::size_t p = 0; p < px; ++p) {
    for (std::size_t t = 0; t < L; ++t) column[t] = data[t * px + p];
    const std::size_t mid = (L - 1) / 2;
    std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid), column.end());
    median[p] = column[mid];
  }

  // Foreground centroids, intensity weighted.
  std::vector<double> cy, cx;
  cy.reserve(L);
  cx.reserve(L);
  for (std::size_t t = 0; t < L; ++t) {
    double mass = 0.0, my = 0.0, mx = 0.0;
    for (std::size_t p = 0; p < px; ++p) {
      const double fg = std::max(0.0, data[t * px + p] - median[p]);
      if (fg == 0.0) continue;
      const std::size_t y = (p / w) % h;
      const std::size_t x = p % w;
      mass += fg;
      my += fg * static_cast<double>(y);
      mx += fg * static_cast<double>(x);
    }
    if (mass > 0.0) {
      cy.push_back(my / mass);
      cx.push_back(mx / mass);
    }
  }

  OracleEstimate res;
  if (cy.size() < 2) {
    res.degenerate = true;
    res.estimate = 18.0;
    return res;
  }

  // Smooth path fit: centered moving average, window 5, truncated at edges.
  const std::size_t n = cy.size();
  double residual_sum = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t lo = t >= 2 ? t - 2 : 0;
    const std::size_t hi = std::min(n - 1, t + 2);
    double fy = 0.0, fx = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) {
      fy += cy[k];
      fx += cx[k];
    }
    const double inv = 1.0 / static_cast<double>(hi - lo + 1);
    fy *= inv;
    fx *= inv;
    residual_sum += std::hypot(cy[t] - fy, cx[t] - fx);
  }
  const double mean_residual = residual_sum / static_cast<double>(n);
  res.estimate = std::clamp(30.0 - 24.0 * (mean_residual / jitter_max), 6.0, 30.0);
  return res;
}

}  // namespace coreda
