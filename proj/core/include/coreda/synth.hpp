#pragma once

#include <optional>
#include <string>
#include <vector>

#include "coreda/rng.hpp"
#include "coreda/tensor.hpp"

namespace coreda {

enum class Domain { source, target };

enum class BackgroundKind { horizontal_grating, checkerboard };

const char* background_kind_name(BackgroundKind k);
BackgroundKind background_kind_from_name(const std::string& name);

const char* domain_name(Domain d);
Domain domain_from_name(const std::string& name);

struct DomainConfig {
  BackgroundKind background_kind = BackgroundKind::horizontal_grating;
  int background_period = 8;
  double gain = 1.0;
  double offset = 0.0;
  double noise_sigma = 0.01;
};

// Default source/target shift used throughout the benchmark.
DomainConfig source_domain();
DomainConfig target_domain();

struct GenConfig {
  int L = 64;
  int c = 1;
  int h = 16;
  int w = 16;
  double blob_sigma = 1.5;
  double blob_amplitude = 0.5;
  double jitter_max = 3.0;
  std::uint64_t seed = 0;
};

void validate(const DomainConfig& dom);
void validate(const GenConfig& gen);

struct VideoSample {
  Tensor frames;  // [L, c, h, w], values in [0,1]
  std::optional<double> label;
  Domain domain = Domain::source;
  std::string id;
};

// Static background pattern before gain/offset; values in [0.25, 0.75].
double background_value(const DomainConfig& dom, int y, int x);

// Closed-form static frame clip(gain*background + offset, 0, 1), stored at
// the same 32-bit quantization the generator applies. Shape [c, h, w].
Tensor background_frame(const DomainConfig& dom, const GenConfig& gen);

struct RenderedVideo {
  VideoSample sample;
  std::vector<double> path_y, path_x;      // smooth circular path
  std::vector<double> center_y, center_x;  // jittered centers actually drawn
};

// A Gaussian blob (support truncated at 3 sigma) rides one revolution of a
// circular path; per-frame jitter amplitude encodes skill. Frames pass
// through f32 so that disk round-trips are exact.
RenderedVideo render_video(double skill, const DomainConfig& dom, const GenConfig& gen, Rng& rng);

VideoSample gen_video(double skill, const DomainConfig& dom, const GenConfig& gen, Rng& rng);

// Per-frame jitter amplitude for a given skill: jitter_max * (30 - skill) / 24.
double jitter_amplitude(double skill, const GenConfig& gen);

struct OracleEstimate {
  double estimate = 18.0;
  bool degenerate = false;
};

// Learning-free reference estimator: subtract the per-pixel temporal median,
// track intensity-weighted centroids, fit the path with a centered moving
// average and map the mean residual back to the skill scale.
OracleEstimate oracle_skill_estimate(const VideoSample& v, double jitter_max = 3.0);

}  // namespace coreda
