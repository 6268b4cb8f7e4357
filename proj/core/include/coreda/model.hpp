#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coreda/adam.hpp"
#include "coreda/tensor.hpp"

namespace coreda {

struct EncoderConfig {
  int d = 256;
  int hidden = 64;
  bool use_temporal_diff = true;
  // frame geometry and clip length the network is sized for
  int c = 1;
  int h = 16;
  int w = 16;
  int l = 12;
};

void validate(const EncoderConfig& cfg);

bool operator==(const EncoderConfig& a, const EncoderConfig& b);

// Flattened per-frame input width, doubled when temporal differences ride along.
int encoder_input_width(const EncoderConfig& cfg);

struct CallCounters {
  std::atomic<std::uint64_t> encode{0};
  std::atomic<std::uint64_t> abs_head{0};
  std::atomic<std::uint64_t> rel_head{0};
  void reset() { encode = abs_head = rel_head = 0; }
};

// Shared encoder plus the absolute and relative regression heads. Copies
// alias the same parameter tensors and the same call counters.
struct Model {
  EncoderConfig cfg;

  Tensor enc_w1, enc_b1, enc_w2, enc_b2;
  Tensor abs_w1, abs_b1, abs_w2, abs_b2, abs_w3, abs_b3;
  Tensor rel_w1, rel_b1, rel_w2, rel_b2, rel_w3, rel_b3;

  std::shared_ptr<CallCounters> counters = std::make_shared<CallCounters>();

  std::vector<Tensor> encoder_params() const;
  std::vector<Tensor> head_params() const;
  std::vector<Tensor> all_params() const;
  std::vector<std::pair<std::string, Tensor>> named_params() const;
};

Model init_params(const EncoderConfig& cfg, std::uint64_t seed);

// clips: [(K*l), c, h, w] plain data (no grad). Returns [K, d]: per clip,
// frames (with optional forward temporal differences, last diff zero) pass a
// two-layer MLP and are averaged.
Tensor encode(const Tensor& clips, const Model& m);

// feats: [K, d] -> scalar score. GAP over clips, then the 3-layer head.
Tensor predict_abs(const Tensor& feats, const Model& m);

// Score difference y_i - y_j from the pooled, concatenated pair.
Tensor predict_rel(const Tensor& feats_i, const Tensor& feats_j, const Model& m);

Tensor reconstruct(const Tensor& delta, const Tensor& anchor);
double reconstruct(double delta, double anchor);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::string mode = "coreda";  // coreda | source_only | semisup
  int epoch = 0;
  std::string extra_json = "{}";
};

void save_checkpoint(const Model& m, const std::string& path, const CheckpointMeta& meta,
                     const AdamState* encoder_state = nullptr,
                     const AdamState* heads_state = nullptr);

struct LoadedCheckpoint {
  Model model;
  CheckpointMeta meta;
  std::optional<AdamState> encoder_state;
  std::optional<AdamState> heads_state;
};

// `expect`, when given, must agree with the stored config (guards evaluating
// or resuming with the wrong architecture).
LoadedCheckpoint load_checkpoint(const std::string& path, const EncoderConfig* expect = nullptr);

}  // namespace coreda
