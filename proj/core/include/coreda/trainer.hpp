#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coreda/losses.hpp"
#include "coreda/model.hpp"
#include "coreda/sampling.hpp"
#include "coreda/synth.hpp"

namespace coreda {

struct TrainConfig {
  int epochs = 150;
  int batch_size = 16;
  double lr_encoder = 1e-5;
  double lr_heads = 5e-5;
  LossWeights weights;
  ClipSpec clip_spec;
  EncoderConfig encoder;
  std::uint64_t seed = 1;

  bool disable_sup_rel = false;
  bool disable_sup_abs = false;
  bool disable_cons_s = false;
  bool disable_cons_t = false;
  bool disable_stopgrad = false;
  bool also_supervise_source_abs = false;

  int num_labeled_target = 10;

  // When set, one checkpoint per epoch plus a JSONL log land here.
  std::string checkpoint_dir;
};

void validate(const TrainConfig& cfg);

struct TripletBatch {
  std::vector<Tensor> source_clips, exemplar_clips, target_clips;
  std::vector<double> y_s, y_e;
  std::vector<std::string> source_ids, exemplar_ids, target_ids;
  std::size_t size() const { return source_clips.size(); }
};

// Per row: source and exemplar drawn uniformly without replacement from the
// labeled pool, target drawn uniformly. The target slot is always sampled so
// the random stream does not depend on which losses are enabled.
TripletBatch sample_triplets(const std::vector<VideoSample>& source,
                             const std::vector<VideoSample>& target, int batch_size,
                             const ClipSpec& spec, Rng& rng);

struct SemiBatch {
  std::vector<Tensor> clips;
  std::vector<double> labels;
};

struct GraphOptions {
  bool sup_rel = true, sup_abs = true, cons_s = true, cons_t = true;
  bool use_stopgrad = true;
  bool also_supervise_source_abs = false;
  // Build branches of removed terms anyway and fold them in at weight zero;
  // used by the equivalence checks, never by the training loop.
  bool keep_disabled_branches = false;
  // Replaces the target pseudo-labels with fixed constants; the finite
  // difference check of a composed step needs them frozen across rebuilds.
  const std::vector<double>* pseudo_label_override = nullptr;
};

struct StepGraph {
  LossTerms terms;
  Tensor total;
  StepLosses values;
  std::uint64_t target_encodes = 0;
};

// Builds the full loss graph for one batch in a canonical node order.
StepGraph build_step_losses(const TripletBatch& batch, const Model& m, const LossWeights& w,
                            const GraphOptions& opt, const SemiBatch* semi = nullptr);

struct EpochRecord {
  int epoch = 0;
  StepLosses mean;
  double max_decomposition_gap = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::uint64_t seed = 0;
  std::string config_json;
  std::vector<EpochRecord> epochs;
};

void write_train_log(const TrainLog& log, const std::string& path);

struct TrainResult {
  Model model;
  TrainLog log;
  std::uint64_t target_encodes = 0;
  std::uint64_t target_clip_draws = 0;
};

TrainResult train_coreda(const std::vector<VideoSample>& source,
                         const std::vector<VideoSample>& target, const TrainConfig& cfg,
                         const std::string* resume_from = nullptr);

TrainResult train_source_only(const std::vector<VideoSample>& source, const TrainConfig& cfg,
                              const std::string* resume_from = nullptr);

// labeled_targets: (id, label) pairs; ids must exist in `target` and their
// count must equal cfg.num_labeled_target. An empty pool reduces the run to
// train_coreda exactly.
TrainResult train_semisupervised(const std::vector<VideoSample>& source,
                                 const std::vector<VideoSample>& target,
                                 const std::vector<std::pair<std::string, double>>& labeled_targets,
                                 const TrainConfig& cfg, const std::string* resume_from = nullptr);

}  // namespace coreda
