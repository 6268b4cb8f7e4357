#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "coreda/inference.hpp"
#include "coreda/metrics.hpp"
#include "coreda/model.hpp"
#include "coreda/synth.hpp"

namespace coreda {

struct EvalConfig {
  int M = 10;
  MixConfig mix;
  bool bg_mix = true;  // false evaluates on the unmixed target frames
  std::uint64_t seed = 0;
  std::vector<std::string> exclude_ids;
  int workers = 1;
};

// mode "source_only" scores each video with the absolute head directly; any
// other mode runs the exemplar-based reconstruction path. True labels come
// from `sealed_labels` when present, else from the sample itself; videos
// without labels still get predictions but are skipped by the metrics.
EvalReport evaluate_model(const Model& m, const std::string& mode,
                          const std::vector<VideoSample>& exemplar_pool,
                          const std::vector<VideoSample>& eval_set,
                          const std::map<std::string, double>& sealed_labels,
                          const EvalConfig& cfg);

}  // namespace coreda
