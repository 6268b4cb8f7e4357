#include "coreda/evaluate.hpp"

#include <algorithm>
#include <exception>
#include <set>
#include <thread>

#include "coreda/errors.hpp"
#include "coreda/sampling.hpp"

namespace coreda {

EvalReport evaluate_model(const Model& m, const std::string& mode,
                          const std::vector<VideoSample>& exemplar_pool,
                          const std::vector<VideoSample>& eval_set,
                          const std::map<std::string, double>& sealed_labels,
                          const EvalConfig& cfg) {
  if (cfg.workers < 1) throw ContractError("evaluate: workers must be >= 1");
  const bool direct_abs = mode == "source_only";

  ExemplarSet ex;
  MixConfig mix = cfg.mix;
  if (!cfg.bg_mix) mix.lambda = 0.0;
  if (!direct_abs) {
    Rng rng(cfg.seed);
    ex = select_exemplars(exemplar_pool, cfg.M, rng);
  }

  const std::set<std::string> excluded(cfg.exclude_ids.begin(), cfg.exclude_ids.end());
  std::vector<const VideoSample*> videos;
  for (const auto& v : eval_set) {
    if (!excluded.count(v.id)) videos.push_back(&v);
  }

  std::vector<EvalRow> rows(videos.size());
  auto predict_one = [&](std::size_t i) {
    const VideoSample& v = *videos[i];
    EvalRow row;
    row.id = v.id;
    auto it = sealed_labels.find(v.id);
    if (it != sealed_labels.end()) {
      row.true_label = it->second;
    } else if (v.label) {
      row.true_label = *v.label;
    }
    if (direct_abs) {
      row.prediction = predict_abs(encode(test_clip_tile(v, m.cfg.l), m), m).item();
    } else {
      TargetPrediction p = predict_target(m, v, ex, mix, m.cfg.l);
      row.prediction = p.prediction;
      row.per_exemplar = std::move(p.per_exemplar);
    }
    rows[i] = std::move(row);
  };

  const int workers = std::min<int>(cfg.workers, static_cast<int>(videos.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < videos.size(); ++i) predict_one(i);
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) {
      threads.emplace_back([&, t] {
        try {
          for (std::size_t i = static_cast<std::size_t>(t); i < videos.size();
               i += static_cast<std::size_t>(workers)) {
            predict_one(i);
          }
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
    }
    for (auto& th : threads) th.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  return make_report(std::move(rows));
}

}  // namespace coreda
