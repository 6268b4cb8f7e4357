#include "coreda/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "coreda/errors.hpp"
#include <nlohmann/json.hpp>

namespace coreda {

namespace fs = std::filesystem;
using nlohmann::json;

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ContractError("train config: epochs must be >= 1");
  if (cfg.batch_size < 2) throw ContractError("train config: batch_size must be >= 2");
  if (cfg.lr_encoder < 0.0 || cfg.lr_heads < 0.0) {
    throw ContractError("train config: learning rates must be >= 0");
  }
  if (cfg.num_labeled_target < 0) {
    throw ContractError("train config: num_labeled_target must be >= 0");
  }
  validate(cfg.weights);
  validate(cfg.clip_spec);
  validate(cfg.encoder);
  if (cfg.encoder.l != cfg.clip_spec.l) {
    throw ContractError("train config: encoder clip length " + std::to_string(cfg.encoder.l) +
                        " does not match sampling l=" + std::to_string(cfg.clip_spec.l));
  }
}

TripletBatch sample_triplets(const std::vector<VideoSample>& source,
                             const std::vector<VideoSample>& target, int batch_size,
                             const ClipSpec& spec, Rng& rng) {
  if (source.size() < 2) throw ContractError("sample_triplets: need at least 2 source videos");
  if (target.empty()) throw ContractError("sample_triplets: need at least 1 target video");
  if (batch_size < 1) throw ContractError("sample_triplets: batch_size must be >= 1");
  for (const auto& v : source) {
    if (!v.label) throw ContractError("sample_triplets: unlabeled source sample " + v.id);
  }

  TripletBatch batch;
  const std::size_t ns = source.size(), nt = target.size();
  for (int b = 0; b < batch_size; ++b) {
    const std::size_t s = rng.uniform_index(ns);
    // exemplar: uniform over the other ns-1 indices
    const std::size_t e = (s + 1 + rng.uniform_index(ns - 1)) % ns;
    const std::size_t t = rng.uniform_index(nt);
    batch.source_clips.push_back(train_clip_sample(source[s], spec, rng));
    batch.exemplar_clips.push_back(train_clip_sample(source[e], spec, rng));
    batch.target_clips.push_back(train_clip_sample(target[t], spec, rng));
    batch.y_s.push_back(*source[s].label);
    batch.y_e.push_back(*source[e].label);
    batch.source_ids.push_back(source[s].id);
    batch.exemplar_ids.push_back(source[e].id);
    batch.target_ids.push_back(target[t].id);
  }
  return batch;
}

StepGraph build_step_losses(const TripletBatch& batch, const Model& m, const LossWeights& w,
                            const GraphOptions& opt, const SemiBatch* semi) {
  const std::size_t B = batch.size();
  if (B == 0) throw ContractError("build_step_losses: empty batch");
  if (batch.exemplar_clips.size() != B || batch.target_clips.size() != B ||
      batch.y_s.size() != B || batch.y_e.size() != B) {
    throw DimensionError("build_step_losses: ragged triplet batch");
  }
  if (opt.pseudo_label_override && opt.pseudo_label_override->size() != B) {
    throw DimensionError("build_step_losses: pseudo label override length mismatch");
  }

  const bool build_sup_rel = opt.sup_rel || opt.keep_disabled_branches;
  const bool build_sup_abs = opt.sup_abs || opt.keep_disabled_branches;
  const bool build_cons_s = opt.cons_s || opt.keep_disabled_branches;
  const bool build_cons_t = opt.cons_t || opt.keep_disabled_branches;

  const bool need_rel_se = build_sup_rel || build_cons_s;
  const bool need_abs_s = build_cons_s || opt.also_supervise_source_abs;
  const bool need_abs_e = build_sup_abs || build_cons_s || build_cons_t;
  const bool need_feat_s = need_rel_se || need_abs_s;
  const bool need_feat_e = need_rel_se || need_abs_e;
  const bool need_abs_t = build_cons_t && opt.pseudo_label_override == nullptr;

  StepGraph graph;

  std::vector<Tensor> fs(B), fe(B), ft(B);
  for (std::size_t b = 0; b < B; ++b) {
    if (need_feat_s) fs[b] = encode(batch.source_clips[b], m);
    if (need_feat_e) fe[b] = encode(batch.exemplar_clips[b], m);
    if (build_cons_t) {
      ft[b] = encode(batch.target_clips[b], m);
      ++graph.target_encodes;
    }
  }

  std::vector<Tensor> rel_se(B), abs_e(B), abs_s(B), abs_t(B), recon_s(B), recon_t(B);
  for (std::size_t b = 0; b < B; ++b) {
    if (need_rel_se) rel_se[b] = predict_rel(fs[b], fe[b], m);
    if (need_abs_e) abs_e[b] = predict_abs(fe[b], m);
    if (need_abs_s) abs_s[b] = predict_abs(fs[b], m);
    if (build_cons_t) {
      Tensor rel_te = predict_rel(ft[b], fe[b], m);
      if (need_abs_t) abs_t[b] = predict_abs(ft[b], m);
      recon_t[b] = reconstruct(rel_te, abs_e[b]);
    }
    if (build_cons_s) recon_s[b] = reconstruct(rel_se[b], abs_e[b]);
  }

  if (build_sup_rel) {
    Tensor delta_hat = stack(rel_se);
    graph.terms.sup_rel =
        loss_sup_rel(delta_hat, Tensor::vector(batch.y_s), Tensor::vector(batch.y_e));
  }
  if (build_sup_abs) {
    std::vector<Tensor> preds(abs_e.begin(), abs_e.end());
    std::vector<double> targets = batch.y_e;
    if (opt.also_supervise_source_abs) {
      preds.insert(preds.end(), abs_s.begin(), abs_s.end());
      targets.insert(targets.end(), batch.y_s.begin(), batch.y_s.end());
    }
    graph.terms.sup_abs = loss_sup_abs(stack(preds), Tensor::vector(std::move(targets)));
  }
  if (build_cons_s) {
    graph.terms.cons_s = loss_cons_source(stack(recon_s), stack(abs_s));
  }
  if (build_cons_t) {
    Tensor recon = stack(recon_t);
    if (opt.pseudo_label_override) {
      graph.terms.cons_t =
          loss_cons_target(recon, Tensor::vector(*opt.pseudo_label_override), false);
    } else {
      graph.terms.cons_t = loss_cons_target(recon, stack(abs_t), opt.use_stopgrad);
    }
  }
  if (semi && !semi->clips.empty()) {
    if (semi->clips.size() != semi->labels.size()) {
      throw DimensionError("build_step_losses: ragged labeled-target batch");
    }
    std::vector<Tensor> preds;
    preds.reserve(semi->clips.size());
    for (const auto& clips : semi->clips) {
      preds.push_back(predict_abs(encode(clips, m), m));
    }
    // sum over the labeled pool divided by the batch size, not the pool mean
    graph.terms.semi =
        scale(loss_sup_abs(stack(preds), Tensor::vector(semi->labels)),
              static_cast<double>(semi->clips.size()) / static_cast<double>(B));
  }

  LossLiveness live;
  live.sup_rel = opt.sup_rel;
  live.sup_abs = opt.sup_abs;
  live.cons_s = opt.cons_s;
  live.cons_t = opt.cons_t;
  graph.total = total_loss(graph.terms, w, live);
  graph.values = read_losses(graph.terms, graph.total);
  return graph;
}

// ---- training loop ----------------------------------------------------------

namespace {

enum class TrainMode { coreda, source_only, semisup };

const char* mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::coreda: return "coreda";
    case TrainMode::source_only: return "source_only";
    case TrainMode::semisup: return "semisup";
  }
  return "?";
}

json train_config_to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr_encoder", c.lr_encoder},
              {"lr_heads", c.lr_heads},
              {"alpha", c.weights.alpha},
              {"beta", c.weights.beta},
              {"gamma", c.weights.gamma},
              {"K", c.clip_spec.K},
              {"l", c.clip_spec.l},
              {"d", c.encoder.d},
              {"hidden", c.encoder.hidden},
              {"use_temporal_diff", c.encoder.use_temporal_diff},
              {"seed", c.seed},
              {"disable_sup_rel", c.disable_sup_rel},
              {"disable_sup_abs", c.disable_sup_abs},
              {"disable_cons_s", c.disable_cons_s},
              {"disable_cons_t", c.disable_cons_t},
              {"disable_stopgrad", c.disable_stopgrad},
              {"also_supervise_source_abs", c.also_supervise_source_abs},
              {"num_labeled_target", c.num_labeled_target}};
}

void check_finite(const StepLosses& v, int epoch, int step) {
  const std::pair<const char*, double> parts[] = {
      {"sup_rel", v.sup_rel}, {"sup_abs", v.sup_abs}, {"cons_s", v.cons_s},
      {"cons_t", v.cons_t},   {"semi", v.semi},       {"total", v.total}};
  for (const auto& [name, value] : parts) {
    if (!std::isfinite(value)) {
      std::ostringstream os;
      os << "non-finite " << name << " loss (" << value << ") at epoch " << epoch << " step "
         << step;
      throw NumericError(os.str());
    }
  }
}

std::string epoch_checkpoint_path(const std::string& dir, int completed_epochs) {
  std::ostringstream os;
  os << "epoch_";
  os.width(3);
  os.fill('0');
  os << completed_epochs << ".ckpt";
  return (fs::path(dir) / os.str()).string();
}

struct LabeledPool {
  std::vector<const VideoSample*> videos;
  std::vector<double> labels;
};

TrainResult run_training(TrainMode mode, const std::vector<VideoSample>& source,
                         const std::vector<VideoSample>& target,
                         const std::vector<std::pair<std::string, double>>& labeled_targets,
                         const TrainConfig& cfg, const std::string* resume_from) {
  validate(cfg);
  if (source.empty()) throw ContractError("training: empty source dataset");
  for (const auto& v : source) {
    if (!v.label) throw ContractError("training: unlabeled source sample " + v.id);
  }
  if (mode != TrainMode::source_only) {
    if (source.size() < 2) throw ContractError("training: need at least 2 source videos");
    if (target.empty()) throw ContractError("training: empty target dataset");
  }

  GraphOptions opt;
  opt.sup_rel = !cfg.disable_sup_rel && cfg.weights.alpha > 0.0;
  opt.sup_abs = !cfg.disable_sup_abs && cfg.weights.alpha > 0.0;
  opt.cons_s = !cfg.disable_cons_s && cfg.weights.beta > 0.0;
  opt.cons_t = !cfg.disable_cons_t && cfg.weights.gamma > 0.0;
  opt.use_stopgrad = !cfg.disable_stopgrad;
  opt.also_supervise_source_abs = cfg.also_supervise_source_abs;

  LabeledPool pool;
  if (mode == TrainMode::semisup) {
    if (static_cast<int>(labeled_targets.size()) != cfg.num_labeled_target) {
      throw ContractError("training: expected " + std::to_string(cfg.num_labeled_target) +
                          " labeled target videos, got " + std::to_string(labeled_targets.size()));
    }
    for (const auto& [id, label] : labeled_targets) {
      auto it = std::find_if(target.begin(), target.end(),
                             [&](const VideoSample& v) { return v.id == id; });
      if (it == target.end()) {
        throw ContractError("training: labeled target id " + id + " is not in the target dataset");
      }
      pool.videos.push_back(&*it);
      pool.labels.push_back(label);
    }
  }

  const bool has_semi = !pool.videos.empty();
  if (mode != TrainMode::source_only && !opt.sup_rel && !opt.sup_abs && !opt.cons_s &&
      !opt.cons_t && !has_semi) {
    throw ContractError("training: every loss term is disabled");
  }

  TrainResult res;
  AdamState enc_state, head_state;
  int start_epoch = 0;
  if (resume_from) {
    LoadedCheckpoint ck = load_checkpoint(*resume_from, &cfg.encoder);
    if (ck.meta.mode != mode_name(mode)) {
      throw ContractError("training: checkpoint mode '" + ck.meta.mode +
                          "' does not match requested mode '" + mode_name(mode) + "'");
    }
    if (!ck.encoder_state || !ck.heads_state) {
      throw ContractError("training: checkpoint " + *resume_from + " carries no optimizer state");
    }
    res.model = std::move(ck.model);
    enc_state = std::move(*ck.encoder_state);
    head_state = std::move(*ck.heads_state);
    start_epoch = ck.meta.epoch;
    if (start_epoch >= cfg.epochs) {
      throw ContractError("training: checkpoint already covers " + std::to_string(start_epoch) +
                          " epochs, nothing left to run");
    }
  } else {
    res.model = init_params(cfg.encoder, cfg.seed);
  }

  const auto enc_params = res.model.encoder_params();
  const auto head_params = res.model.head_params();
  const auto all_params = res.model.all_params();

  const std::size_t per_epoch_pool =
      mode == TrainMode::source_only ? source.size() : std::max(source.size(), target.size());
  const int steps =
      static_cast<int>((per_epoch_pool + cfg.batch_size - 1) / static_cast<std::size_t>(cfg.batch_size));

  res.log.seed = cfg.seed;
  res.log.config_json = train_config_to_json(cfg).dump();

  CheckpointMeta meta;
  meta.mode = mode_name(mode);
  meta.extra_json = res.log.config_json;
  if (!cfg.checkpoint_dir.empty()) fs::create_directories(cfg.checkpoint_dir);

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    const auto t0 = std::chrono::steady_clock::now();
    StepLosses sums;
    double max_gap = 0.0;

    for (int step = 0; step < steps; ++step) {
      StepGraph graph;
      SemiBatch semi;
      if (mode == TrainMode::source_only) {
        std::vector<Tensor> preds;
        preds.reserve(cfg.batch_size);
        std::vector<double> labels;
        labels.reserve(cfg.batch_size);
        for (int b = 0; b < cfg.batch_size; ++b) {
          const std::size_t i = rng.uniform_index(source.size());
          Tensor clips = train_clip_sample(source[i], cfg.clip_spec, rng);
          labels.push_back(*source[i].label);
          preds.push_back(predict_abs(encode(clips, res.model), res.model));
        }
        graph.terms.sup_abs = loss_sup_abs(stack(preds), Tensor::vector(std::move(labels)));
        graph.total = total_loss(graph.terms, cfg.weights);
        graph.values = read_losses(graph.terms, graph.total);
      } else {
        TripletBatch batch =
            sample_triplets(source, target, cfg.batch_size, cfg.clip_spec, rng);
        res.target_clip_draws += batch.size();
        if (has_semi) {
          // Every labeled video contributes a fresh clip set each step; the
          // term is summed over the pool and normalized by the batch size,
          // the same 1/B the triplet losses carry.
          for (std::size_t i = 0; i < pool.videos.size(); ++i) {
            semi.clips.push_back(train_clip_sample(*pool.videos[i], cfg.clip_spec, rng));
            semi.labels.push_back(pool.labels[i]);
          }
        }
        graph = build_step_losses(batch, res.model, cfg.weights, opt, has_semi ? &semi : nullptr);
        res.target_encodes += graph.target_encodes;
      }

      check_finite(graph.values, epoch, step);
      zero_grads(all_params);
      backward(graph.total);
      adam_step(enc_params, enc_state, cfg.lr_encoder);
      adam_step(head_params, head_state, cfg.lr_heads);

      sums.sup_rel += graph.values.sup_rel;
      sums.sup_abs += graph.values.sup_abs;
      sums.cons_s += graph.values.cons_s;
      sums.cons_t += graph.values.cons_t;
      sums.semi += graph.values.semi;
      sums.total += graph.values.total;
      max_gap = std::max(max_gap, decomposition_gap(graph.values, cfg.weights));
    }

    EpochRecord rec;
    rec.epoch = epoch;
    const double inv = 1.0 / static_cast<double>(steps);
    rec.mean.sup_rel = sums.sup_rel * inv;
    rec.mean.sup_abs = sums.sup_abs * inv;
    rec.mean.cons_s = sums.cons_s * inv;
    rec.mean.cons_t = sums.cons_t * inv;
    rec.mean.semi = sums.semi * inv;
    rec.mean.total = sums.total * inv;
    rec.max_decomposition_gap = max_gap;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.log.epochs.push_back(rec);

    if (!cfg.checkpoint_dir.empty()) {
      meta.epoch = epoch + 1;
      save_checkpoint(res.model, epoch_checkpoint_path(cfg.checkpoint_dir, epoch + 1), meta,
                      &enc_state, &head_state);
      write_train_log(res.log, (fs::path(cfg.checkpoint_dir) / "train_log.jsonl").string());
    }
  }

  if (!cfg.checkpoint_dir.empty()) {
    meta.epoch = cfg.epochs;
    save_checkpoint(res.model, (fs::path(cfg.checkpoint_dir) / "final.ckpt").string(), meta,
                    &enc_state, &head_state);
  }
  return res;
}

}  // namespace

void write_train_log(const TrainLog& log, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  json head;
  head["seed"] = log.seed;
  head["config"] = json::parse(log.config_json);
  f << head.dump() << '\n';
  for (const auto& rec : log.epochs) {
    json j;
    j["epoch"] = rec.epoch;
    j["sup_rel"] = rec.mean.sup_rel;
    j["sup_abs"] = rec.mean.sup_abs;
    j["cons_s"] = rec.mean.cons_s;
    j["cons_t"] = rec.mean.cons_t;
    j["semi"] = rec.mean.semi;
    j["total"] = rec.mean.total;
    j["decomp_gap"] = rec.max_decomposition_gap;
    j["seconds"] = rec.seconds;
    f << j.dump() << '\n';
  }
  if (!f) throw IoError("failed writing " + path);
}

TrainResult train_coreda(const std::vector<VideoSample>& source,
                         const std::vector<VideoSample>& target, const TrainConfig& cfg,
                         const std::string* resume_from) {
  return run_training(TrainMode::coreda, source, target, {}, cfg, resume_from);
}

TrainResult train_source_only(const std::vector<VideoSample>& source, const TrainConfig& cfg,
                              const std::string* resume_from) {
  return run_training(TrainMode::source_only, source, {}, {}, cfg, resume_from);
}

TrainResult train_semisupervised(const std::vector<VideoSample>& source,
                                 const std::vector<VideoSample>& target,
                                 const std::vector<std::pair<std::string, double>>& labeled_targets,
                                 const TrainConfig& cfg, const std::string* resume_from) {
  return run_training(TrainMode::semisup, source, target, labeled_targets, cfg, resume_from);
}

}  // namespace coreda
