#include "coreda/config.hpp"

#include <fstream>
#include <initializer_list>
#include <string>

#include "coreda/errors.hpp"
#include <nlohmann/json.hpp>

namespace coreda {

using nlohmann::json;

RunConfig paper_profile() {
  RunConfig cfg;
  cfg.gen.L = 144;
  cfg.gen.seed = 42;
  cfg.train.epochs = 150;
  cfg.train.batch_size = 16;
  cfg.train.lr_encoder = 1e-5;
  cfg.train.lr_heads = 5e-5;
  cfg.train.clip_spec = {12, 12};
  cfg.train.encoder.d = 256;
  cfg.train.encoder.hidden = 64;
  cfg.train.seed = 1;
  finalize(cfg);
  return cfg;
}

RunConfig desk_profile() {
  RunConfig cfg;
  cfg.gen.L = 64;
  cfg.gen.seed = 42;
  cfg.train.epochs = 60;
  cfg.train.batch_size = 8;
  cfg.train.lr_encoder = 1e-3;
  cfg.train.lr_heads = 2e-3;
  cfg.train.clip_spec = {4, 4};
  cfg.train.encoder.d = 32;
  cfg.train.encoder.hidden = 64;
  cfg.train.seed = 1;
  finalize(cfg);
  return cfg;
}

void finalize(RunConfig& cfg) {
  cfg.train.encoder.c = cfg.gen.c;
  cfg.train.encoder.h = cfg.gen.h;
  cfg.train.encoder.w = cfg.gen.w;
  cfg.train.encoder.l = cfg.train.clip_spec.l;

  validate(cfg.gen);
  validate(cfg.source_dom);
  validate(cfg.target_dom);
  validate(cfg.train);
  validate(cfg.mix);
  if (cfg.n_source < 2) throw ContractError("run config: n_source must be >= 2");
  if (cfg.n_target < 1) throw ContractError("run config: n_target must be >= 1");
  if (cfg.M < 1) throw ContractError("run config: M must be >= 1");
  if (cfg.M > cfg.n_source) throw ContractError("run config: M cannot exceed n_source");
  if (cfg.train.num_labeled_target > cfg.n_target) {
    throw ContractError("run config: num_labeled_target cannot exceed n_target");
  }
  if (cfg.gen.L / cfg.train.clip_spec.K < cfg.train.clip_spec.l) {
    throw ContractError("run config: floor(L/K) < l, clips cannot be sampled");
  }
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object()) throw ContractError("config: section '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ContractError("config: unknown key '" + key + "' in section '" + where + "'");
  }
}

template <typename T>
void maybe(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

void overlay_domain(const json& j, DomainConfig& dom, const std::string& where) {
  check_keys(j, {"background_kind", "background_period", "gain", "offset", "noise_sigma"}, where);
  if (j.contains("background_kind")) {
    dom.background_kind = background_kind_from_name(j.at("background_kind").get<std::string>());
  }
  maybe(j, "background_period", dom.background_period);
  maybe(j, "gain", dom.gain);
  maybe(j, "offset", dom.offset);
  maybe(j, "noise_sigma", dom.noise_sigma);
}

}  // namespace

RunConfig load_run_config(const std::string& path, RunConfig base) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ContractError("config parse error in " + path + ": " + e.what());
  }

  try {
    check_keys(j, {"gen", "source_domain", "target_domain", "data", "clip", "encoder", "train",
                   "eval"},
               "<root>");
    if (j.contains("gen")) {
      const auto& g = j.at("gen");
      check_keys(g, {"L", "c", "h", "w", "blob_sigma", "blob_amplitude", "jitter_max", "seed"},
                 "gen");
      maybe(g, "L", base.gen.L);
      maybe(g, "c", base.gen.c);
      maybe(g, "h", base.gen.h);
      maybe(g, "w", base.gen.w);
      maybe(g, "blob_sigma", base.gen.blob_sigma);
      maybe(g, "blob_amplitude", base.gen.blob_amplitude);
      maybe(g, "jitter_max", base.gen.jitter_max);
      maybe(g, "seed", base.gen.seed);
    }
    if (j.contains("source_domain")) overlay_domain(j.at("source_domain"), base.source_dom, "source_domain");
    if (j.contains("target_domain")) overlay_domain(j.at("target_domain"), base.target_dom, "target_domain");
    if (j.contains("data")) {
      const auto& d = j.at("data");
      check_keys(d, {"n_source", "n_target", "integer_labels"}, "data");
      maybe(d, "n_source", base.n_source);
      maybe(d, "n_target", base.n_target);
      maybe(d, "integer_labels", base.integer_labels);
    }
    if (j.contains("clip")) {
      const auto& c = j.at("clip");
      check_keys(c, {"K", "l"}, "clip");
      maybe(c, "K", base.train.clip_spec.K);
      maybe(c, "l", base.train.clip_spec.l);
    }
    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      check_keys(e, {"d", "hidden", "use_temporal_diff"}, "encoder");
      maybe(e, "d", base.train.encoder.d);
      maybe(e, "hidden", base.train.encoder.hidden);
      maybe(e, "use_temporal_diff", base.train.encoder.use_temporal_diff);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      check_keys(t,
                 {"epochs", "batch_size", "lr_encoder", "lr_heads", "alpha", "beta", "gamma",
                  "seed", "num_labeled_target"},
                 "train");
      maybe(t, "epochs", base.train.epochs);
      maybe(t, "batch_size", base.train.batch_size);
      maybe(t, "lr_encoder", base.train.lr_encoder);
      maybe(t, "lr_heads", base.train.lr_heads);
      maybe(t, "alpha", base.train.weights.alpha);
      maybe(t, "beta", base.train.weights.beta);
      maybe(t, "gamma", base.train.weights.gamma);
      maybe(t, "seed", base.train.seed);
      maybe(t, "num_labeled_target", base.train.num_labeled_target);
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      check_keys(e, {"M", "lambda"}, "eval");
      maybe(e, "M", base.M);
      maybe(e, "lambda", base.mix.lambda);
    }
  } catch (const json::exception& e) {
    throw ContractError("config field error in " + path + ": " + e.what());
  }

  finalize(base);
  return base;
}

std::string run_config_json(const RunConfig& cfg) {
  json j;
  j["gen"] = {{"L", cfg.gen.L},
              {"c", cfg.gen.c},
              {"h", cfg.gen.h},
              {"w", cfg.gen.w},
              {"blob_sigma", cfg.gen.blob_sigma},
              {"blob_amplitude", cfg.gen.blob_amplitude},
              {"jitter_max", cfg.gen.jitter_max},
              {"seed", cfg.gen.seed}};
  auto dom = [](const DomainConfig& d) {
    return json{{"background_kind", background_kind_name(d.background_kind)},
                {"background_period", d.background_period},
                {"gain", d.gain},
                {"offset", d.offset},
                {"noise_sigma", d.noise_sigma}};
  };
  j["source_domain"] = dom(cfg.source_dom);
  j["target_domain"] = dom(cfg.target_dom);
  j["data"] = {{"n_source", cfg.n_source},
               {"n_target", cfg.n_target},
               {"integer_labels", cfg.integer_labels}};
  j["clip"] = {{"K", cfg.train.clip_spec.K}, {"l", cfg.train.clip_spec.l}};
  j["encoder"] = {{"d", cfg.train.encoder.d},
                  {"hidden", cfg.train.encoder.hidden},
                  {"use_temporal_diff", cfg.train.encoder.use_temporal_diff}};
  j["train"] = {{"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"lr_encoder", cfg.train.lr_encoder},
                {"lr_heads", cfg.train.lr_heads},
                {"alpha", cfg.train.weights.alpha},
                {"beta", cfg.train.weights.beta},
                {"gamma", cfg.train.weights.gamma},
                {"seed", cfg.train.seed},
                {"num_labeled_target", cfg.train.num_labeled_target}};
  j["eval"] = {{"M", cfg.M}, {"lambda", cfg.mix.lambda}};
  return j.dump(2);
}

}  // namespace coreda
