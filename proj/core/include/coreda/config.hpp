#pragma once

#include <string>

#include "coreda/inference.hpp"
#include "coreda/synth.hpp"
#include "coreda/trainer.hpp"

namespace coreda {

// Every knob of a full run: data generation, the domain shift, training and
// test-time evaluation.
struct RunConfig {
  GenConfig gen;  // gen.seed is the data seed
  DomainConfig source_dom = source_domain();
  DomainConfig target_dom = target_domain();
  int n_source = 120;
  int n_target = 60;
  bool integer_labels = false;
  TrainConfig train;
  int M = 10;
  MixConfig mix;
};

// Full-size hyperparameters: K=l=12 clips, d=256, 150 epochs, batch 16,
// learning rates 1e-5 / 5e-5.
RunConfig paper_profile();

// Minutes-scale profile: shorter videos, K=l=4, d=32, 60 epochs, batch 8,
// learning rates raised to 1e-3 / 2e-3 (the full-size rates stall at this
// model size and horizon).
RunConfig desk_profile();

// Derives the encoder geometry from the generator and clip spec, then
// validates every section.
void finalize(RunConfig& cfg);

// Overlays a JSON config file on `base`. Unknown sections or keys are
// contract errors, so typos cannot silently fall back to defaults.
RunConfig load_run_config(const std::string& path, RunConfig base);

std::string run_config_json(const RunConfig& cfg);

}  // namespace coreda
