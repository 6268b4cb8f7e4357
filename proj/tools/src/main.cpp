#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "coreda/config.hpp"
#include "coreda/dataset.hpp"
#include "coreda/errors.hpp"
#include "coreda/evaluate.hpp"
#include "coreda/gradcheck.hpp"
#include "coreda/model.hpp"
#include "coreda/trainer.hpp"

namespace fs = std::filesystem;
using namespace coreda;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

RunConfig resolve_config(const std::string& profile, const std::string& config_path) {
  RunConfig base = profile == "paper" ? paper_profile() : desk_profile();
  if (!config_path.empty()) base = load_run_config(config_path, base);
  return base;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

Dataset load_split(const std::string& data_dir, const std::string& stem) {
  return load_dataset(join_path(data_dir, stem + ".manifest.json"));
}

int cmd_gen(RunConfig run, const std::string& out_dir) {
  finalize(run);
  fs::create_directories(out_dir);

  auto source = generate_dataset(run.n_source, true, Domain::source, run.source_dom, run.gen,
                                 mix_seed(run.gen.seed, 1), run.integer_labels);
  auto target = generate_dataset(run.n_target, false, Domain::target, run.target_dom, run.gen,
                                 mix_seed(run.gen.seed, 2), run.integer_labels);

  const auto src_manifest = save_dataset(source.dataset, out_dir, "source");
  const auto tgt_manifest = save_dataset(target.dataset, out_dir, "target");
  const auto sealed = write_sealed_labels(target.true_labels, out_dir, "target");

  std::ofstream cfg_out(join_path(out_dir, "config.json"));
  cfg_out << run_config_json(run) << "\n";

  std::cout << "wrote " << run.n_source << " source samples: " << src_manifest << "\n"
            << "wrote " << run.n_target << " target samples: " << tgt_manifest << "\n"
            << "sealed target labels: " << sealed << "\n";
  return kExitOk;
}

std::vector<std::pair<std::string, double>> pick_labeled_targets(
    const std::vector<VideoSample>& target, const std::map<std::string, double>& sealed, int n) {
  std::vector<std::string> ids;
  ids.reserve(target.size());
  for (const auto& v : target) ids.push_back(v.id);
  std::sort(ids.begin(), ids.end());
  if (static_cast<int>(ids.size()) < n) {
    throw ContractError("not enough target videos for " + std::to_string(n) + " labels");
  }
  std::vector<std::pair<std::string, double>> out;
  for (int i = 0; i < n; ++i) {
    const auto it = sealed.find(ids[i]);
    if (it == sealed.end()) throw FormatError("sealed labels missing id " + ids[i]);
    out.emplace_back(ids[i], it->second);
  }
  return out;
}

int cmd_train(RunConfig run, const std::string& mode, const std::string& data_dir,
              const std::string& out_dir, const std::string& resume) {
  Dataset source = load_split(data_dir, "source");
  run.gen = source.manifest.gen;
  run.n_source = static_cast<int>(source.samples.size());

  std::optional<Dataset> target;
  if (mode != "source-only") {
    target = load_split(data_dir, "target");
    run.n_target = static_cast<int>(target->samples.size());
  }

  finalize(run);
  TrainConfig cfg = run.train;
  fs::create_directories(out_dir);
  cfg.checkpoint_dir = out_dir;

  const std::string* resume_from = resume.empty() ? nullptr : &resume;
  TrainResult result;
  if (mode == "coreda") {
    result = train_coreda(source.samples, target->samples, cfg, resume_from);
  } else if (mode == "source-only") {
    result = train_source_only(source.samples, cfg, resume_from);
  } else {
    const auto sealed = load_sealed_labels(join_path(data_dir, "target.labels.sealed.json"));
    const auto labeled = pick_labeled_targets(target->samples, sealed, cfg.num_labeled_target);
    result = train_semisupervised(source.samples, target->samples, labeled, cfg, resume_from);
  }

  const auto& last = result.log.epochs.back();
  std::cout << std::setprecision(6) << "trained " << mode << " for "
            << result.log.epochs.size() << " epochs (seed " << cfg.seed << ")\n"
            << "final losses: total " << last.mean.total << " sup_rel " << last.mean.sup_rel
            << " sup_abs " << last.mean.sup_abs << " cons_s " << last.mean.cons_s << " cons_t "
            << last.mean.cons_t << " semi " << last.mean.semi << "\n"
            << "checkpoint: " << join_path(out_dir, "final.ckpt") << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir,
             const std::string& out_dir, const EvalConfig& ecfg) {
  Dataset source = load_split(data_dir, "source");
  Dataset target = load_split(data_dir, "target");
  const auto sealed = load_sealed_labels(join_path(data_dir, "target.labels.sealed.json"));

  LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
  const auto& gen = target.manifest.gen;
  if (ckpt.model.cfg.c != gen.c || ckpt.model.cfg.h != gen.h || ckpt.model.cfg.w != gen.w) {
    throw ContractError("checkpoint geometry does not match the dataset");
  }

  EvalReport report =
      evaluate_model(ckpt.model, ckpt.meta.mode, source.samples, target.samples, sealed, ecfg);

  fs::create_directories(out_dir);
  const auto report_path = join_path(out_dir, "report.json");
  const auto rows_path = join_path(out_dir, "rows.csv");
  write_report(report, report_path, rows_path);

  std::cout << std::setprecision(6) << "evaluated " << report.n << " labeled videos ("
            << ckpt.meta.mode << " checkpoint, epoch " << ckpt.meta.epoch << ")\n"
            << "scc " << report.scc.rho << (report.scc.degenerate ? " (degenerate)" : "")
            << "  mae " << report.mae << "  rmse " << report.rmse << "  r2 " << report.r2.r2
            << (report.r2.degenerate ? " (degenerate)" : "") << "\n"
            << "report: " << report_path << "\n";
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed) {
  const GradCheckReport report = run_gradcheck_suite(seed);
  std::cout << std::left << std::setw(16) << "case" << std::setw(14) << "max_rel_err"
            << std::setw(8) << "coords" << "status\n";
  for (const auto& r : report.results) {
    std::cout << std::left << std::setw(16) << r.name << std::setw(14) << std::scientific
              << std::setprecision(3) << r.max_rel_err << std::setw(8) << r.coords_checked
              << (r.pass ? "pass" : "FAIL") << "\n"
              << std::defaultfloat;
  }
  std::cout << "gradient suite: " << (report.all_pass ? "PASS" : "FAIL") << " (h=" << report.h
            << ", tol=" << report.tol << ")\n";
  return report.all_pass ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contrastive-regression domain adaptation on synthetic skill videos"};
  app.require_subcommand(1);

  std::string profile = "desk", config_path;

  // gen
  auto* gen = app.add_subcommand("gen", "generate the source/target benchmark datasets");
  std::string gen_out;
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--profile", profile, "hyperparameter profile")
      ->check(CLI::IsMember({"desk", "paper"}));
  gen->add_option("--config", config_path, "JSON config overlay");
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "data seed");

  // train
  auto* train = app.add_subcommand("train", "train a model on generated data");
  std::string train_data, train_out, train_mode = "coreda", train_resume;
  std::uint64_t train_seed = 0;
  int train_epochs = 0, num_labeled = -1;
  bool no_sup_rel = false, no_sup_abs = false, no_cons_s = false, no_cons_t = false;
  bool no_stopgrad = false, sup_source_abs = false;
  train->add_option("--data", train_data, "directory written by gen")->required();
  train->add_option("--out", train_out, "checkpoint/log directory")->required();
  train->add_option("--mode", train_mode, "training variant")
      ->check(CLI::IsMember({"coreda", "source-only", "semi-sup"}));
  train->add_option("--profile", profile, "hyperparameter profile")
      ->check(CLI::IsMember({"desk", "paper"}));
  train->add_option("--config", config_path, "JSON config overlay");
  auto* train_seed_opt = train->add_option("--seed", train_seed, "training seed");
  auto* train_epochs_opt = train->add_option("--epochs", train_epochs, "epoch count override");
  train->add_option("--num-labeled-target", num_labeled, "labeled target pool for semi-sup");
  train->add_option("--resume", train_resume, "checkpoint to resume from");
  train->add_flag("--no-sup-rel", no_sup_rel, "drop the relative supervision term");
  train->add_flag("--no-sup-abs", no_sup_abs, "drop the absolute supervision term");
  train->add_flag("--no-cons-s", no_cons_s, "drop the source consistency term");
  train->add_flag("--no-cons-t", no_cons_t, "drop the target consistency term");
  train->add_flag("--no-stopgrad", no_stopgrad, "let gradients flow into pseudo-labels");
  train->add_flag("--sup-source-abs", sup_source_abs, "supervise the source absolute score too");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the target split");
  std::string eval_ckpt, eval_data, eval_out;
  EvalConfig ecfg;
  bool no_bg_mix = false;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "directory written by gen")->required();
  eval->add_option("--out", eval_out, "report directory")->required();
  eval->add_option("--M", ecfg.M, "number of exemplars");
  eval->add_option("--lambda", ecfg.mix.lambda, "background mixing weight");
  eval->add_option("--seed", ecfg.seed, "exemplar selection seed");
  eval->add_option("--workers", ecfg.workers, "parallel evaluation workers");
  eval->add_option("--exclude-ids", ecfg.exclude_ids, "target ids to leave out of the metrics")
      ->delimiter(',');
  eval->add_flag("--no-bg-mix", no_bg_mix, "evaluate without background mixing");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every op");
  std::uint64_t gc_seed = 0;
  gradcheck->add_option("--seed", gc_seed, "input seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      RunConfig run = resolve_config(profile, config_path);
      if (gen_seed_opt->count() > 0) run.gen.seed = gen_seed;
      return cmd_gen(run, gen_out);
    }
    if (train->parsed()) {
      RunConfig run = resolve_config(profile, config_path);
      if (train_seed_opt->count() > 0) run.train.seed = train_seed;
      if (train_epochs_opt->count() > 0) run.train.epochs = train_epochs;
      if (num_labeled >= 0) run.train.num_labeled_target = num_labeled;
      run.train.disable_sup_rel = no_sup_rel;
      run.train.disable_sup_abs = no_sup_abs;
      run.train.disable_cons_s = no_cons_s;
      run.train.disable_cons_t = no_cons_t;
      run.train.disable_stopgrad = no_stopgrad;
      run.train.also_supervise_source_abs = sup_source_abs;
      return cmd_train(run, train_mode, train_data, train_out, train_resume);
    }
    if (eval->parsed()) {
      ecfg.bg_mix = !no_bg_mix;
      return cmd_eval(eval_ckpt, eval_data, eval_out, ecfg);
    }
    return cmd_gradcheck(gc_seed);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
