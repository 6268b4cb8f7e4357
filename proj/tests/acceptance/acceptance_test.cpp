// End-to-end acceptance suite. Each criterion prints exactly one PASS/FAIL
// line; the process exits nonzero if any criterion fails. Heavy training runs
// are shared between criteria, so the whole suite stays inside the runtime
// budgets it asserts.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "coreda/config.hpp"
#include "coreda/dataset.hpp"
#include "coreda/evaluate.hpp"
#include "coreda/gradcheck.hpp"
#include "coreda/inference.hpp"
#include "coreda/losses.hpp"
#include "coreda/metrics.hpp"
#include "coreda/model.hpp"
#include "coreda/sampling.hpp"
#include "coreda/synth.hpp"
#include "coreda/trainer.hpp"

using namespace coreda;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

// Pinned tolerances and budgets. The SCC thresholds are benchmark properties
// confirmed on the reference run and frozen here as regression floors.
constexpr double kGradTol = 1e-5;
constexpr double kExactTol = 1e-12;
constexpr double kMinAdaptGap = 0.05;
constexpr double kMinCorScc = 0.3;
constexpr double kOracleMinScc = 0.9;
constexpr double kGradBudgetSec = 60.0;
constexpr double kBenchBudgetSec = 900.0;
constexpr std::uint64_t kDataSeed = 42;
constexpr std::uint64_t kEvalSeed = 7;
const std::vector<std::uint64_t> kTrainSeeds{1, 2, 3};

struct Outcome {
  bool pass = false;
  std::string detail;
};

double elapsed(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

// ---- shared fixtures --------------------------------------------------------

GenConfig small_gen() {
  GenConfig g;
  g.L = 8;
  g.h = 8;
  g.w = 8;
  g.jitter_max = 1.5;
  return g;
}

TrainConfig small_train(int epochs, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 2;
  cfg.lr_encoder = 1e-3;
  cfg.lr_heads = 2e-3;
  cfg.clip_spec = {2, 2};
  cfg.encoder.d = 6;
  cfg.encoder.hidden = 8;
  cfg.encoder.c = 1;
  cfg.encoder.h = 8;
  cfg.encoder.w = 8;
  cfg.encoder.l = 2;
  cfg.seed = seed;
  return cfg;
}

struct SmallData {
  std::vector<VideoSample> source, target;
};

SmallData small_data(std::uint64_t seed) {
  SmallData d;
  Rng rng(seed);
  int i = 0;
  for (double s : {8.0, 13.0, 19.0, 24.0, 28.0}) {
    VideoSample v = gen_video(s, source_domain(), small_gen(), rng);
    v.id = "s" + std::to_string(i++);
    d.source.push_back(std::move(v));
  }
  i = 0;
  for (double s : {11.0, 17.0, 23.0}) {
    VideoSample v = gen_video(s, target_domain(), small_gen(), rng);
    v.id = "t" + std::to_string(i++);
    v.label.reset();
    d.target.push_back(std::move(v));
  }
  return d;
}

bool models_equal(const Model& a, const Model& b) {
  const auto pa = a.named_params();
  const auto pb = b.named_params();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (std::size_t j = 0; j < pa[i].second.size(); ++j) {
      if (pa[i].second.data()[j] != pb[i].second.data()[j]) return false;
    }
  }
  return true;
}

// ---- criterion 1: gradient suite ---------------------------------------------

Outcome criterion_gradients() {
  const auto t0 = clock_type::now();
  const GradCheckReport rep = run_gradcheck_suite(kDataSeed);
  const double secs = elapsed(t0);
  double worst = 0.0;
  for (const auto& r : rep.results) worst = std::max(worst, r.max_rel_err);
  Outcome out;
  out.pass = rep.all_pass && secs < kGradBudgetSec;
  out.detail = std::to_string(rep.results.size()) + " cases, max_rel_err=" + fmt(worst) +
               " (tol " + fmt(rep.tol) + "), " + fmt(secs) + "s";
  return out;
}

// ---- criterion 2: stop-gradient semantics ------------------------------------

Outcome criterion_stopgrad() {
  const SmallData d = small_data(90);
  double worst = 0.0;
  const LossWeights w{0.0, 0.0, 1.0};
  GraphOptions opt;
  opt.sup_rel = opt.sup_abs = opt.cons_s = false;

  for (int inst = 0; inst < 20; ++inst) {
    const Model m = init_params(small_train(1, 0).encoder, 100 + inst);
    Rng rng(200 + inst);
    const TripletBatch batch = sample_triplets(d.source, d.target, 2, ClipSpec{2, 2}, rng);

    // pseudo-labels exactly as the stopgrad branch would produce them
    std::vector<double> pseudo;
    for (const auto& clips : batch.target_clips) {
      pseudo.push_back(predict_abs(encode(clips, m), m).item());
    }

    const auto params = m.all_params();
    zero_grads(params);
    backward(build_step_losses(batch, m, w, opt).total);
    std::vector<std::vector<double>> grads_stop;
    for (const auto& p : params) grads_stop.emplace_back(p.grad().begin(), p.grad().end());

    GraphOptions sub = opt;
    sub.pseudo_label_override = &pseudo;
    zero_grads(params);
    backward(build_step_losses(batch, m, w, sub).total);
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (std::size_t j = 0; j < grads_stop[i].size(); ++j) {
        worst = std::max(worst, std::fabs(grads_stop[i][j] - params[i].grad()[j]));
      }
    }
  }
  Outcome out;
  out.pass = worst <= kExactTol;
  out.detail = "20 instances, max |grad diff| vs constant substitution = " + fmt(worst);
  return out;
}

// ---- criterion 3: loss identities --------------------------------------------

Outcome criterion_loss_identities(const std::vector<const TrainLog*>& logs) {
  double worst_gap = 0.0;
  for (const TrainLog* log : logs) {
    for (const auto& rec : log->epochs) worst_gap = std::max(worst_gap, rec.max_decomposition_gap);
  }

  // dual graph: each flag folded in at weight zero vs deleted outright
  const SmallData d = small_data(91);
  const Model m = init_params(small_train(1, 0).encoder, 55);
  const auto params = m.all_params();
  Rng rng(77);
  const TripletBatch batch = sample_triplets(d.source, d.target, 2, ClipSpec{2, 2}, rng);

  bool flags_ok = true;
  for (int f = 0; f < 4; ++f) {
    GraphOptions deleted;
    (f == 0 ? deleted.sup_rel : f == 1 ? deleted.sup_abs : f == 2 ? deleted.cons_s
                                                                  : deleted.cons_t) = false;
    zero_grads(params);
    const StepGraph a = build_step_losses(batch, m, LossWeights{}, deleted);
    backward(a.total);
    std::vector<std::vector<double>> ga;
    for (const auto& p : params) ga.emplace_back(p.grad().begin(), p.grad().end());

    GraphOptions folded = deleted;
    folded.keep_disabled_branches = true;
    zero_grads(params);
    const StepGraph b = build_step_losses(batch, m, LossWeights{}, folded);
    backward(b.total);

    flags_ok = flags_ok && a.total.item() == b.total.item();
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (std::size_t j = 0; j < ga[i].size(); ++j) {
        flags_ok = flags_ok && ga[i][j] == params[i].grad()[j];
      }
    }
  }

  Outcome out;
  out.pass = worst_gap <= kExactTol && flags_ok;
  out.detail = "max decomposition gap over all logged epochs = " + fmt(worst_gap) +
               ", flag-vs-deletion dual graphs " + (flags_ok ? "bitwise equal" : "DIFFER");
  return out;
}

// ---- criterion 4: metrics oracle ---------------------------------------------

std::vector<double> ranks_quadratic(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::size_t smaller = 0, equal = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      smaller += v[j] < v[i];
      equal += v[j] == v[i];
    }
    r[i] = 1.0 + static_cast<double>(smaller) + (static_cast<double>(equal) - 1.0) / 2.0;
  }
  return r;
}

double pearson_ref(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  return num / std::sqrt(da * db);
}

Outcome criterion_metrics() {
  Rng rng(4040);
  double worst = 0.0;
  int degenerate_skipped = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(60);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = std::floor(rng.uniform(-4.0, 4.0));  // integer grid forces ties
      b[i] = rng.uniform(-4.0, 4.0);
    }
    const bool const_a = std::all_of(a.begin(), a.end(), [&](double x) { return x == a[0]; });
    const auto got = spearman(a, b);
    if (const_a) {
      if (!got.degenerate) return {false, "missed a degenerate case"};
      ++degenerate_skipped;
    } else {
      worst = std::max(worst, std::fabs(got.rho - pearson_ref(ranks_quadratic(a), ranks_quadratic(b))));
    }

    double mae_ref = 0, mse_ref = 0, mean = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mae_ref += std::fabs(a[i] - b[i]);
      mse_ref += (a[i] - b[i]) * (a[i] - b[i]);
      mean += b[i];
    }
    mae_ref /= static_cast<double>(n);
    mse_ref /= static_cast<double>(n);
    mean /= static_cast<double>(n);
    worst = std::max(worst, std::fabs(mae(a, b) - mae_ref));
    worst = std::max(worst, std::fabs(rmse(a, b) - std::sqrt(mse_ref)));
    double ss_tot = 0;
    for (double v : b) ss_tot += (v - mean) * (v - mean);
    const auto rr = r2(a, b);
    if (ss_tot > 0.0 && !rr.degenerate) {
      worst = std::max(worst, std::fabs(rr.r2 - (1.0 - mse_ref * static_cast<double>(n) / ss_tot)));
    }
  }

  double worst_mono = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + rng.uniform_index(40);
    std::vector<double> a(n), b(n), ta(n), tb(n);
    const double k1 = rng.uniform(0.2, 2.0), k2 = rng.uniform(0.2, 2.0);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform(-5.0, 5.0);
      b[i] = rng.uniform(-5.0, 5.0);
      ta[i] = std::exp(k1 * a[i]);              // strictly increasing maps
      tb[i] = std::atan(k2 * b[i]) + 0.1 * b[i];
    }
    const auto base = spearman(a, b);
    const auto mapped = spearman(ta, tb);
    worst_mono = std::max(worst_mono, std::fabs(base.rho - mapped.rho));
  }

  Outcome out;
  out.pass = worst <= kExactTol && worst_mono <= kExactTol;
  out.detail = "100 oracle instances (max err " + fmt(worst) + ", " +
               std::to_string(degenerate_skipped) + " degenerate flagged), 100 monotone maps (max drift " +
               fmt(worst_mono) + ")";
  return out;
}

// ---- criterion 5: testing pipeline identities ----------------------------------

Outcome criterion_pipeline() {
  // mean-of-reconstructions identity on a real model
  GenConfig gen;
  gen.L = 12;
  gen.h = 12;
  gen.w = 12;
  gen.jitter_max = 2.0;
  std::vector<VideoSample> pool;
  Rng rng(61);
  int i = 0;
  for (double s : {7.0, 12.0, 18.0, 24.0, 29.0}) {
    VideoSample v = gen_video(s, source_domain(), gen, rng);
    v.id = "e" + std::to_string(i++);
    pool.push_back(std::move(v));
  }
  Rng exr(62);
  const ExemplarSet ex = select_exemplars(pool, 5, exr);

  EncoderConfig ec;
  ec.d = 6;
  ec.hidden = 8;
  ec.c = 1;
  ec.h = 12;
  ec.w = 12;
  ec.l = 4;
  const Model m = init_params(ec, 63);
  VideoSample tgt = gen_video(15.0, target_domain(), gen, rng);

  const TargetPrediction pred = predict_target(m, tgt, ex, MixConfig{0.25}, 4);
  double mean = 0.0;
  for (double r : pred.per_exemplar) mean += r;
  mean /= static_cast<double>(pred.per_exemplar.size());
  const double mean_gap = std::fabs(pred.prediction - mean);

  // lambda = 0 is a bitwise identity
  bool lambda0_ok = true;
  const Tensor same = mix_background(tgt.frames, ex.backgrounds[0], 0.0);
  for (std::size_t j = 0; j < same.size(); ++j) {
    lambda0_ok = lambda0_ok && same.data()[j] == tgt.frames.data()[j];
  }

  // median recovery on noise-free videos: exact wherever the blob is rare
  bool median_ok = true;
  std::size_t checked = 0;
  for (Domain dom_kind : {Domain::source, Domain::target}) {
    DomainConfig dom = dom_kind == Domain::source ? source_domain() : target_domain();
    dom.noise_sigma = 0.0;
    GenConfig g2 = gen;
    g2.h = 16;
    g2.w = 16;
    Rng r2(64);
    const VideoSample v = gen_video(20.0, dom, g2, r2);
    const Tensor want = background_frame(dom, g2);
    const Tensor got = extract_background(v);
    const std::size_t L = v.frames.shape()[0];
    const std::size_t px = want.size();
    for (std::size_t p = 0; p < px; ++p) {
      std::size_t touched = 0;
      for (std::size_t t = 0; t < L; ++t) touched += v.frames.data()[t * px + p] != want.data()[p];
      if (2 * touched < L) {
        median_ok = median_ok && got.data()[p] == want.data()[p];
        ++checked;
      }
    }
  }

  Outcome out;
  out.pass = mean_gap <= kExactTol && lambda0_ok && median_ok && checked > 0;
  out.detail = "mean identity gap " + fmt(mean_gap) + ", lambda0 " +
               (lambda0_ok ? "bitwise" : "DIFFERS") + ", median exact on " +
               std::to_string(checked) + " qualifying pixels";
  return out;
}

// ---- criteria 6/7/8: the benchmark runs ----------------------------------------

struct BenchResult {
  std::vector<double> cor, so, semi, nsr, nct;  // per-seed target SCC
  std::vector<const TrainLog*> logs;
  std::vector<TrainResult> keep_alive;
  double seconds = 0.0;
};

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string join(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
  return s + "]";
}

BenchResult run_benchmark() {
  BenchResult bench;
  const auto t0 = clock_type::now();

  RunConfig cfg = desk_profile();
  cfg.gen.seed = kDataSeed;
  finalize(cfg);

  auto src = generate_dataset(cfg.n_source, true, Domain::source, cfg.source_dom, cfg.gen,
                              mix_seed(kDataSeed, 1));
  auto tgt = generate_dataset(cfg.n_target, false, Domain::target, cfg.target_dom, cfg.gen,
                              mix_seed(kDataSeed, 2));
  std::map<std::string, double> sealed(tgt.true_labels.begin(), tgt.true_labels.end());

  std::vector<std::string> target_ids;
  for (const auto& v : tgt.dataset.samples) target_ids.push_back(v.id);
  std::sort(target_ids.begin(), target_ids.end());
  std::vector<std::pair<std::string, double>> labeled;
  std::vector<std::string> labeled_ids;
  for (int i = 0; i < cfg.train.num_labeled_target; ++i) {
    labeled.emplace_back(target_ids[static_cast<std::size_t>(i)],
                         sealed.at(target_ids[static_cast<std::size_t>(i)]));
    labeled_ids.push_back(target_ids[static_cast<std::size_t>(i)]);
  }

  EvalConfig ecfg;
  ecfg.M = cfg.M;
  ecfg.mix = cfg.mix;
  ecfg.seed = kEvalSeed;

  for (std::uint64_t seed : kTrainSeeds) {
    TrainConfig tc = cfg.train;
    tc.seed = seed;

    auto eval_scc = [&](const TrainResult& res, const char* mode, bool exclude_labeled) {
      EvalConfig e = ecfg;
      if (exclude_labeled) e.exclude_ids = labeled_ids;
      const EvalReport rep = evaluate_model(res.model, mode, src.dataset.samples,
                                            tgt.dataset.samples, sealed, e);
      return rep.scc.rho;
    };

    bench.keep_alive.push_back(train_coreda(src.dataset.samples, tgt.dataset.samples, tc));
    bench.cor.push_back(eval_scc(bench.keep_alive.back(), "coreda", false));

    bench.keep_alive.push_back(train_source_only(src.dataset.samples, tc));
    bench.so.push_back(eval_scc(bench.keep_alive.back(), "source_only", false));

    bench.keep_alive.push_back(
        train_semisupervised(src.dataset.samples, tgt.dataset.samples, labeled, tc));
    bench.semi.push_back(eval_scc(bench.keep_alive.back(), "coreda", true));

    TrainConfig nsr = tc;
    nsr.disable_sup_rel = true;
    bench.keep_alive.push_back(train_coreda(src.dataset.samples, tgt.dataset.samples, nsr));
    bench.nsr.push_back(eval_scc(bench.keep_alive.back(), "coreda", false));

    TrainConfig nct = tc;
    nct.disable_cons_t = true;
    bench.keep_alive.push_back(train_coreda(src.dataset.samples, tgt.dataset.samples, nct));
    bench.nct.push_back(eval_scc(bench.keep_alive.back(), "coreda", false));
  }
  for (const auto& res : bench.keep_alive) bench.logs.push_back(&res.log);
  bench.seconds = elapsed(t0);
  return bench;
}

Outcome criterion_adaptation(const BenchResult& b) {
  const double cor = mean(b.cor), so = mean(b.so);
  Outcome out;
  out.pass = cor - so >= kMinAdaptGap && cor >= kMinCorScc && b.seconds < kBenchBudgetSec;
  out.detail = "coreda " + fmt(cor) + " " + join(b.cor) + " vs source-only " + fmt(so) + " " +
               join(b.so) + ", gap " + fmt(cor - so) + " (need >= " + fmt(kMinAdaptGap) +
               "), bench " + fmt(b.seconds) + "s";
  return out;
}

Outcome criterion_semi(const BenchResult& b) {
  const double cor = mean(b.cor), semi = mean(b.semi);
  Outcome out;
  out.pass = semi >= cor;
  out.detail = "semi-supervised " + fmt(semi) + " " + join(b.semi) + " vs unsupervised " +
               fmt(cor) + " " + join(b.cor);
  return out;
}

Outcome criterion_ablations(const BenchResult& b) {
  const double cor = mean(b.cor), nsr = mean(b.nsr), nct = mean(b.nct);
  Outcome out;
  out.pass = nsr < cor && nct < cor;
  out.detail = "full " + fmt(cor) + ", no-sup-rel " + fmt(nsr) + " " + join(b.nsr) +
               ", no-cons-t " + fmt(nct) + " " + join(b.nct);
  return out;
}

// ---- criterion 9: oracle sanity ------------------------------------------------

Outcome criterion_oracle() {
  RunConfig cfg = desk_profile();
  DomainConfig dom = cfg.source_dom;
  dom.noise_sigma = 0.0;
  const auto data = generate_dataset(100, true, Domain::source, dom, cfg.gen, 777);
  std::vector<double> est, truth;
  for (const auto& v : data.dataset.samples) {
    est.push_back(oracle_skill_estimate(v, cfg.gen.jitter_max).estimate);
    truth.push_back(*v.label);
  }
  const auto scc = spearman(est, truth);
  Outcome out;
  out.pass = !scc.degenerate && scc.rho >= kOracleMinScc;
  out.detail = "oracle SCC " + fmt(scc.rho) + " on 100 noise-free source videos (need >= " +
               fmt(kOracleMinScc) + ")";
  return out;
}

// ---- criterion 10: determinism and persistence ----------------------------------

Outcome criterion_determinism() {
  const SmallData d = small_data(92);

  const TrainResult a = train_coreda(d.source, d.target, small_train(2, 11));
  const TrainResult b = train_coreda(d.source, d.target, small_train(2, 11));
  const bool rerun_ok = models_equal(a.model, b.model);

  const fs::path dir = fs::temp_directory_path() / "coreda_acceptance" / "resume";
  fs::remove_all(dir);
  fs::create_directories(dir);
  TrainConfig full_cfg = small_train(3, 11);
  const TrainResult full = train_coreda(d.source, d.target, full_cfg);
  TrainConfig part_cfg = small_train(2, 11);
  part_cfg.checkpoint_dir = dir.string();
  train_coreda(d.source, d.target, part_cfg);
  const std::string ckpt = (dir / "epoch_002.ckpt").string();
  const TrainResult resumed = train_coreda(d.source, d.target, small_train(3, 11), &ckpt);
  const bool resume_ok = models_equal(full.model, resumed.model);

  const fs::path ds_dir = fs::temp_directory_path() / "coreda_acceptance" / "roundtrip";
  fs::remove_all(ds_dir);
  auto g = generate_dataset(4, true, Domain::source, source_domain(), small_gen(), 93);
  const std::string manifest = save_dataset(g.dataset, ds_dir.string(), "rt");
  const Dataset back = load_dataset(manifest);
  bool rt_ok = back.samples.size() == g.dataset.samples.size();
  for (std::size_t i = 0; rt_ok && i < back.samples.size(); ++i) {
    rt_ok = back.samples[i].id == g.dataset.samples[i].id &&
            back.samples[i].label == g.dataset.samples[i].label;
    for (std::size_t j = 0; rt_ok && j < back.samples[i].frames.size(); ++j) {
      rt_ok = back.samples[i].frames.data()[j] == g.dataset.samples[i].frames.data()[j];
    }
  }

  Outcome out;
  out.pass = rerun_ok && resume_ok && rt_ok;
  out.detail = std::string("rerun ") + (rerun_ok ? "bitwise" : "DIFFERS") + ", resume " +
               (resume_ok ? "bitwise" : "DIFFERS") + ", dataset round-trip " +
               (rt_ok ? "bitwise" : "DIFFERS");
  return out;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&failures](int idx, const char* name, const Outcome& o) {
    std::printf("criterion %2d %-24s %s  %s\n", idx, name, o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    if (!o.pass) ++failures;
  };

  report(1, "gradient-suite", criterion_gradients());
  report(2, "stop-gradient", criterion_stopgrad());

  const BenchResult bench = run_benchmark();

  report(3, "loss-identities", criterion_loss_identities(bench.logs));
  report(4, "metrics-oracle", criterion_metrics());
  report(5, "pipeline-identities", criterion_pipeline());
  report(6, "adaptation-efficacy", criterion_adaptation(bench));
  report(7, "semi-supervised", criterion_semi(bench));
  report(8, "ablation-direction", criterion_ablations(bench));
  report(9, "oracle-sanity", criterion_oracle());
  report(10, "determinism", criterion_determinism());

  std::printf("acceptance: %d/10 criteria pass\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
