#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "contdiag/harness.hpp"
#include "contdiag/mtf.hpp"
#include "contdiag/signal.hpp"

namespace fs = std::filesystem;
using namespace contdiag;

namespace {

std::string timestamp_name(const std::string& name) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", std::localtime(&t));
  return std::string(buf) + "-" + name;
}

int cmd_gen(const std::vector<int>& domains, int n_per_class, double test_fraction, uint64_t seed,
            int window_len, const std::string& out, const std::string& test_out) {
  std::vector<SignalWindow> train_windows;
  std::vector<SignalWindow> test_windows;
  for (int id : domains) {
    DomainDataset ds = build_dataset(make_domain_spec(id), n_per_class, test_fraction, seed,
                                     window_len);
    for (auto& w : ds.train) train_windows.push_back(std::move(w));
    for (auto& w : ds.test) test_windows.push_back(std::move(w));
  }
  if (test_out.empty()) {
    for (auto& w : test_windows) train_windows.push_back(std::move(w));
    export_windows_csv(out, train_windows);
    std::printf("wrote %zu windows to %s\n", train_windows.size(), out.c_str());
  } else {
    export_windows_csv(out, train_windows);
    export_windows_csv(test_out, test_windows);
    std::printf("wrote %zu train windows to %s, %zu test windows to %s\n", train_windows.size(),
                out.c_str(), test_windows.size(), test_out.c_str());
  }
  return 0;
}

int cmd_encode(const std::string& in, const std::string& out_dir, int q_bins, int image_size,
               bool pgm) {
  const std::vector<SignalWindow> windows = import_windows_csv(in);
  fs::create_directories(out_dir);
  char name[64];
  for (size_t i = 0; i < windows.size(); ++i) {
    const MtfImage img = encode(windows[i].samples, q_bins, image_size);
    std::snprintf(name, sizeof(name), "%06zu.mtf", i);
    save_mtf((fs::path(out_dir) / name).string(), img);
    if (pgm) {
      std::snprintf(name, sizeof(name), "%06zu.pgm", i);
      save_pgm((fs::path(out_dir) / name).string(), img);
    }
  }
  std::printf("encoded %zu windows into %s\n", windows.size(), out_dir.c_str());
  return 0;
}

void print_run(const ExperimentOutput& output) {
  for (const SeedOutcome& s : output.seeds) {
    if (s.failed) {
      std::printf("seed %llu: FAILED (%s)\n", static_cast<unsigned long long>(s.seed),
                  s.error.c_str());
      continue;
    }
    std::printf("seed %llu: ACC=%.4f LA=%.4f", static_cast<unsigned long long>(s.seed),
                s.result.acc, s.result.la);
    if (s.result.fm_defined) {
      std::printf(" FM=%.3e", s.result.fm);
    } else {
      std::printf(" FM=n/a");
    }
    std::printf(" (%.1fs)\n", s.wall_seconds);
  }
  const auto accs = metric_values(output, "acc");
  if (!accs.empty()) {
    const MeanStd a = mean_std(accs);
    const MeanStd l = mean_std(metric_values(output, "la"));
    const MeanStd f = mean_std(metric_values(output, "fm"));
    std::printf("aggregate: ACC=%.4f+-%.4f LA=%.4f+-%.4f FM=%.3e+-%.3e (n=%d)\n", a.mean,
                a.stddev, l.mean, l.stddev, f.mean, f.stddev, a.n);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual-learning fault diagnosis engine"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Synthesize a multi-domain dataset as CSV");
  std::vector<int> gen_domains = {1, 2, 7, 8, 13, 14};
  int gen_n = 40;
  double gen_tf = 0.25;
  uint64_t gen_seed = 7;
  int gen_window = kDefaultWindowLen;
  std::string gen_out = "windows.csv";
  std::string gen_test_out;
  gen->add_option("--domains", gen_domains, "Domain ids (1..18)");
  gen->add_option("--n-per-class", gen_n, "Instances per fault class");
  gen->add_option("--test-fraction", gen_tf, "Held-out fraction");
  gen->add_option("--seed", gen_seed, "Base seed");
  gen->add_option("--window-len", gen_window, "Samples per window");
  gen->add_option("--out", gen_out, "Output CSV (train, or all when no --test-out)");
  gen->add_option("--test-out", gen_test_out, "Optional separate test CSV");

  // encode
  auto* enc = app.add_subcommand("encode", "Encode a window CSV into MTF image blobs");
  std::string enc_in;
  std::string enc_out = "mtf_images";
  int enc_q = 16;
  int enc_size = 16;
  bool enc_pgm = false;
  enc->add_option("--in", enc_in, "Input CSV")->required();
  enc->add_option("--out-dir", enc_out, "Output directory");
  enc->add_option("--bins", enc_q, "Quantile bins");
  enc->add_option("--size", enc_size, "Output image size");
  enc->add_flag("--pgm", enc_pgm, "Also write PGM previews");

  // train
  auto* train = app.add_subcommand("train", "Run a full continual-learning experiment");
  std::string train_config;
  std::string train_out;
  std::string train_name;
  bool train_full = false;
  std::vector<uint64_t> train_seeds;
  std::string train_policy;
  std::string train_ordering;
  std::string train_corruption;
  int train_epochs = -1;
  int train_capacity = -1;
  train->add_option("--config", train_config, "JSON config file");
  train->add_option("--out", train_out, "Run directory (default runs/<timestamp>-<name>)");
  train->add_option("--name", train_name, "Run name");
  train->add_flag("--full", train_full, "Use the 18-domain configuration");
  train->add_option("--seeds", train_seeds, "Override seeds");
  train->add_option("--policy", train_policy, "Replay policy: Boosting|Balanced|None");
  train->add_option("--ordering", train_ordering,
                    "Ordering: AsGiven|LowestFirst|HighestFirst|Alternated");
  train->add_option("--corruption", train_corruption, "Corruption: None|Mild|Moderate|High");
  train->add_option("--epochs", train_epochs, "Override training epochs");
  train->add_option("--capacity", train_capacity, "Replay buffer domain capacity (0 = unbounded)");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Run an ablation suite");
  std::string ablate_suite;
  std::string ablate_config;
  std::string ablate_out;
  ablate->add_option("--suite", ablate_suite, "ordering|replay|corruption")->required();
  ablate->add_option("--config", ablate_config, "Base JSON config file");
  ablate->add_option("--out", ablate_out, "Output directory");

  // report
  auto* report = app.add_subcommand("report", "Re-render summary.json from a run manifest");
  std::string report_dir;
  report->add_option("--run", report_dir, "Run directory")->required();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Verify network gradients by finite differences");
  double gc_eps = 1e-4;
  double gc_tol = 1e-3;
  uint64_t gc_seed = 42;
  int gc_samples = 50;
  gc->add_option("--epsilon", gc_eps, "Central difference step");
  gc->add_option("--tolerance", gc_tol, "Max relative error");
  gc->add_option("--seed", gc_seed, "Seed");
  gc->add_option("--samples", gc_samples, "Sampled parameters per tensor");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen(gen_domains, gen_n, gen_tf, gen_seed, gen_window, gen_out,
                             gen_test_out);
    if (*enc) return cmd_encode(enc_in, enc_out, enc_q, enc_size, enc_pgm);

    if (*train) {
      ExperimentConfig cfg = train_full ? full_config() : default_config();
      if (!train_config.empty()) cfg = load_config(train_config);
      if (train_full && train_config.empty()) cfg = full_config();
      if (!train_name.empty()) cfg.name = train_name;
      if (!train_seeds.empty()) cfg.seeds = train_seeds;
      if (!train_policy.empty()) cfg.replay.policy = policy_from_name(train_policy);
      if (!train_ordering.empty()) cfg.ordering = ordering_from_name(train_ordering);
      if (!train_corruption.empty()) cfg.corruption = CorruptionLevel::from_name(train_corruption);
      if (train_epochs > 0) cfg.train.epochs = train_epochs;
      if (train_capacity >= 0) cfg.replay.capacity_domains = train_capacity;
      validate(cfg);
      const std::string out_dir =
          train_out.empty() ? ("runs/" + timestamp_name(cfg.name)) : train_out;
      const ExperimentOutput output = run_experiment(cfg, out_dir);
      print_run(output);
      std::printf("run directory: %s\n", out_dir.c_str());
      for (const SeedOutcome& s : output.seeds) {
        if (s.failed) return 2;
      }
      return 0;
    }

    if (*ablate) {
      ExperimentConfig base =
          ablate_config.empty() ? default_config() : load_config(ablate_config);
      const std::string out_dir =
          ablate_out.empty() ? ("runs/" + timestamp_name("ablate-" + ablate_suite)) : ablate_out;
      const AblationReport rep = run_ablation(ablate_suite, base, out_dir);
      std::printf("%s", rep.text.c_str());
      std::printf("ablation directory: %s\n", out_dir.c_str());
      return 0;
    }

    if (*report) {
      const std::string text = render_report(report_dir);
      std::ofstream out(fs::path(report_dir) / "summary.json");
      out << text;
      std::printf("%s", text.c_str());
      return 0;
    }

    if (*gc) {
      Rng rng(gc_seed);
      const int image_size = 12;
      FeatureGenerator fg = make_feature_generator(image_size, rng);
      ClassifierHead head = make_classifier_head(fg.dims().feat, 4, rng);
      std::vector<MtfImage> images(2);
      for (MtfImage& img : images) {
        img.size = image_size;
        img.bins = 8;
        img.source_len = image_size * image_size;
        img.pixels.resize(static_cast<size_t>(image_size) * image_size);
        for (double& p : img.pixels) p = rng.uniform();
      }
      const std::vector<const MtfImage*> batch = {&images[0], &images[1]};
      const std::vector<int> labels = {1, 3};
      const GradCheckReport rep =
          grad_check(fg, head, batch, labels, gc_eps, gc_tol, gc_seed, gc_samples);
      for (const GradCheckEntry& e : rep.entries) {
        std::printf("%-10s checked=%-4d max_rel_err=%.3e\n", e.tensor.c_str(), e.checked,
                    e.max_rel_err);
      }
      std::printf("max relative error %.3e (tolerance %.1e): %s\n", rep.max_rel_err,
                  rep.tolerance, rep.pass ? "PASS" : "FAIL");
      return rep.pass ? 0 : 2;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
