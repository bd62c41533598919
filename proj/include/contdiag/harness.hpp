#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "contdiag/curriculum.hpp"
#include "contdiag/metrics.hpp"
#include "contdiag/net.hpp"
#include "contdiag/scheduler.hpp"

namespace contdiag {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ReplayPolicy { Boosting, Balanced, None };
const char* policy_name(ReplayPolicy p);
ReplayPolicy policy_from_name(const std::string& name);

struct MtfConfig {
  int q_bins = 16;
  int image_size = 16;
  int window_len = 512;
};

struct ReplaySettings {
  int capacity_domains = 0;  // 0 = unbounded
  ReplayPolicy policy = ReplayPolicy::Boosting;
};

struct ExperimentConfig {
  std::string name = "run";
  std::vector<int> domain_ids = {1, 2, 7, 8, 13, 14};
  OrderingKind ordering = OrderingKind::AsGiven;
  CorruptionLevel corruption = CorruptionLevel::none();
  ReplaySettings replay;
  int b = 4;  // per-episode domain budget, capped at k
  int n_per_class = 40;
  double test_fraction = 0.25;
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  TrainingConfig train;
  MtfConfig mtf;
};

ExperimentConfig default_config();
// The full 18-domain configuration.
ExperimentConfig full_config();

// JSON file with the same field names as the struct; missing fields keep
// defaults. Throws ConfigError on unknown keys or invalid values.
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& config, const std::string& path);
void validate(const ExperimentConfig& config);

struct EpisodeRecord {
  int k = 0;
  std::vector<int> selected;                // domain positions in this episode
  std::map<int, double> selection_weights;  // weights used to pick them
  std::map<int, double> mean_log_p;         // episode model, training data
  std::map<int, double> buffer_losses;      // ensemble risk on exemplars
  double current_train_accuracy = 0.0;
  std::vector<uint64_t> model_hashes;       // model l after this episode, l=1..k
};

struct SeedOutcome {
  uint64_t seed = 0;
  bool failed = false;
  std::string error;
  std::vector<int> permutation;  // position (1-based) -> domain_id
  std::map<int, double> baseline_accuracy;
  std::vector<EpisodeRecord> episodes;
  std::vector<std::vector<double>> matrix_rows;
  std::map<int, std::vector<std::vector<int>>> final_confusions;  // position -> counts
  RunResult result;
  std::vector<std::vector<unsigned char>> checkpoint_blobs;  // per episode model
  ReplayBuffer final_buffer;
  double wall_seconds = 0.0;
};

struct ExperimentOutput {
  ExperimentConfig config;
  std::vector<SeedOutcome> seeds;
  std::string run_dir;  // empty when not persisted
};

// Full episode loop for every seed; failures abort only their seed. When
// out_dir is non-empty, writes manifest.json, summary.json, logs/ and
// checkpoints/ under it.
ExperimentOutput run_experiment(const ExperimentConfig& config, const std::string& out_dir = "");

void write_run_outputs(const ExperimentOutput& output, const std::string& dir);

// Metric vectors across surviving seeds, ordered by seed list.
std::vector<double> metric_values(const ExperimentOutput& output, const std::string& metric);

struct AblationRow {
  std::string label;
  MeanStd acc, la, fm;
  double p_acc_vs_base = 1.0;
  double p_la_vs_base = 1.0;
  double p_fm_vs_base = 1.0;
};

struct AblationReport {
  std::string suite;
  AblationRow base;
  std::vector<AblationRow> rows;
  std::string text;  // rendered table
};

// suite is one of "ordering", "replay", "corruption".
AblationReport run_ablation(const std::string& suite, const ExperimentConfig& base,
                            const std::string& out_dir = "");

// Re-renders summary.json from a persisted manifest; returns the summary
// text. Every reported number is recomputed from the manifest.
std::string render_report(const std::string& run_dir);

}  // namespace contdiag
