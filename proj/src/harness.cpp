#include "contdiag/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "contdiag/encoded.hpp"
#include "contdiag/ensemble.hpp"
#include "contdiag/scheduler.hpp"
#include "contdiag/signal.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace contdiag {

namespace {

// Decorrelated per-purpose RNG streams within one seed.
enum : uint64_t {
  kStreamData = 0xA1,
  kStreamCorrupt = 0xA2,
  kStreamSelect = 0xA3,
  kStreamBuffer = 0xA4,
  kStreamTrain = 0xA5,
  kStreamInit = 0xA6,
  kStreamBaseline = 0xA7,
};

uint64_t stream(uint64_t seed, uint64_t tag) { return hash_combine(seed, tag); }
uint64_t stream(uint64_t seed, uint64_t tag, uint64_t sub) {
  return hash_combine(hash_combine(seed, tag), sub);
}

}  // namespace

const char* policy_name(ReplayPolicy p) {
  switch (p) {
    case ReplayPolicy::Boosting: return "Boosting";
    case ReplayPolicy::Balanced: return "Balanced";
    case ReplayPolicy::None: return "None";
  }
  return "?";
}

ReplayPolicy policy_from_name(const std::string& name) {
  if (name == "Boosting") return ReplayPolicy::Boosting;
  if (name == "Balanced") return ReplayPolicy::Balanced;
  if (name == "None") return ReplayPolicy::None;
  throw ConfigError("unknown replay policy: " + name);
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

ExperimentConfig full_config() {
  ExperimentConfig cfg;
  cfg.name = "full";
  cfg.domain_ids.clear();
  for (int id = 1; id <= 18; ++id) cfg.domain_ids.push_back(id);
  return cfg;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.domain_ids.empty()) throw ConfigError("domain_ids must be non-empty");
  std::set<int> ids;
  for (int id : cfg.domain_ids) {
    if (id < 1 || id > 18) throw ConfigError("domain id outside 1..18");
    if (!ids.insert(id).second) throw ConfigError("duplicate domain id");
  }
  if (cfg.seeds.empty()) throw ConfigError("seeds must be non-empty");
  std::set<uint64_t> s(cfg.seeds.begin(), cfg.seeds.end());
  if (s.size() != cfg.seeds.size()) throw ConfigError("seeds must be distinct");
  if (cfg.b < 1) throw ConfigError("b must be >= 1");
  if (cfg.n_per_class < 2) throw ConfigError("n_per_class must be >= 2");
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) {
    throw ConfigError("test_fraction must be in (0,1)");
  }
  if (cfg.train.lr <= 0.0) throw ConfigError("lr must be positive");
  if (cfg.train.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.train.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.mtf.q_bins < 2) throw ConfigError("q_bins must be >= 2");
  if (cfg.mtf.window_len < cfg.mtf.q_bins) throw ConfigError("window_len too small");
  if (cfg.mtf.image_size > cfg.mtf.window_len) throw ConfigError("image_size > window_len");
  if (cfg.replay.capacity_domains < 0) throw ConfigError("capacity_domains must be >= 0");
  try {
    (void)NetDims::from_input(cfg.mtf.image_size);
  } catch (const std::exception&) {
    throw ConfigError("image_size too small for the network");
  }
  if (cfg.corruption.name != "None" && cfg.corruption.name != "Mild" &&
      cfg.corruption.name != "Moderate" && cfg.corruption.name != "High") {
    throw ConfigError("unknown corruption level: " + cfg.corruption.name);
  }
}

namespace {

ordered_json config_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["name"] = cfg.name;
  j["domain_ids"] = cfg.domain_ids;
  j["ordering"] = ordering_name(cfg.ordering);
  j["corruption"] = cfg.corruption.name;
  j["replay"] = {{"capacity_domains", cfg.replay.capacity_domains},
                 {"policy", policy_name(cfg.replay.policy)}};
  j["b"] = cfg.b;
  j["n_per_class"] = cfg.n_per_class;
  j["test_fraction"] = cfg.test_fraction;
  j["seeds"] = cfg.seeds;
  j["train"] = {{"lr", cfg.train.lr},
                {"momentum", cfg.train.momentum},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size}};
  j["mtf"] = {{"q_bins", cfg.mtf.q_bins},
              {"image_size", cfg.mtf.image_size},
              {"window_len", cfg.mtf.window_len}};
  return j;
}

void config_from_json(const ordered_json& j, ExperimentConfig& cfg) {
  static const std::set<std::string> known = {"name", "domain_ids", "ordering",   "corruption",
                                              "replay", "b",        "n_per_class", "test_fraction",
                                              "seeds", "train",     "mtf"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key: " + key);
  }
  if (j.contains("name")) cfg.name = j["name"].get<std::string>();
  if (j.contains("domain_ids")) cfg.domain_ids = j["domain_ids"].get<std::vector<int>>();
  if (j.contains("ordering")) cfg.ordering = ordering_from_name(j["ordering"].get<std::string>());
  if (j.contains("corruption")) {
    cfg.corruption = CorruptionLevel::from_name(j["corruption"].get<std::string>());
  }
  if (j.contains("replay")) {
    const auto& r = j["replay"];
    for (const auto& [key, value] : r.items()) {
      if (key != "capacity_domains" && key != "policy") {
        throw ConfigError("unknown replay key: " + key);
      }
    }
    if (r.contains("capacity_domains")) {
      cfg.replay.capacity_domains = r["capacity_domains"].get<int>();
    }
    if (r.contains("policy")) cfg.replay.policy = policy_from_name(r["policy"].get<std::string>());
  }
  if (j.contains("b")) cfg.b = j["b"].get<int>();
  if (j.contains("n_per_class")) cfg.n_per_class = j["n_per_class"].get<int>();
  if (j.contains("test_fraction")) cfg.test_fraction = j["test_fraction"].get<double>();
  if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<uint64_t>>();
  if (j.contains("train")) {
    const auto& t = j["train"];
    for (const auto& [key, value] : t.items()) {
      if (key != "lr" && key != "momentum" && key != "epochs" && key != "batch_size") {
        throw ConfigError("unknown train key: " + key);
      }
    }
    if (t.contains("lr")) cfg.train.lr = t["lr"].get<double>();
    if (t.contains("momentum")) cfg.train.momentum = t["momentum"].get<double>();
    if (t.contains("epochs")) cfg.train.epochs = t["epochs"].get<int>();
    if (t.contains("batch_size")) cfg.train.batch_size = t["batch_size"].get<int>();
  }
  if (j.contains("mtf")) {
    const auto& m = j["mtf"];
    for (const auto& [key, value] : m.items()) {
      if (key != "q_bins" && key != "image_size" && key != "window_len") {
        throw ConfigError("unknown mtf key: " + key);
      }
    }
    if (m.contains("q_bins")) cfg.mtf.q_bins = m["q_bins"].get<int>();
    if (m.contains("image_size")) cfg.mtf.image_size = m["image_size"].get<int>();
    if (m.contains("window_len")) cfg.mtf.window_len = m["window_len"].get<int>();
  }
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig cfg;
  config_from_json(j, cfg);
  validate(cfg);
  return cfg;
}

void save_config(const ExperimentConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << config_json(config).dump(2) << '\n';
}

namespace {

EncodedDomain encode_domain(const DomainDataset& ds, int position, const MtfConfig& mtf) {
  EncodedDomain e;
  e.position = position;
  e.domain_id = ds.spec.domain_id;
  e.n_classes = static_cast<int>(ds.spec.fault_classes.size());
  e.train.resize(ds.train.size());
  e.test.resize(ds.test.size());
#pragma omp parallel for
  for (long long i = 0; i < static_cast<long long>(ds.train.size()); ++i) {
    e.train[i].image = encode(ds.train[i].samples, mtf.q_bins, mtf.image_size);
    e.train[i].label = label_index(ds.spec, ds.train[i].label);
  }
#pragma omp parallel for
  for (long long i = 0; i < static_cast<long long>(ds.test.size()); ++i) {
    e.test[i].image = encode(ds.test[i].samples, mtf.q_bins, mtf.image_size);
    e.test[i].label = label_index(ds.spec, ds.test[i].label);
  }
  return e;
}

// Single-domain training pass used for curriculum baselines.
double isolated_accuracy(const DomainDataset& ds, const ExperimentConfig& cfg, uint64_t seed) {
  EncodedDomain e = encode_domain(ds, 1, cfg.mtf);
  EnsembleState st;
  st.domain_classes[1] = e.n_classes;
  EpisodeModel& model = new_episode(st, 1, {1}, cfg.mtf.image_size, hash_combine(seed, 1));
  TrainingConfig hyper = cfg.train;
  hyper.seed = hash_combine(seed, 2);
  train_episode(model, e, {}, hyper);
  return ensemble_accuracy(st, e.test, 1);
}

SeedOutcome run_seed(const ExperimentConfig& cfg, uint64_t seed) {
  SeedOutcome out;
  out.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();

  // Synthesize (and optionally corrupt) every domain's raw windows.
  std::map<int, DomainDataset> data;
  for (int id : cfg.domain_ids) {
    DomainDataset ds = build_dataset(make_domain_spec(id), cfg.n_per_class, cfg.test_fraction,
                                     stream(seed, kStreamData), cfg.mtf.window_len);
    Rng crng(stream(seed, kStreamCorrupt, static_cast<uint64_t>(id)));
    data.emplace(id, corrupt_dataset(ds, cfg.corruption, crng));
  }

  OrderingStrategy strategy;
  strategy.kind = cfg.ordering;
  if (cfg.ordering != OrderingKind::AsGiven) {
    for (int id : cfg.domain_ids) {
      strategy.baseline_acc[id] =
          isolated_accuracy(data.at(id), cfg, stream(seed, kStreamBaseline, id));
    }
    out.baseline_accuracy = strategy.baseline_acc;
  }
  out.permutation = order_domains(strategy, cfg.domain_ids);

  const int total = static_cast<int>(out.permutation.size());
  std::vector<EncodedDomain> encoded(static_cast<size_t>(total) + 1);
  for (int pos = 1; pos <= total; ++pos) {
    encoded[pos] = encode_domain(data.at(out.permutation[pos - 1]), pos, cfg.mtf);
  }

  EnsembleState state;
  for (int pos = 1; pos <= total; ++pos) state.domain_classes[pos] = encoded[pos].n_classes;

  ReplayBuffer buffer;
  buffer.capacity_domains = cfg.replay.capacity_domains;
  Rng select_rng(stream(seed, kStreamSelect));
  Rng buffer_rng(stream(seed, kStreamBuffer));
  DomainWeights weights;

  AccuracyMatrix matrix(total);

  for (int k = 1; k <= total; ++k) {
    EpisodeRecord record;
    record.k = k;

    const int b_k = (cfg.replay.policy == ReplayPolicy::None) ? 1 : std::min(k, cfg.b);
    std::set<int> selected = {k};
    if (b_k > 1) {
      switch (cfg.replay.policy) {
        case ReplayPolicy::Boosting: {
          DomainWeights for_selection;
          if (k == 2) {
            for_selection.episode_k = 1;
            for (const auto& [d, samples] : buffer.store) {
              for_selection.w[d] = 1.0 / static_cast<double>(buffer.store.size());
            }
          } else {
            for_selection = weights;
          }
          record.selection_weights = for_selection.w;
          selected = select_domains(for_selection, b_k, k, select_rng);
          break;
        }
        case ReplayPolicy::Balanced: {
          for (int d : balanced_pick(buffer, b_k - 1)) selected.insert(d);
          break;
        }
        case ReplayPolicy::None:
          break;
      }
    }
    record.selected.assign(selected.begin(), selected.end());

    std::map<int, const std::vector<EncodedSample>*> replay;
    for (int d : selected) {
      if (d != k) replay.emplace(d, &buffer.store.at(d));
    }

    EpisodeModel& model =
        new_episode(state, k, selected, cfg.mtf.image_size, stream(seed, kStreamInit));
    TrainingConfig hyper = cfg.train;
    hyper.seed = stream(seed, kStreamTrain, static_cast<uint64_t>(k));
    EpisodeTrainResult tr = train_episode(model, encoded[k], replay, hyper);
    record.mean_log_p = tr.mean_log_p;
    record.current_train_accuracy = model_accuracy(model, encoded[k].train, k);

    if (cfg.replay.policy != ReplayPolicy::None) {
      admit_domain(buffer, k, encoded[k].train, buffer_rng);
      std::map<int, double> ensemble_mlp;
      for (const auto& [d, samples] : buffer.store) {
        const double mlp = ensemble_mean_log_p(state, samples, d);
        ensemble_mlp[d] = std::min(mlp, 0.0);
        buffer.last_loss[d] = -ensemble_mlp[d];
      }
      weights = compute_weights(ensemble_mlp, k);
      record.buffer_losses = buffer.last_loss;
    }

    std::vector<double> row(static_cast<size_t>(k));
    for (int i = 1; i <= k; ++i) row[i - 1] = ensemble_accuracy(state, encoded[i].test, i);
    matrix.push_row(row);
    out.matrix_rows.push_back(row);

    for (int l = 1; l <= k; ++l) {
      const EpisodeModel& frozen = state.models[l - 1];
      const auto bytes = model_bytes(frozen.fg, frozen.heads);
      record.model_hashes.push_back(fnv1a64(bytes.data(), bytes.size()));
    }
    out.episodes.push_back(std::move(record));
  }

  out.result.seed = seed;
  out.result.acc = acc(matrix);
  out.result.la = la(matrix);
  if (total >= 2) {
    out.result.fm = fm(matrix);
    out.result.fm_defined = true;
  }
  for (int i = 1; i <= total; ++i) {
    out.result.per_domain_final[i] = matrix.at(total, i);
    out.final_confusions[i] = ensemble_confusion(state, encoded[i].test, i);
    out.result.per_domain_prf[i] = prf(out.final_confusions[i]);
  }
  for (const EpisodeModel& m : state.models) {
    out.checkpoint_blobs.push_back(model_bytes(m.fg, m.heads));
  }
  out.final_buffer = buffer;

  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

ExperimentOutput run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
  validate(config);
  ExperimentOutput output;
  output.config = config;
  for (uint64_t seed : config.seeds) {
    try {
      output.seeds.push_back(run_seed(config, seed));
    } catch (const std::exception& e) {
      SeedOutcome failed;
      failed.seed = seed;
      failed.failed = true;
      failed.error = e.what();
      output.seeds.push_back(std::move(failed));
    }
  }
  if (!out_dir.empty()) {
    output.run_dir = out_dir;
    write_run_outputs(output, out_dir);
  }
  return output;
}

namespace {

ordered_json map_to_json(const std::map<int, double>& m) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : m) j[std::to_string(k)] = v;
  return j;
}

ordered_json seed_json(const SeedOutcome& s) {
  ordered_json j;
  j["seed"] = s.seed;
  j["failed"] = s.failed;
  if (s.failed) {
    j["error"] = s.error;
    return j;
  }
  j["permutation"] = s.permutation;
  if (!s.baseline_accuracy.empty()) j["baseline_accuracy"] = map_to_json(s.baseline_accuracy);
  ordered_json episodes = ordered_json::array();
  for (const EpisodeRecord& e : s.episodes) {
    ordered_json ej;
    ej["k"] = e.k;
    ej["selected"] = e.selected;
    if (!e.selection_weights.empty()) ej["selection_weights"] = map_to_json(e.selection_weights);
    ej["mean_log_p"] = map_to_json(e.mean_log_p);
    if (!e.buffer_losses.empty()) ej["buffer_losses"] = map_to_json(e.buffer_losses);
    ej["train_accuracy"] = e.current_train_accuracy;
    ordered_json hashes = ordered_json::array();
    for (uint64_t h : e.model_hashes) hashes.push_back(hash_hex(h));
    ej["model_hashes"] = hashes;
    episodes.push_back(std::move(ej));
  }
  j["episodes"] = std::move(episodes);
  j["accuracy_rows"] = s.matrix_rows;
  ordered_json confusions = ordered_json::object();
  for (const auto& [pos, counts] : s.final_confusions) {
    confusions[std::to_string(pos)] = counts;
  }
  j["final_confusions"] = std::move(confusions);
  j["checkpoints"] = "checkpoints/seed_" + std::to_string(s.seed);
  ordered_json metrics;
  metrics["acc"] = s.result.acc;
  metrics["la"] = s.result.la;
  if (s.result.fm_defined) {
    metrics["fm"] = s.result.fm;
  } else {
    metrics["fm"] = nullptr;
  }
  j["metrics"] = std::move(metrics);
  return j;
}

ordered_json summary_json(const ExperimentOutput& output) {
  ordered_json j;
  j["config"] = config_json(output.config);
  ordered_json per_seed = ordered_json::array();
  std::vector<double> accs, las, fms;
  ordered_json failed = ordered_json::array();
  for (const SeedOutcome& s : output.seeds) {
    if (s.failed) {
      failed.push_back({{"seed", s.seed}, {"error", s.error}});
      continue;
    }
    ordered_json sj;
    sj["seed"] = s.seed;
    sj["acc"] = s.result.acc;
    sj["la"] = s.result.la;
    if (s.result.fm_defined) {
      sj["fm"] = s.result.fm;
      fms.push_back(s.result.fm);
    } else {
      sj["fm"] = nullptr;
    }
    ordered_json pd = ordered_json::object();
    for (const auto& [pos, v] : s.result.per_domain_final) pd[std::to_string(pos)] = v;
    sj["per_domain_final"] = std::move(pd);
    ordered_json pr = ordered_json::object();
    for (const auto& [pos, report] : s.result.per_domain_prf) {
      pr[std::to_string(pos)] = {{"precision", report.macro_precision},
                                 {"recall", report.macro_recall},
                                 {"f1", report.macro_f1}};
    }
    sj["per_domain_prf_macro"] = std::move(pr);
    per_seed.push_back(std::move(sj));
    accs.push_back(s.result.acc);
    las.push_back(s.result.la);
  }
  j["per_seed"] = std::move(per_seed);
  j["failed_seeds"] = std::move(failed);

  auto agg = [](const std::vector<double>& v) -> ordered_json {
    if (v.empty()) return nullptr;
    const MeanStd ms = mean_std(v);
    return {{"mean", ms.mean}, {"std", ms.stddev}, {"n", ms.n}};
  };
  j["aggregate"] = {{"acc", agg(accs)}, {"la", agg(las)}, {"fm", agg(fms)}};
  return j;
}

}  // namespace

void write_run_outputs(const ExperimentOutput& output, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "logs");
  fs::create_directories(fs::path(dir) / "checkpoints");

  ordered_json manifest;
  manifest["format"] = "contdiag-run/1";
  manifest["config"] = config_json(output.config);
  ordered_json seeds = ordered_json::array();
  for (const SeedOutcome& s : output.seeds) seeds.push_back(seed_json(s));
  manifest["seeds"] = std::move(seeds);
  {
    std::ofstream out(fs::path(dir) / "manifest.json");
    out << manifest.dump(2) << '\n';
  }
  {
    std::ofstream out(fs::path(dir) / "summary.json");
    out << summary_json(output).dump(2) << '\n';
  }
  {
    std::ofstream out(fs::path(dir) / "logs" / "accuracy.csv");
    out << "seed,episode,position,accuracy\n";
    char buf[32];
    for (const SeedOutcome& s : output.seeds) {
      if (s.failed) continue;
      for (size_t ep = 0; ep < s.matrix_rows.size(); ++ep) {
        for (size_t pos = 0; pos < s.matrix_rows[ep].size(); ++pos) {
          std::snprintf(buf, sizeof(buf), "%.17g", s.matrix_rows[ep][pos]);
          out << s.seed << ',' << (ep + 1) << ',' << (pos + 1) << ',' << buf << '\n';
        }
      }
    }
  }
  for (const SeedOutcome& s : output.seeds) {
    if (s.failed) continue;
    const fs::path seed_dir = fs::path(dir) / "checkpoints" / ("seed_" + std::to_string(s.seed));
    fs::create_directories(seed_dir);
    ordered_json ensemble_manifest = ordered_json::array();
    for (size_t k = 0; k < s.checkpoint_blobs.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof(name), "model_%02zu.dfnn", k + 1);
      std::ofstream blob(seed_dir / name, std::ios::binary);
      blob.write(reinterpret_cast<const char*>(s.checkpoint_blobs[k].data()),
                 static_cast<std::streamsize>(s.checkpoint_blobs[k].size()));
      ordered_json entry;
      entry["episode"] = k + 1;
      entry["trained_domains"] = s.episodes[k].selected;
      entry["file"] = name;
      entry["hash"] = hash_hex(s.episodes.back().model_hashes[k]);
      ensemble_manifest.push_back(std::move(entry));
    }
    ordered_json ej;
    ej["seed"] = s.seed;
    ej["train"] = {{"lr", output.config.train.lr},
                   {"momentum", output.config.train.momentum},
                   {"epochs", output.config.train.epochs},
                   {"batch_size", output.config.train.batch_size}};
    ej["models"] = std::move(ensemble_manifest);
    std::ofstream out(seed_dir / "ensemble.json");
    out << ej.dump(2) << '\n';
    if (!s.final_buffer.store.empty()) {
      save_buffer(s.final_buffer, (seed_dir / "buffer").string());
    }
  }
  {
    ordered_json timings;
    for (const SeedOutcome& s : output.seeds) {
      timings[std::to_string(s.seed)] = s.wall_seconds;
    }
    std::ofstream out(fs::path(dir) / "timings.json");
    out << timings.dump(2) << '\n';
  }
}

std::vector<double> metric_values(const ExperimentOutput& output, const std::string& metric) {
  std::vector<double> values;
  for (const SeedOutcome& s : output.seeds) {
    if (s.failed) continue;
    if (metric == "acc") values.push_back(s.result.acc);
    else if (metric == "la") values.push_back(s.result.la);
    else if (metric == "fm") values.push_back(s.result.fm_defined ? s.result.fm : 0.0);
    else throw std::invalid_argument("unknown metric: " + metric);
  }
  return values;
}

namespace {

AblationRow make_row(const std::string& label, const ExperimentOutput& run,
                     const ExperimentOutput* base) {
  AblationRow row;
  row.label = label;
  row.acc = mean_std(metric_values(run, "acc"));
  row.la = mean_std(metric_values(run, "la"));
  row.fm = mean_std(metric_values(run, "fm"));
  if (base) {
    row.p_acc_vs_base = wilcoxon_signed_rank(metric_values(run, "acc"), metric_values(*base, "acc"));
    row.p_la_vs_base = wilcoxon_signed_rank(metric_values(run, "la"), metric_values(*base, "la"));
    row.p_fm_vs_base = wilcoxon_signed_rank(metric_values(run, "fm"), metric_values(*base, "fm"));
  }
  return row;
}

std::string render_table(const AblationReport& report) {
  std::ostringstream os;
  char line[256];
  os << "Suite: " << report.suite << "\n";
  os << "Baseline = AsGiven ordering, Boosting policy, unbounded capacity\n";
  std::snprintf(line, sizeof(line), "%-14s %-18s %-18s %-22s %s\n", "Strategy", "ACC", "LA", "FM",
                "p(FM) vs base");
  os << line;
  auto fmt = [&](const AblationRow& row, bool with_p) {
    char acc_s[32], la_s[32], fm_s[32], p_s[32];
    std::snprintf(acc_s, sizeof(acc_s), "%.4f+-%.4f", row.acc.mean, row.acc.stddev);
    std::snprintf(la_s, sizeof(la_s), "%.4f+-%.4f", row.la.mean, row.la.stddev);
    std::snprintf(fm_s, sizeof(fm_s), "%.2e+-%.2e", row.fm.mean, row.fm.stddev);
    if (with_p) {
      std::snprintf(p_s, sizeof(p_s), "%.4g", row.p_fm_vs_base);
    } else {
      std::snprintf(p_s, sizeof(p_s), "-");
    }
    std::snprintf(line, sizeof(line), "%-14s %-18s %-18s %-22s %s\n", row.label.c_str(), acc_s,
                  la_s, fm_s, p_s);
    os << line;
  };
  fmt(report.base, false);
  for (const AblationRow& row : report.rows) fmt(row, true);
  return os.str();
}

}  // namespace

AblationReport run_ablation(const std::string& suite, const ExperimentConfig& base,
                            const std::string& out_dir) {
  struct Variant {
    std::string label;
    std::string slug;
    ExperimentConfig config;
  };
  std::vector<Variant> variants;
  if (suite == "ordering") {
    for (OrderingKind kind :
         {OrderingKind::LowestFirst, OrderingKind::HighestFirst, OrderingKind::Alternated}) {
      ExperimentConfig cfg = base;
      cfg.ordering = kind;
      cfg.name = base.name + "-" + ordering_name(kind);
      variants.push_back({ordering_name(kind), ordering_name(kind), cfg});
    }
  } else if (suite == "replay") {
    ExperimentConfig nine = base;
    nine.replay = {9, ReplayPolicy::Boosting};
    nine.name = base.name + "-cap9";
    ExperimentConfig fourteen = base;
    fourteen.replay = {14, ReplayPolicy::Boosting};
    fourteen.name = base.name + "-cap14";
    ExperimentConfig balanced = base;
    balanced.replay = {0, ReplayPolicy::Balanced};
    balanced.name = base.name + "-balanced";
    variants.push_back({"9 domains", "cap9", nine});
    variants.push_back({"14 domains", "cap14", fourteen});
    variants.push_back({"Balanced", "balanced", balanced});
  } else if (suite == "corruption") {
    for (const CorruptionLevel& level :
         {CorruptionLevel::mild(), CorruptionLevel::moderate(), CorruptionLevel::high()}) {
      ExperimentConfig cfg = base;
      cfg.corruption = level;
      cfg.name = base.name + "-" + level.name;
      variants.push_back({level.name, level.name, cfg});
    }
  } else {
    throw ConfigError("unknown suite: " + suite + " (expected ordering|replay|corruption)");
  }

  const std::string base_dir = out_dir.empty() ? "" : out_dir + "/base";
  ExperimentOutput base_run = run_experiment(base, base_dir);

  AblationReport report;
  report.suite = suite;
  report.base = make_row("Base", base_run, nullptr);
  for (const Variant& v : variants) {
    const std::string run_dir = out_dir.empty() ? "" : out_dir + "/" + v.slug;
    ExperimentOutput run = run_experiment(v.config, run_dir);
    report.rows.push_back(make_row(v.label, run, &base_run));
  }
  report.text = render_table(report);

  if (!out_dir.empty()) {
    ordered_json j;
    j["suite"] = report.suite;
    auto row_json = [](const AblationRow& row) -> ordered_json {
      return {{"label", row.label},
              {"acc", {{"mean", row.acc.mean}, {"std", row.acc.stddev}}},
              {"la", {{"mean", row.la.mean}, {"std", row.la.stddev}}},
              {"fm", {{"mean", row.fm.mean}, {"std", row.fm.stddev}}},
              {"p_acc_vs_base", row.p_acc_vs_base},
              {"p_la_vs_base", row.p_la_vs_base},
              {"p_fm_vs_base", row.p_fm_vs_base}};
    };
    j["base"] = row_json(report.base);
    ordered_json rows = ordered_json::array();
    for (const AblationRow& row : report.rows) rows.push_back(row_json(row));
    j["rows"] = std::move(rows);
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "ablation.json");
    out << j.dump(2) << '\n';
    std::ofstream txt(fs::path(out_dir) / "ablation.txt");
    txt << report.text;
  }
  return report;
}

std::string render_report(const std::string& run_dir) {
  std::ifstream in(fs::path(run_dir) / "manifest.json");
  if (!in) throw std::runtime_error("cannot open manifest in " + run_dir);
  ordered_json manifest;
  in >> manifest;

  ExperimentConfig cfg;
  config_from_json(manifest.at("config"), cfg);

  ExperimentOutput output;
  output.config = cfg;
  for (const auto& sj : manifest.at("seeds")) {
    SeedOutcome s;
    s.seed = sj.at("seed").get<uint64_t>();
    s.failed = sj.at("failed").get<bool>();
    if (s.failed) {
      s.error = sj.value("error", "");
      output.seeds.push_back(std::move(s));
      continue;
    }
    s.permutation = sj.at("permutation").get<std::vector<int>>();
    s.matrix_rows = sj.at("accuracy_rows").get<std::vector<std::vector<double>>>();
    const int total = static_cast<int>(s.matrix_rows.size());
    AccuracyMatrix matrix(total);
    for (const auto& row : s.matrix_rows) matrix.push_row(row);
    s.result.seed = s.seed;
    s.result.acc = acc(matrix);
    s.result.la = la(matrix);
    if (total >= 2) {
      s.result.fm = fm(matrix);
      s.result.fm_defined = true;
    }
    for (int i = 1; i <= total; ++i) s.result.per_domain_final[i] = matrix.at(total, i);
    if (sj.contains("final_confusions")) {
      for (const auto& [pos, counts] : sj.at("final_confusions").items()) {
        const auto matrix_counts = counts.get<std::vector<std::vector<int>>>();
        s.result.per_domain_prf[std::stoi(pos)] = prf(matrix_counts);
      }
    }
    output.seeds.push_back(std::move(s));
  }

  const ordered_json summary = summary_json(output);
  std::ostringstream os;
  os << summary.dump(2) << '\n';
  return os.str();
}

}  // namespace contdiag
