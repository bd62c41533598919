#include "contdiag/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace contdiag {

DomainWeights compute_weights(const std::map<int, double>& mean_log_p, int k) {
  if (mean_log_p.empty()) throw std::invalid_argument("no domains to weight");
  double max_neg = -HUGE_VAL;
  for (const auto& [domain, mlp] : mean_log_p) {
    if (domain < 1 || domain > k) {
      throw std::invalid_argument("domain " + std::to_string(domain) + " outside 1..k");
    }
    if (mlp > 0.0) {
      throw std::invalid_argument("mean log-probability cannot be positive");
    }
    max_neg = std::max(max_neg, -mlp);
  }
  DomainWeights weights;
  weights.episode_k = k;
  double total = 0.0;
  for (const auto& [domain, mlp] : mean_log_p) {
    const double v = std::exp(-mlp - max_neg);
    weights.w[domain] = v;
    total += v;
  }
  for (auto& [domain, v] : weights.w) v /= total;
  return weights;
}

std::set<int> select_domains(const DomainWeights& weights, int b, int current_k, Rng& rng) {
  if (b < 1) throw std::invalid_argument("b must be >= 1");
  if (b > current_k) throw std::invalid_argument("b cannot exceed the number of seen domains");
  std::set<int> selected = {current_k};
  if (b == 1 || current_k == 1) return selected;

  std::vector<std::pair<int, double>> candidates;
  for (const auto& [domain, v] : weights.w) {
    if (domain < current_k && v > 0.0) candidates.emplace_back(domain, v);
  }
  const int want = b - 1;
  if (static_cast<int>(candidates.size()) <= want) {
    for (const auto& [domain, v] : candidates) selected.insert(domain);
    return selected;
  }
  double total = 0.0;
  for (const auto& [domain, v] : candidates) total += v;
  while (static_cast<int>(selected.size()) < b) {
    double u = rng.uniform() * total;
    int pick = candidates.back().first;
    for (const auto& [domain, v] : candidates) {
      if (u < v) {
        pick = domain;
        break;
      }
      u -= v;
    }
    selected.insert(pick);  // duplicate draws collapse; redraw continues
  }
  return selected;
}

void admit_domain(ReplayBuffer& buffer, int domain, const std::vector<EncodedSample>& train,
                  Rng& rng) {
  if (buffer.store.count(domain)) {
    throw std::invalid_argument("domain " + std::to_string(domain) + " already admitted");
  }
  if (train.empty()) throw std::invalid_argument("cannot admit an empty train split");

  const int keep = std::max(
      1, static_cast<int>(std::llround(buffer.fraction * static_cast<double>(train.size()))));
  std::vector<int> order(train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  for (int i = 0; i < keep; ++i) {
    const size_t j = i + rng.index(order.size() - i);
    std::swap(order[i], order[j]);
  }
  std::vector<EncodedSample> exemplars;
  exemplars.reserve(keep);
  for (int i = 0; i < keep; ++i) exemplars.push_back(train[order[i]]);
  buffer.store.emplace(domain, std::move(exemplars));

  if (buffer.capacity_domains > 0 &&
      static_cast<int>(buffer.store.size()) > buffer.capacity_domains) {
    // Evict the lowest-risk stored domain; the newcomer has no loss yet and
    // is never the victim.
    int victim = -1;
    double best = HUGE_VAL;
    for (const auto& [d, samples] : buffer.store) {
      if (d == domain) continue;
      auto it = buffer.last_loss.find(d);
      const double loss = it == buffer.last_loss.end() ? HUGE_VAL : it->second;
      if (loss < best || victim == -1) {
        best = loss;
        victim = d;
      }
    }
    buffer.store.erase(victim);
    buffer.last_loss.erase(victim);
  }
}

std::set<int> balanced_pick(const ReplayBuffer& buffer, int count) {
  if (buffer.store.empty()) throw std::invalid_argument("replay buffer is empty");
  std::vector<std::pair<double, int>> by_loss;
  for (const auto& [d, samples] : buffer.store) {
    auto it = buffer.last_loss.find(d);
    by_loss.emplace_back(it == buffer.last_loss.end() ? 0.0 : it->second, d);
  }
  // Ascending loss; equal losses resolve to the lower id.
  std::sort(by_loss.begin(), by_loss.end(),
            [](const auto& a, const auto& b) {
              return a.first != b.first ? a.first < b.first : a.second < b.second;
            });

  std::set<int> picked;
  size_t lo = 0;
  size_t hi = by_loss.size();
  bool take_high = true;
  while (static_cast<int>(picked.size()) < count && lo < hi) {
    if (take_high) {
      // Highest loss; among ties the lower id. Ties sorted ascending by id,
      // so walk back over the tie run.
      size_t pos = hi - 1;
      while (pos > lo && by_loss[pos - 1].first == by_loss[pos].first) --pos;
      picked.insert(by_loss[pos].second);
      std::rotate(by_loss.begin() + pos, by_loss.begin() + pos + 1, by_loss.begin() + hi);
      --hi;
    } else {
      picked.insert(by_loss[lo].second);
      ++lo;
    }
    take_high = !take_high;
  }
  return picked;
}

void save_buffer(const ReplayBuffer& buffer, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream labels(dir + "/labels.csv");
  labels << "domain,index,label\n";
  for (const auto& [d, samples] : buffer.store) {
    const fs::path domain_dir = fs::path(dir) / ("domain_" + std::to_string(d));
    fs::create_directories(domain_dir);
    for (size_t i = 0; i < samples.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "%04zu.mtf", i);
      save_mtf((domain_dir / name).string(), samples[i].image);
      labels << d << ',' << i << ',' << samples[i].label << '\n';
    }
  }
  nlohmann::ordered_json losses;
  for (const auto& [d, loss] : buffer.last_loss) losses[std::to_string(d)] = loss;
  std::ofstream out(dir + "/losses.json");
  out << losses.dump(2) << '\n';
}

}  // namespace contdiag
