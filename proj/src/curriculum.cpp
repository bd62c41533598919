#include "contdiag/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace contdiag {

const char* ordering_name(OrderingKind k) {
  switch (k) {
    case OrderingKind::LowestFirst: return "LowestFirst";
    case OrderingKind::HighestFirst: return "HighestFirst";
    case OrderingKind::Alternated: return "Alternated";
    case OrderingKind::AsGiven: return "AsGiven";
  }
  return "?";
}

OrderingKind ordering_from_name(const std::string& name) {
  if (name == "LowestFirst") return OrderingKind::LowestFirst;
  if (name == "HighestFirst") return OrderingKind::HighestFirst;
  if (name == "Alternated") return OrderingKind::Alternated;
  if (name == "AsGiven") return OrderingKind::AsGiven;
  throw std::invalid_argument("unknown ordering strategy: " + name);
}

std::vector<int> order_domains(const OrderingStrategy& strategy,
                               const std::vector<int>& domain_ids) {
  if (strategy.kind == OrderingKind::AsGiven) return domain_ids;
  for (int id : domain_ids) {
    if (!strategy.baseline_acc.count(id)) {
      throw std::invalid_argument("missing baseline accuracy for domain " + std::to_string(id));
    }
  }
  std::vector<int> ascending = domain_ids;
  std::sort(ascending.begin(), ascending.end(), [&](int a, int b) {
    const double aa = strategy.baseline_acc.at(a);
    const double ab = strategy.baseline_acc.at(b);
    return aa != ab ? aa < ab : a < b;
  });

  switch (strategy.kind) {
    case OrderingKind::LowestFirst:
      return ascending;
    case OrderingKind::HighestFirst: {
      // Descending accuracy with ties still to the lower id.
      std::vector<int> descending = domain_ids;
      std::sort(descending.begin(), descending.end(), [&](int a, int b) {
        const double aa = strategy.baseline_acc.at(a);
        const double ab = strategy.baseline_acc.at(b);
        return aa != ab ? aa > ab : a < b;
      });
      return descending;
    }
    case OrderingKind::Alternated: {
      std::vector<int> descending = domain_ids;
      std::sort(descending.begin(), descending.end(), [&](int a, int b) {
        const double aa = strategy.baseline_acc.at(a);
        const double ab = strategy.baseline_acc.at(b);
        return aa != ab ? aa > ab : a < b;
      });
      // Both pick directions resolve ties to the lower id, so the low pick
      // walks its own ascending list rather than the descending tail.
      std::vector<int> out;
      std::set<int> picked;
      size_t hi = 0;
      size_t lo = 0;
      bool take_high = true;
      while (out.size() < domain_ids.size()) {
        if (take_high) {
          while (picked.count(descending[hi])) ++hi;
          out.push_back(descending[hi]);
          picked.insert(descending[hi]);
        } else {
          while (picked.count(ascending[lo])) ++lo;
          out.push_back(ascending[lo]);
          picked.insert(ascending[lo]);
        }
        take_high = !take_high;
      }
      return out;
    }
    default:
      return domain_ids;
  }
}

CorruptionLevel CorruptionLevel::from_name(const std::string& name) {
  if (name == "None") return none();
  if (name == "Mild") return mild();
  if (name == "Moderate") return moderate();
  if (name == "High") return high();
  throw std::invalid_argument("unknown corruption level: " + name);
}

DomainDataset corrupt_dataset(const DomainDataset& ds, const CorruptionLevel& level, Rng& rng) {
  DomainDataset out = ds;
  if (level.data_fraction <= 0.0 || out.train.empty()) return out;

  const int count = static_cast<int>(
      std::llround(level.data_fraction * static_cast<double>(out.train.size())));
  if (count == 0) return out;

  std::vector<int> order(out.train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  for (int i = 0; i < count; ++i) {
    const size_t j = i + rng.index(order.size() - i);
    std::swap(order[i], order[j]);
  }
  for (int i = 0; i < count; ++i) {
    std::vector<double>& samples = out.train[order[i]].samples;
    double acc = 0.0;
    for (double v : samples) acc += v * v;
    const double sigma = level.noise_rate * std::sqrt(acc / static_cast<double>(samples.size()));
    for (double& v : samples) v += sigma * rng.gauss();
  }
  return out;
}

}  // namespace contdiag
