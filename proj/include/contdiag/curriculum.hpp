#pragma once

#include <map>
#include <string>
#include <vector>

#include "contdiag/rng.hpp"
#include "contdiag/signal.hpp"

namespace contdiag {

enum class OrderingKind { LowestFirst, HighestFirst, Alternated, AsGiven };

const char* ordering_name(OrderingKind k);
OrderingKind ordering_from_name(const std::string& name);

struct OrderingStrategy {
  OrderingKind kind = OrderingKind::AsGiven;
  std::map<int, double> baseline_acc;  // required unless AsGiven
};

// Permutation of domain_ids by baseline accuracy: ascending, descending, or
// alternating highest/lowest/2nd-highest/... Ties break to the lower id.
std::vector<int> order_domains(const OrderingStrategy& strategy,
                               const std::vector<int>& domain_ids);

struct CorruptionLevel {
  std::string name = "None";
  double data_fraction = 0.0;
  double noise_rate = 0.0;

  static CorruptionLevel none() { return {"None", 0.0, 0.0}; }
  static CorruptionLevel mild() { return {"Mild", 0.20, 0.05}; }
  static CorruptionLevel moderate() { return {"Moderate", 0.30, 0.15}; }
  static CorruptionLevel high() { return {"High", 0.40, 0.30}; }
  static CorruptionLevel from_name(const std::string& name);
};

// Adds Gaussian noise (std = noise_rate * window RMS) to a uniformly chosen
// round(data_fraction * |train|) subset of raw train windows. Labels and the
// test split are untouched. None returns the dataset bit-identical.
DomainDataset corrupt_dataset(const DomainDataset& ds, const CorruptionLevel& level, Rng& rng);

}  // namespace contdiag
