#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "contdiag/encoded.hpp"
#include "contdiag/rng.hpp"

namespace contdiag {

// Normalized per-domain selection weights after episode k: weight grows with
// the ensemble's empirical risk on the domain; zero for unseen domains.
struct DomainWeights {
  int episode_k = 0;
  std::map<int, double> w;

  double at(int domain) const {
    auto it = w.find(domain);
    return it == w.end() ? 0.0 : it->second;
  }
};

// w[i] proportional to exp(-mean_log_p[i]), normalized over the given map.
// Throws std::invalid_argument for positive mean log-probabilities or keys
// beyond k.
DomainWeights compute_weights(const std::map<int, double>& mean_log_p, int k);

// The current domain plus b-1 distinct past domains drawn from the weights
// (repeated weighted draws, duplicates rejected). Returns every available
// past domain when fewer than b-1 carry positive weight.
std::set<int> select_domains(const DomainWeights& weights, int b, int current_k, Rng& rng);

// Keeps 10% of each admitted domain's train split, at most capacity_domains
// domains (0 = unbounded). last_loss holds the latest mean negative
// log-likelihood of the full ensemble on each stored domain's exemplars.
struct ReplayBuffer {
  double fraction = 0.10;
  int capacity_domains = 0;
  std::map<int, std::vector<EncodedSample>> store;
  std::map<int, double> last_loss;
};

// Uniformly samples fraction * |train| exemplars without replacement. At
// capacity, evicts the stored domain with the lowest last_loss. Throws
// std::invalid_argument on duplicate admission.
void admit_domain(ReplayBuffer& buffer, int domain, const std::vector<EncodedSample>& train,
                  Rng& rng);

// Alternately the highest-loss and lowest-loss stored domains (highest
// first), ties to the lower domain id, until `count` distinct domains.
std::set<int> balanced_pick(const ReplayBuffer& buffer, int count);

// Exemplar images and a loss manifest, for audit (one .mtf file per
// exemplar plus labels.csv and losses.json under dir).
void save_buffer(const ReplayBuffer& buffer, const std::string& dir);

}  // namespace contdiag
