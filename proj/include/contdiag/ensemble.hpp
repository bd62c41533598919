#pragma once

#include <deque>
#include <map>
#include <set>
#include <vector>

#include "contdiag/encoded.hpp"
#include "contdiag/net.hpp"

namespace contdiag {

// The model spawned at one episode: a fresh trunk plus one classifier head
// per selected domain. Frozen once its episode finishes.
struct EpisodeModel {
  int episode_k = 0;
  FeatureGenerator fg;
  std::map<int, ClassifierHead> heads;
  std::set<int> trained_domains;
};

struct EnsembleState {
  // models[l-1] was created at episode l; deque keeps references stable as
  // episodes append.
  std::deque<EpisodeModel> models;
  std::map<int, int> domain_classes;  // domain -> class count
};

// Requested domain has no head in any model.
struct NoModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Appends a freshly initialized model for episode k covering `selected`.
// Preconditions: k == models.size()+1, k in selected, all of selected <= k,
// every selected domain registered in domain_classes.
EpisodeModel& new_episode(EnsembleState& state, int k, const std::set<int>& selected,
                          int input_size, uint64_t init_seed);

// Mean of the class-probability outputs of every model holding a head for
// the domain. Inference mode.
std::vector<double> predict_domain(const EnsembleState& state, const MtfImage& image, int domain);

// Models contributing to a domain's prediction, in episode order.
std::vector<const EpisodeModel*> contributors(const EnsembleState& state, int domain);

struct EpisodeTrainResult {
  std::map<int, double> mean_log_p;  // per trained domain, on its episode data
  double final_loss = 0.0;
  int batches = 0;
};

// Trains the episode model with domain-balanced mini-batches: every batch
// carries floor(batch_size/b) samples from each of the b trained domains,
// replay domains resampled with replacement. Past models are untouched.
EpisodeTrainResult train_episode(EpisodeModel& model, const EncodedDomain& current,
                                 const std::map<int, const std::vector<EncodedSample>*>& replay,
                                 const TrainingConfig& hyper);

// Mean log-probability of the true labels under the full ensemble (used for
// the boosting weights).
double ensemble_mean_log_p(const EnsembleState& state, const std::vector<EncodedSample>& samples,
                           int domain);

// Fraction of samples whose argmax ensemble prediction matches the label.
double ensemble_accuracy(const EnsembleState& state, const std::vector<EncodedSample>& samples,
                         int domain);

// Argmax confusion counts, confusion[true][predicted].
std::vector<std::vector<int>> ensemble_confusion(const EnsembleState& state,
                                                 const std::vector<EncodedSample>& samples,
                                                 int domain);

// Single-model train-split accuracy (plasticity bookkeeping).
double model_accuracy(const EpisodeModel& model, const std::vector<EncodedSample>& samples,
                      int domain);

}  // namespace contdiag
