#include "contdiag/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace contdiag {

EpisodeModel& new_episode(EnsembleState& state, int k, const std::set<int>& selected,
                          int input_size, uint64_t init_seed) {
  if (k != static_cast<int>(state.models.size()) + 1) {
    throw std::invalid_argument("episodes must be created in order");
  }
  if (!selected.count(k)) {
    throw std::invalid_argument("selected domains must include the current domain");
  }
  for (int d : selected) {
    if (d < 1 || d > k) throw std::invalid_argument("selected domain outside 1..k");
    if (!state.domain_classes.count(d)) {
      throw std::invalid_argument("domain " + std::to_string(d) + " has no registered classes");
    }
  }
  Rng rng(hash_combine(init_seed, static_cast<uint64_t>(k)));
  EpisodeModel model;
  model.episode_k = k;
  model.fg = make_feature_generator(input_size, rng);
  const int feat = model.fg.dims().feat;
  for (int d : selected) {
    model.heads.emplace(d, make_classifier_head(feat, state.domain_classes.at(d), rng));
  }
  model.trained_domains = selected;
  state.models.push_back(std::move(model));
  return state.models.back();
}

std::vector<const EpisodeModel*> contributors(const EnsembleState& state, int domain) {
  std::vector<const EpisodeModel*> out;
  for (const EpisodeModel& m : state.models) {
    if (m.trained_domains.count(domain)) out.push_back(&m);
  }
  return out;
}

std::vector<double> predict_domain(const EnsembleState& state, const MtfImage& image, int domain) {
  const auto models = contributors(state, domain);
  if (models.empty()) {
    throw NoModelError("no model has a head for domain " + std::to_string(domain));
  }
  std::vector<double> acc;
  for (const EpisodeModel* m : models) {
    const std::vector<double> p = forward(m->fg, m->heads.at(domain), image, false);
    if (acc.empty()) {
      acc = p;
    } else {
      for (size_t i = 0; i < acc.size(); ++i) acc[i] += p[i];
    }
  }
  for (double& v : acc) v /= static_cast<double>(models.size());
  return acc;
}

namespace {

// Epoch stream over the current domain: reshuffled each pass.
struct EpochStream {
  const std::vector<EncodedSample>* data;
  std::vector<int> order;
  size_t cursor = 0;

  explicit EpochStream(const std::vector<EncodedSample>& d) : data(&d) {
    order.resize(d.size());
    for (size_t i = 0; i < d.size(); ++i) order[i] = static_cast<int>(i);
  }

  int next(Rng& rng) {
    if (cursor == order.size()) {
      for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
      cursor = 0;
    }
    return order[cursor++];
  }
};

}  // namespace

namespace {

std::vector<double> pack_samples(const std::vector<EncodedSample>& samples, int input) {
  const size_t plane = static_cast<size_t>(input) * input;
  std::vector<double> images(samples.size() * plane);
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].image.size != input) {
      throw std::invalid_argument("encoded image size mismatch");
    }
    std::memcpy(images.data() + i * plane, samples[i].image.pixels.data(),
                sizeof(double) * plane);
  }
  return images;
}

// Inference probabilities of one model's head over a packed batch; identical
// arithmetic to per-image forward().
std::vector<double> model_probs(const EpisodeModel& model, const ClassifierHead& head,
                                const double* images, int n) {
  const NetDims dims = model.fg.dims();
  std::vector<double> feats(static_cast<size_t>(n) * dims.feat);
  fg_forward(model.fg, images, n, false, nullptr, feats.data());
  std::vector<double> logits(static_cast<size_t>(n) * head.fc.out_dim);
  kernels::dense_forward(feats.data(), head.fc.w.data(), head.fc.b.data(), n, dims.feat,
                         head.fc.out_dim, logits.data());
  return softmax_rows(logits.data(), n, head.fc.out_dim);
}

// Eq.-style average over contributing models for a whole sample batch.
std::vector<double> ensemble_probs(const EnsembleState& state,
                                   const std::vector<EncodedSample>& samples, int domain) {
  if (samples.empty()) throw std::invalid_argument("no samples to evaluate");
  const auto models = contributors(state, domain);
  if (models.empty()) {
    throw NoModelError("no model has a head for domain " + std::to_string(domain));
  }
  const int n = static_cast<int>(samples.size());
  const std::vector<double> images = pack_samples(samples, models[0]->fg.input_size);
  std::vector<double> acc;
  for (const EpisodeModel* m : models) {
    const std::vector<double> p = model_probs(*m, m->heads.at(domain), images.data(), n);
    if (acc.empty()) {
      acc = p;
    } else {
      for (size_t i = 0; i < acc.size(); ++i) acc[i] += p[i];
    }
  }
  for (double& v : acc) v /= static_cast<double>(models.size());
  return acc;
}

int argmax_row(const double* row, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

}  // namespace

EpisodeTrainResult train_episode(EpisodeModel& model, const EncodedDomain& current,
                                 const std::map<int, const std::vector<EncodedSample>*>& replay,
                                 const TrainingConfig& hyper) {
  const int k = model.episode_k;
  std::set<int> expected = model.trained_domains;
  expected.erase(k);
  std::set<int> provided;
  for (const auto& [d, samples] : replay) {
    provided.insert(d);
    if (!samples || samples->empty()) {
      throw std::invalid_argument("empty replay list for domain " + std::to_string(d));
    }
  }
  if (provided != expected) {
    throw std::invalid_argument("replay must cover exactly the selected past domains");
  }
  if (current.train.empty()) throw std::invalid_argument("current domain has no training data");

  const int b = static_cast<int>(model.trained_domains.size());
  const int per_domain = std::max(1, hyper.batch_size / b);
  const int batch = per_domain * b;
  const int input = model.fg.input_size;
  const size_t plane = static_cast<size_t>(input) * input;

  // Ordered domain list: current first, then replayed ascending.
  std::vector<int> domains = {k};
  for (int d : expected) domains.push_back(d);

  FgGrad fg_grad = make_grad(model.fg);
  FgGrad fg_vel = make_grad(model.fg);
  std::map<int, HeadGrad> head_grads, head_vels;
  for (const auto& [d, head] : model.heads) {
    head_grads.emplace(d, make_grad(head));
    head_vels.emplace(d, make_grad(head));
  }

  Rng rng(hash_combine(hyper.seed, static_cast<uint64_t>(k)));
  EpochStream current_stream(current.train);
  const int batches_per_epoch =
      static_cast<int>((current.train.size() + per_domain - 1) / per_domain);

  std::vector<double> images(static_cast<size_t>(batch) * plane);
  EpisodeTrainResult result;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (int step = 0; step < batches_per_epoch; ++step) {
      std::vector<HeadBatch> head_batches;
      int row = 0;
      for (int d : domains) {
        HeadBatch hb;
        hb.head = &model.heads.at(d);
        hb.grad = &head_grads.at(d);
        const std::vector<EncodedSample>& pool =
            (d == k) ? current.train : *replay.at(d);
        for (int r = 0; r < per_domain; ++r) {
          const int idx = (d == k) ? current_stream.next(rng)
                                   : static_cast<int>(rng.index(pool.size()));
          const EncodedSample& sample = pool[idx];
          if (sample.image.size != input) {
            throw std::invalid_argument("encoded image size mismatch");
          }
          std::memcpy(images.data() + static_cast<size_t>(row) * plane,
                      sample.image.pixels.data(), sizeof(double) * plane);
          hb.samples.push_back(row);
          hb.labels.push_back(sample.label);
          ++row;
        }
        head_batches.push_back(std::move(hb));
      }

      BnStats stats;
      result.final_loss =
          multi_loss_and_grad(model.fg, images.data(), batch, head_batches, fg_grad, &stats);
      sgd_step(model.fg, fg_grad, fg_vel, hyper.lr, hyper.momentum);
      for (auto& [d, head] : model.heads) {
        sgd_step(head, head_grads.at(d), head_vels.at(d), hyper.lr, hyper.momentum);
      }
      apply_bn_update(model.fg, stats);
      ++result.batches;
    }
  }

  // Post-training pass: mean log-likelihood of this episode's model on the
  // data each domain contributed.
  for (int d : domains) {
    const std::vector<EncodedSample>& pool = (d == k) ? current.train : *replay.at(d);
    const ClassifierHead& head = model.heads.at(d);
    const std::vector<double> pixels = pack_samples(pool, input);
    const std::vector<double> probs =
        model_probs(model, head, pixels.data(), static_cast<int>(pool.size()));
    double acc = 0.0;
    for (size_t i = 0; i < pool.size(); ++i) {
      acc += std::log(std::max(probs[i * head.fc.out_dim + pool[i].label], 1e-300));
    }
    result.mean_log_p[d] = acc / static_cast<double>(pool.size());
  }
  return result;
}


double ensemble_mean_log_p(const EnsembleState& state, const std::vector<EncodedSample>& samples,
                           int domain) {
  const int nc = state.domain_classes.at(domain);
  const std::vector<double> probs = ensemble_probs(state, samples, domain);
  double acc = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    acc += std::log(std::max(probs[i * nc + samples[i].label], 1e-300));
  }
  return acc / static_cast<double>(samples.size());
}

double ensemble_accuracy(const EnsembleState& state, const std::vector<EncodedSample>& samples,
                         int domain) {
  const int nc = state.domain_classes.at(domain);
  const std::vector<double> probs = ensemble_probs(state, samples, domain);
  int correct = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (argmax_row(probs.data() + i * nc, nc) == samples[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

std::vector<std::vector<int>> ensemble_confusion(const EnsembleState& state,
                                                 const std::vector<EncodedSample>& samples,
                                                 int domain) {
  const int nc = state.domain_classes.at(domain);
  const std::vector<double> probs = ensemble_probs(state, samples, domain);
  std::vector<std::vector<int>> confusion(nc, std::vector<int>(nc, 0));
  for (size_t i = 0; i < samples.size(); ++i) {
    confusion[samples[i].label][argmax_row(probs.data() + i * nc, nc)]++;
  }
  return confusion;
}

double model_accuracy(const EpisodeModel& model, const std::vector<EncodedSample>& samples,
                      int domain) {
  if (samples.empty()) throw std::invalid_argument("no samples to evaluate");
  const ClassifierHead& head = model.heads.at(domain);
  const std::vector<double> images = pack_samples(samples, model.fg.input_size);
  const std::vector<double> probs =
      model_probs(model, head, images.data(), static_cast<int>(samples.size()));
  int correct = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (argmax_row(probs.data() + i * head.fc.out_dim, head.fc.out_dim) == samples[i].label) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace contdiag
