#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "contdiag/kernels.hpp"
#include "contdiag/mtf.hpp"
#include "contdiag/rng.hpp"

namespace contdiag {

// Training diverged or produced a non-finite value.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kConvChannels = 80;
inline constexpr int kKernelSize = 3;
inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnDecay = 0.9;

struct Conv2d {
  int out_ch = 0, in_ch = 0, k = kKernelSize;
  std::vector<double> w;  // [out_ch][in_ch][k][k]
  std::vector<double> b;  // [out_ch]
};

struct BatchNorm {
  int ch = 0;
  std::vector<double> gamma, beta;
  std::vector<double> run_mean, run_var;
};

struct Dense {
  int in_dim = 0, out_dim = 0;
  std::vector<double> w;  // [out_dim][in_dim]
  std::vector<double> b;  // [out_dim]
};

// Spatial sizes through conv(3x3, valid) -> pool(2x2) -> conv -> pool.
struct NetDims {
  int input = 0, conv1 = 0, pool1 = 0, conv2 = 0, pool2 = 0, feat = 0;
  static NetDims from_input(int s);
};

// Shared trunk: two 80-filter 3x3 conv layers, each batch-normalized,
// rectified and 2x2 max-pooled.
struct FeatureGenerator {
  int input_size = 0;
  Conv2d conv1, conv2;
  BatchNorm bn1, bn2;
  NetDims dims() const { return NetDims::from_input(input_size); }
};

struct ClassifierHead {
  Dense fc;
  int n_classes() const { return fc.out_dim; }
};

FeatureGenerator make_feature_generator(int input_size, Rng& rng);
ClassifierHead make_classifier_head(int feat_dim, int n_classes, Rng& rng);

struct ConvGrad {
  std::vector<double> w, b;
};
struct BnGrad {
  std::vector<double> gamma, beta;
};
struct DenseGrad {
  std::vector<double> w, b;
};
struct FgGrad {
  ConvGrad conv1, conv2;
  BnGrad bn1, bn2;
};
struct HeadGrad {
  DenseGrad fc;
};

FgGrad make_grad(const FeatureGenerator& fg);
HeadGrad make_grad(const ClassifierHead& head);

// Batch statistics observed by one training-mode forward pass.
struct BnStats {
  std::vector<double> mean1, var1, mean2, var2;
};

struct FgCache {
  int batch = 0;
  std::vector<double> input;
  std::vector<double> conv1_out, bn1_xhat, relu1, pool1_out;
  std::vector<int> pool1_argmax;
  std::vector<double> conv2_out, bn2_xhat, relu2, features;
  std::vector<int> pool2_argmax;
  BnStats stats;
};

// images: [batch][input][input]; features_out: [batch][feat]. cache may be
// null for inference. Never mutates running statistics.
void fg_forward(const FeatureGenerator& fg, const double* images, int batch, bool training,
                FgCache* cache, double* features_out);

// dfeatures: [batch][feat] -> parameter gradients (overwritten).
void fg_backward(const FeatureGenerator& fg, const FgCache& cache, const double* dfeatures,
                 FgGrad& grad);

std::vector<double> softmax_rows(const double* logits, int batch, int classes);

// Single-image probability vector (spec op). Throws std::invalid_argument on
// a shape mismatch.
std::vector<double> forward(const FeatureGenerator& fg, const ClassifierHead& head,
                            const MtfImage& image, bool training);

// One head's share of a mixed batch: which sample rows it owns.
struct HeadBatch {
  const ClassifierHead* head = nullptr;
  HeadGrad* grad = nullptr;
  std::vector<int> samples;
  std::vector<int> labels;  // parallel to samples
};

// Mean over heads of each head's mean cross-entropy. Gradients are written
// into grad and each HeadBatch::grad; batch statistics into stats when given.
// Throws NumericError on a non-finite loss.
double multi_loss_and_grad(const FeatureGenerator& fg, const double* images, int batch,
                           std::vector<HeadBatch>& heads, FgGrad& grad, BnStats* stats);

// Single-head convenience (spec op): mean cross-entropy over the batch.
double loss_and_grad(const FeatureGenerator& fg, const ClassifierHead& head,
                     const std::vector<const MtfImage*>& images, const std::vector<int>& labels,
                     FgGrad& fg_grad, HeadGrad& head_grad, BnStats* stats);

// Training-mode batch loss with no gradient work; used by finite differences.
double batch_loss(const FeatureGenerator& fg, const ClassifierHead& head,
                  const std::vector<const MtfImage*>& images, const std::vector<int>& labels);

// velocity = momentum * velocity - lr * grad; param += velocity.
void sgd_update(std::vector<double>& param, const std::vector<double>& grad,
                std::vector<double>& velocity, double lr, double momentum);
void sgd_step(FeatureGenerator& fg, const FgGrad& grad, FgGrad& velocity, double lr,
              double momentum);
void sgd_step(ClassifierHead& head, const HeadGrad& grad, HeadGrad& velocity, double lr,
              double momentum);

// Exponential running-statistics update after a training step.
void apply_bn_update(FeatureGenerator& fg, const BnStats& stats, double decay = kBnDecay);

struct GradCheckEntry {
  std::string tensor;
  int checked = 0;
  double max_rel_err = 0.0;
};
struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Central-difference verification of every parameter tensor, sampling up to
// samples_per_tensor entries of each. Throws std::invalid_argument for
// epsilon <= 0.
GradCheckReport grad_check(const FeatureGenerator& fg, const ClassifierHead& head,
                           const std::vector<const MtfImage*>& images,
                           const std::vector<int>& labels, double epsilon, double tolerance,
                           uint64_t seed, int samples_per_tensor = 50);

struct TrainingConfig {
  double lr = 0.01;
  double momentum = 0.9;
  int epochs = 20;
  int batch_size = 16;
  uint64_t seed = 0;
};

// Versioned binary checkpoint ("DFNN"); layout documented in README.md.
std::vector<unsigned char> model_bytes(const FeatureGenerator& fg,
                                       const std::map<int, ClassifierHead>& heads);
void save_checkpoint(const std::string& path, const FeatureGenerator& fg,
                     const std::map<int, ClassifierHead>& heads);
std::pair<FeatureGenerator, std::map<int, ClassifierHead>> load_checkpoint(
    const std::string& path);

uint64_t fnv1a64(const unsigned char* data, size_t n);

}  // namespace contdiag
