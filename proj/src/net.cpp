#include "contdiag/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace contdiag {

NetDims NetDims::from_input(int s) {
  NetDims d;
  d.input = s;
  d.conv1 = s - kKernelSize + 1;
  d.pool1 = d.conv1 / 2;
  d.conv2 = d.pool1 - kKernelSize + 1;
  d.pool2 = d.conv2 / 2;
  d.feat = kConvChannels * d.pool2 * d.pool2;
  if (d.pool2 < 1) throw std::invalid_argument("input size too small for the trunk");
  return d;
}

namespace {

std::vector<double> uniform_init(size_t n, double limit, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-limit, limit);
  return v;
}

}  // namespace

FeatureGenerator make_feature_generator(int input_size, Rng& rng) {
  FeatureGenerator fg;
  fg.input_size = input_size;
  (void)NetDims::from_input(input_size);  // validates

  fg.conv1.out_ch = kConvChannels;
  fg.conv1.in_ch = 1;
  const double l1 = std::sqrt(1.0 / (fg.conv1.in_ch * kKernelSize * kKernelSize));
  fg.conv1.w = uniform_init(static_cast<size_t>(kConvChannels) * 1 * kKernelSize * kKernelSize, l1,
                            rng);
  fg.conv1.b = uniform_init(kConvChannels, l1, rng);

  fg.conv2.out_ch = kConvChannels;
  fg.conv2.in_ch = kConvChannels;
  const double l2 = std::sqrt(1.0 / (fg.conv2.in_ch * kKernelSize * kKernelSize));
  fg.conv2.w = uniform_init(
      static_cast<size_t>(kConvChannels) * kConvChannels * kKernelSize * kKernelSize, l2, rng);
  fg.conv2.b = uniform_init(kConvChannels, l2, rng);

  for (BatchNorm* bn : {&fg.bn1, &fg.bn2}) {
    bn->ch = kConvChannels;
    bn->gamma.assign(kConvChannels, 1.0);
    bn->beta.assign(kConvChannels, 0.0);
    bn->run_mean.assign(kConvChannels, 0.0);
    bn->run_var.assign(kConvChannels, 1.0);
  }
  return fg;
}

ClassifierHead make_classifier_head(int feat_dim, int n_classes, Rng& rng) {
  ClassifierHead head;
  head.fc.in_dim = feat_dim;
  head.fc.out_dim = n_classes;
  const double l = std::sqrt(1.0 / feat_dim);
  head.fc.w = uniform_init(static_cast<size_t>(feat_dim) * n_classes, l, rng);
  head.fc.b = uniform_init(n_classes, l, rng);
  return head;
}

FgGrad make_grad(const FeatureGenerator& fg) {
  FgGrad g;
  g.conv1.w.assign(fg.conv1.w.size(), 0.0);
  g.conv1.b.assign(fg.conv1.b.size(), 0.0);
  g.conv2.w.assign(fg.conv2.w.size(), 0.0);
  g.conv2.b.assign(fg.conv2.b.size(), 0.0);
  g.bn1.gamma.assign(fg.bn1.gamma.size(), 0.0);
  g.bn1.beta.assign(fg.bn1.beta.size(), 0.0);
  g.bn2.gamma.assign(fg.bn2.gamma.size(), 0.0);
  g.bn2.beta.assign(fg.bn2.beta.size(), 0.0);
  return g;
}

HeadGrad make_grad(const ClassifierHead& head) {
  HeadGrad g;
  g.fc.w.assign(head.fc.w.size(), 0.0);
  g.fc.b.assign(head.fc.b.size(), 0.0);
  return g;
}

void fg_forward(const FeatureGenerator& fg, const double* images, int batch, bool training,
                FgCache* cache, double* features_out) {
  const NetDims d = fg.dims();
  const int C = kConvChannels;

  FgCache local;
  FgCache& c = cache ? *cache : local;
  c.batch = batch;
  c.input.assign(images, images + static_cast<size_t>(batch) * d.input * d.input);

  // conv1 -> bn1 -> relu -> pool
  ConvShape s1{batch, 1, d.input, d.input, C, kKernelSize};
  c.conv1_out.resize(static_cast<size_t>(batch) * C * d.conv1 * d.conv1);
  kernels::conv_forward(c.input.data(), fg.conv1.w.data(), fg.conv1.b.data(), s1,
                        c.conv1_out.data());

  c.relu1.resize(c.conv1_out.size());
  c.stats.mean1.resize(C);
  c.stats.var1.resize(C);
  if (training) {
    c.bn1_xhat.resize(c.conv1_out.size());
    kernels::bn_forward_train(c.conv1_out.data(), batch, C,
                              static_cast<long long>(d.conv1) * d.conv1, fg.bn1.gamma.data(),
                              fg.bn1.beta.data(), kBnEps, c.relu1.data(), c.stats.mean1.data(),
                              c.stats.var1.data(), c.bn1_xhat.data());
  } else {
    kernels::bn_forward_eval(c.conv1_out.data(), batch, C,
                             static_cast<long long>(d.conv1) * d.conv1, fg.bn1.gamma.data(),
                             fg.bn1.beta.data(), fg.bn1.run_mean.data(), fg.bn1.run_var.data(),
                             kBnEps, c.relu1.data());
  }
  kernels::relu_forward(c.relu1.data(), static_cast<long long>(c.relu1.size()));

  c.pool1_out.resize(static_cast<size_t>(batch) * C * d.pool1 * d.pool1);
  c.pool1_argmax.resize(c.pool1_out.size());
  kernels::maxpool_forward(c.relu1.data(), batch, C, d.conv1, d.conv1, c.pool1_out.data(),
                           c.pool1_argmax.data());

  // conv2 -> bn2 -> relu -> pool
  ConvShape s2{batch, C, d.pool1, d.pool1, C, kKernelSize};
  c.conv2_out.resize(static_cast<size_t>(batch) * C * d.conv2 * d.conv2);
  kernels::conv_forward(c.pool1_out.data(), fg.conv2.w.data(), fg.conv2.b.data(), s2,
                        c.conv2_out.data());

  c.relu2.resize(c.conv2_out.size());
  c.stats.mean2.resize(C);
  c.stats.var2.resize(C);
  if (training) {
    c.bn2_xhat.resize(c.conv2_out.size());
    kernels::bn_forward_train(c.conv2_out.data(), batch, C,
                              static_cast<long long>(d.conv2) * d.conv2, fg.bn2.gamma.data(),
                              fg.bn2.beta.data(), kBnEps, c.relu2.data(), c.stats.mean2.data(),
                              c.stats.var2.data(), c.bn2_xhat.data());
  } else {
    kernels::bn_forward_eval(c.conv2_out.data(), batch, C,
                             static_cast<long long>(d.conv2) * d.conv2, fg.bn2.gamma.data(),
                             fg.bn2.beta.data(), fg.bn2.run_mean.data(), fg.bn2.run_var.data(),
                             kBnEps, c.relu2.data());
  }
  kernels::relu_forward(c.relu2.data(), static_cast<long long>(c.relu2.size()));

  c.features.resize(static_cast<size_t>(batch) * d.feat);
  c.pool2_argmax.resize(c.features.size());
  kernels::maxpool_forward(c.relu2.data(), batch, C, d.conv2, d.conv2, c.features.data(),
                           c.pool2_argmax.data());

  std::memcpy(features_out, c.features.data(), sizeof(double) * c.features.size());
}

void fg_backward(const FeatureGenerator& fg, const FgCache& c, const double* dfeatures,
                 FgGrad& grad) {
  const NetDims d = fg.dims();
  const int C = kConvChannels;
  const int batch = c.batch;

  std::vector<double> d_relu2(c.relu2.size());
  kernels::maxpool_backward(dfeatures, c.pool2_argmax.data(), batch, C, d.conv2, d.conv2,
                            d_relu2.data());
  kernels::relu_backward(c.relu2.data(), d_relu2.data(), static_cast<long long>(d_relu2.size()));

  std::vector<double> d_conv2(c.conv2_out.size());
  kernels::bn_backward(c.bn2_xhat.data(), c.stats.var2.data(), fg.bn2.gamma.data(), batch, C,
                       static_cast<long long>(d.conv2) * d.conv2, kBnEps, d_relu2.data(),
                       d_conv2.data(), grad.bn2.gamma.data(), grad.bn2.beta.data());

  ConvShape s2{batch, C, d.pool1, d.pool1, C, kKernelSize};
  std::vector<double> d_pool1(c.pool1_out.size());
  kernels::conv_backward(c.pool1_out.data(), fg.conv2.w.data(), s2, d_conv2.data(),
                         d_pool1.data(), grad.conv2.w.data(), grad.conv2.b.data());

  std::vector<double> d_relu1(c.relu1.size());
  kernels::maxpool_backward(d_pool1.data(), c.pool1_argmax.data(), batch, C, d.conv1, d.conv1,
                            d_relu1.data());
  kernels::relu_backward(c.relu1.data(), d_relu1.data(), static_cast<long long>(d_relu1.size()));

  std::vector<double> d_conv1(c.conv1_out.size());
  kernels::bn_backward(c.bn1_xhat.data(), c.stats.var1.data(), fg.bn1.gamma.data(), batch, C,
                       static_cast<long long>(d.conv1) * d.conv1, kBnEps, d_relu1.data(),
                       d_conv1.data(), grad.bn1.gamma.data(), grad.bn1.beta.data());

  ConvShape s1{batch, 1, d.input, d.input, C, kKernelSize};
  kernels::conv_backward(c.input.data(), fg.conv1.w.data(), s1, d_conv1.data(), nullptr,
                         grad.conv1.w.data(), grad.conv1.b.data());
}

std::vector<double> softmax_rows(const double* logits, int batch, int classes) {
  std::vector<double> probs(static_cast<size_t>(batch) * classes);
  for (int b = 0; b < batch; ++b) {
    const double* row = logits + static_cast<long long>(b) * classes;
    double* out = probs.data() + static_cast<long long>(b) * classes;
    double mx = row[0];
    for (int k = 1; k < classes; ++k) mx = std::max(mx, row[k]);
    double z = 0.0;
    for (int k = 0; k < classes; ++k) {
      out[k] = std::exp(row[k] - mx);
      z += out[k];
    }
    for (int k = 0; k < classes; ++k) out[k] /= z;
  }
  return probs;
}

std::vector<double> forward(const FeatureGenerator& fg, const ClassifierHead& head,
                            const MtfImage& image, bool training) {
  if (image.size != fg.input_size) {
    throw std::invalid_argument("image size does not match the network input size");
  }
  const NetDims d = fg.dims();
  if (head.fc.in_dim != d.feat) {
    throw std::invalid_argument("head input dimension does not match the trunk");
  }
  std::vector<double> feats(d.feat);
  fg_forward(fg, image.pixels.data(), 1, training, nullptr, feats.data());
  std::vector<double> logits(head.fc.out_dim);
  kernels::dense_forward(feats.data(), head.fc.w.data(), head.fc.b.data(), 1, head.fc.in_dim,
                         head.fc.out_dim, logits.data());
  return softmax_rows(logits.data(), 1, head.fc.out_dim);
}

double multi_loss_and_grad(const FeatureGenerator& fg, const double* images, int batch,
                           std::vector<HeadBatch>& heads, FgGrad& grad, BnStats* stats) {
  const NetDims d = fg.dims();
  FgCache cache;
  std::vector<double> feats(static_cast<size_t>(batch) * d.feat);
  fg_forward(fg, images, batch, true, &cache, feats.data());
  if (stats) *stats = cache.stats;

  std::vector<double> dfeats(feats.size(), 0.0);
  const double group_scale = 1.0 / static_cast<double>(heads.size());
  double loss = 0.0;

  for (HeadBatch& hb : heads) {
    const int m = static_cast<int>(hb.samples.size());
    if (m == 0) throw std::invalid_argument("head with no samples in batch");
    const int nc = hb.head->fc.out_dim;
    std::vector<double> gf(static_cast<size_t>(m) * d.feat);
    for (int r = 0; r < m; ++r) {
      std::memcpy(gf.data() + static_cast<size_t>(r) * d.feat,
                  feats.data() + static_cast<size_t>(hb.samples[r]) * d.feat,
                  sizeof(double) * d.feat);
    }
    std::vector<double> logits(static_cast<size_t>(m) * nc);
    kernels::dense_forward(gf.data(), hb.head->fc.w.data(), hb.head->fc.b.data(), m, d.feat, nc,
                           logits.data());
    std::vector<double> probs = softmax_rows(logits.data(), m, nc);

    double head_loss = 0.0;
    std::vector<double> dlogits(logits.size());
    const double scale = group_scale / static_cast<double>(m);
    for (int r = 0; r < m; ++r) {
      const int y = hb.labels[r];
      if (y < 0 || y >= nc) throw std::invalid_argument("label out of range");
      const double p = probs[static_cast<size_t>(r) * nc + y];
      head_loss += -std::log(std::max(p, 1e-300));
      for (int k = 0; k < nc; ++k) {
        dlogits[static_cast<size_t>(r) * nc + k] =
            (probs[static_cast<size_t>(r) * nc + k] - (k == y ? 1.0 : 0.0)) * scale;
      }
    }
    loss += head_loss / static_cast<double>(m);

    std::vector<double> dgf(gf.size());
    kernels::dense_backward(gf.data(), hb.head->fc.w.data(), m, d.feat, nc, dlogits.data(),
                            dgf.data(), hb.grad->fc.w.data(), hb.grad->fc.b.data());
    for (int r = 0; r < m; ++r) {
      double* dst = dfeats.data() + static_cast<size_t>(hb.samples[r]) * d.feat;
      const double* src = dgf.data() + static_cast<size_t>(r) * d.feat;
      for (int i = 0; i < d.feat; ++i) dst[i] += src[i];
    }
  }
  loss *= group_scale;
  if (!std::isfinite(loss)) throw NumericError("non-finite training loss");

  fg_backward(fg, cache, dfeats.data(), grad);
  return loss;
}

namespace {

std::vector<double> pack_images(const std::vector<const MtfImage*>& images, int input_size) {
  const size_t plane = static_cast<size_t>(input_size) * input_size;
  std::vector<double> data(images.size() * plane);
  for (size_t i = 0; i < images.size(); ++i) {
    if (images[i]->size != input_size) {
      throw std::invalid_argument("image size does not match the network input size");
    }
    std::memcpy(data.data() + i * plane, images[i]->pixels.data(), sizeof(double) * plane);
  }
  return data;
}

}  // namespace

double loss_and_grad(const FeatureGenerator& fg, const ClassifierHead& head,
                     const std::vector<const MtfImage*>& images, const std::vector<int>& labels,
                     FgGrad& fg_grad, HeadGrad& head_grad, BnStats* stats) {
  if (images.empty() || images.size() != labels.size()) {
    throw std::invalid_argument("batch must be non-empty with matching labels");
  }
  std::vector<double> data = pack_images(images, fg.input_size);
  std::vector<HeadBatch> heads(1);
  heads[0].head = &head;
  heads[0].grad = &head_grad;
  heads[0].samples.resize(images.size());
  for (size_t i = 0; i < images.size(); ++i) heads[0].samples[i] = static_cast<int>(i);
  heads[0].labels = labels;
  return multi_loss_and_grad(fg, data.data(), static_cast<int>(images.size()), heads, fg_grad,
                             stats);
}

double batch_loss(const FeatureGenerator& fg, const ClassifierHead& head,
                  const std::vector<const MtfImage*>& images, const std::vector<int>& labels) {
  const NetDims d = fg.dims();
  std::vector<double> data = pack_images(images, fg.input_size);
  const int batch = static_cast<int>(images.size());
  std::vector<double> feats(static_cast<size_t>(batch) * d.feat);
  fg_forward(fg, data.data(), batch, true, nullptr, feats.data());
  std::vector<double> logits(static_cast<size_t>(batch) * head.fc.out_dim);
  kernels::dense_forward(feats.data(), head.fc.w.data(), head.fc.b.data(), batch, d.feat,
                         head.fc.out_dim, logits.data());
  std::vector<double> probs = softmax_rows(logits.data(), batch, head.fc.out_dim);
  double loss = 0.0;
  for (int r = 0; r < batch; ++r) {
    loss += -std::log(std::max(probs[static_cast<size_t>(r) * head.fc.out_dim + labels[r]],
                               1e-300));
  }
  return loss / static_cast<double>(batch);
}

void sgd_update(std::vector<double>& param, const std::vector<double>& grad,
                std::vector<double>& velocity, double lr, double momentum) {
  if (lr <= 0.0) throw std::invalid_argument("learning rate must be positive");
  if (velocity.size() != param.size()) velocity.assign(param.size(), 0.0);
  for (size_t i = 0; i < param.size(); ++i) {
    velocity[i] = momentum * velocity[i] - lr * grad[i];
    param[i] += velocity[i];
  }
}

void sgd_step(FeatureGenerator& fg, const FgGrad& grad, FgGrad& velocity, double lr,
              double momentum) {
  sgd_update(fg.conv1.w, grad.conv1.w, velocity.conv1.w, lr, momentum);
  sgd_update(fg.conv1.b, grad.conv1.b, velocity.conv1.b, lr, momentum);
  sgd_update(fg.bn1.gamma, grad.bn1.gamma, velocity.bn1.gamma, lr, momentum);
  sgd_update(fg.bn1.beta, grad.bn1.beta, velocity.bn1.beta, lr, momentum);
  sgd_update(fg.conv2.w, grad.conv2.w, velocity.conv2.w, lr, momentum);
  sgd_update(fg.conv2.b, grad.conv2.b, velocity.conv2.b, lr, momentum);
  sgd_update(fg.bn2.gamma, grad.bn2.gamma, velocity.bn2.gamma, lr, momentum);
  sgd_update(fg.bn2.beta, grad.bn2.beta, velocity.bn2.beta, lr, momentum);
}

void sgd_step(ClassifierHead& head, const HeadGrad& grad, HeadGrad& velocity, double lr,
              double momentum) {
  sgd_update(head.fc.w, grad.fc.w, velocity.fc.w, lr, momentum);
  sgd_update(head.fc.b, grad.fc.b, velocity.fc.b, lr, momentum);
}

void apply_bn_update(FeatureGenerator& fg, const BnStats& stats, double decay) {
  for (int c = 0; c < fg.bn1.ch; ++c) {
    fg.bn1.run_mean[c] = decay * fg.bn1.run_mean[c] + (1.0 - decay) * stats.mean1[c];
    fg.bn1.run_var[c] = decay * fg.bn1.run_var[c] + (1.0 - decay) * stats.var1[c];
  }
  for (int c = 0; c < fg.bn2.ch; ++c) {
    fg.bn2.run_mean[c] = decay * fg.bn2.run_mean[c] + (1.0 - decay) * stats.mean2[c];
    fg.bn2.run_var[c] = decay * fg.bn2.run_var[c] + (1.0 - decay) * stats.var2[c];
  }
}

GradCheckReport grad_check(const FeatureGenerator& fg_in, const ClassifierHead& head_in,
                           const std::vector<const MtfImage*>& images,
                           const std::vector<int>& labels, double epsilon, double tolerance,
                           uint64_t seed, int samples_per_tensor) {
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
  FeatureGenerator fg = fg_in;
  ClassifierHead head = head_in;

  FgGrad fgrad = make_grad(fg);
  HeadGrad hgrad = make_grad(head);
  loss_and_grad(fg, head, images, labels, fgrad, hgrad, nullptr);

  struct Slot {
    const char* name;
    std::vector<double>* param;
    const std::vector<double>* grad;
  };
  const std::vector<Slot> slots = {
      {"conv1.w", &fg.conv1.w, &fgrad.conv1.w},   {"conv1.b", &fg.conv1.b, &fgrad.conv1.b},
      {"bn1.gamma", &fg.bn1.gamma, &fgrad.bn1.gamma}, {"bn1.beta", &fg.bn1.beta, &fgrad.bn1.beta},
      {"conv2.w", &fg.conv2.w, &fgrad.conv2.w},   {"conv2.b", &fg.conv2.b, &fgrad.conv2.b},
      {"bn2.gamma", &fg.bn2.gamma, &fgrad.bn2.gamma}, {"bn2.beta", &fg.bn2.beta, &fgrad.bn2.beta},
      {"head.w", &head.fc.w, &hgrad.fc.w},        {"head.b", &head.fc.b, &hgrad.fc.b},
  };

  Rng rng(seed);
  GradCheckReport report;
  report.tolerance = tolerance;
  for (const Slot& slot : slots) {
    GradCheckEntry entry;
    entry.tensor = slot.name;
    const size_t n = slot.param->size();
    const int take = std::min<int>(samples_per_tensor, static_cast<int>(n));
    for (int t = 0; t < take; ++t) {
      const size_t idx = (take == static_cast<int>(n)) ? static_cast<size_t>(t) : rng.index(n);
      const double saved = (*slot.param)[idx];
      (*slot.param)[idx] = saved + epsilon;
      const double lp = batch_loss(fg, head, images, labels);
      (*slot.param)[idx] = saved - epsilon;
      const double lm = batch_loss(fg, head, images, labels);
      (*slot.param)[idx] = saved;
      const double fd = (lp - lm) / (2.0 * epsilon);
      const double an = (*slot.grad)[idx];
      const double rel = std::abs(an - fd) / std::max({1e-6, std::abs(an), std::abs(fd)});
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
      ++entry.checked;
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  report.pass = report.max_rel_err < tolerance;
  return report;
}

// ---------------------------------------------------------------------------
// Checkpoint serialization

namespace {

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

struct NamedTensor {
  std::string name;
  std::vector<uint32_t> dims;
  const std::vector<double>* data;
};

std::vector<NamedTensor> tensor_table(const FeatureGenerator& fg,
                                      const std::map<int, ClassifierHead>& heads) {
  const uint32_t C = kConvChannels;
  const uint32_t K = kKernelSize;
  std::vector<NamedTensor> t;
  t.push_back({"fg.conv1.w", {C, 1, K, K}, &fg.conv1.w});
  t.push_back({"fg.conv1.b", {C}, &fg.conv1.b});
  t.push_back({"fg.bn1.gamma", {C}, &fg.bn1.gamma});
  t.push_back({"fg.bn1.beta", {C}, &fg.bn1.beta});
  t.push_back({"fg.bn1.run_mean", {C}, &fg.bn1.run_mean});
  t.push_back({"fg.bn1.run_var", {C}, &fg.bn1.run_var});
  t.push_back({"fg.conv2.w", {C, C, K, K}, &fg.conv2.w});
  t.push_back({"fg.conv2.b", {C}, &fg.conv2.b});
  t.push_back({"fg.bn2.gamma", {C}, &fg.bn2.gamma});
  t.push_back({"fg.bn2.beta", {C}, &fg.bn2.beta});
  t.push_back({"fg.bn2.run_mean", {C}, &fg.bn2.run_mean});
  t.push_back({"fg.bn2.run_var", {C}, &fg.bn2.run_var});
  for (const auto& [domain, head] : heads) {
    const std::string prefix = "head." + std::to_string(domain);
    t.push_back({prefix + ".w",
                 {static_cast<uint32_t>(head.fc.out_dim), static_cast<uint32_t>(head.fc.in_dim)},
                 &head.fc.w});
    t.push_back({prefix + ".b", {static_cast<uint32_t>(head.fc.out_dim)}, &head.fc.b});
  }
  return t;
}

}  // namespace

std::vector<unsigned char> model_bytes(const FeatureGenerator& fg,
                                       const std::map<int, ClassifierHead>& heads) {
  const auto table = tensor_table(fg, heads);
  std::vector<unsigned char> out;
  out.insert(out.end(), {'D', 'F', 'N', 'N'});
  put_u32(out, 1);  // version
  put_u32(out, static_cast<uint32_t>(fg.input_size));
  put_u32(out, static_cast<uint32_t>(table.size()));
  for (const auto& t : table) {
    put_u32(out, static_cast<uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_u32(out, static_cast<uint32_t>(t.dims.size()));
    for (uint32_t dim : t.dims) put_u32(out, dim);
  }
  for (const auto& t : table) {
    for (double v : *t.data) {
      float f = static_cast<float>(v);
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(out, bits);
    }
  }
  return out;
}

void save_checkpoint(const std::string& path, const FeatureGenerator& fg,
                     const std::map<int, ClassifierHead>& heads) {
  const auto bytes = model_bytes(fg, heads);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

namespace {

uint32_t read_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

std::pair<FeatureGenerator, std::map<int, ClassifierHead>> load_checkpoint(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "DFNN", 4) != 0) throw std::runtime_error("bad magic: " + path);
  const uint32_t version = read_u32(in);
  if (version != 1) throw std::runtime_error("unsupported checkpoint version");
  const int input_size = static_cast<int>(read_u32(in));
  const uint32_t n_tensors = read_u32(in);

  struct Entry {
    std::string name;
    size_t count;
  };
  std::vector<Entry> entries;
  for (uint32_t i = 0; i < n_tensors; ++i) {
    const uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const uint32_t ndim = read_u32(in);
    size_t count = 1;
    for (uint32_t k = 0; k < ndim; ++k) count *= read_u32(in);
    entries.push_back({std::move(name), count});
  }

  Rng rng(0);
  FeatureGenerator fg = make_feature_generator(input_size, rng);
  std::map<int, ClassifierHead> heads;
  const NetDims dims = fg.dims();

  for (const Entry& e : entries) {
    std::vector<double> values(e.count);
    for (size_t i = 0; i < e.count; ++i) {
      const uint32_t bits = read_u32(in);
      float f;
      std::memcpy(&f, &bits, 4);
      values[i] = static_cast<double>(f);
    }
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);

    auto assign = [&](std::vector<double>& dst) {
      if (dst.size() != values.size()) throw std::runtime_error("shape mismatch for " + e.name);
      dst = values;
    };
    if (e.name == "fg.conv1.w") assign(fg.conv1.w);
    else if (e.name == "fg.conv1.b") assign(fg.conv1.b);
    else if (e.name == "fg.bn1.gamma") assign(fg.bn1.gamma);
    else if (e.name == "fg.bn1.beta") assign(fg.bn1.beta);
    else if (e.name == "fg.bn1.run_mean") assign(fg.bn1.run_mean);
    else if (e.name == "fg.bn1.run_var") assign(fg.bn1.run_var);
    else if (e.name == "fg.conv2.w") assign(fg.conv2.w);
    else if (e.name == "fg.conv2.b") assign(fg.conv2.b);
    else if (e.name == "fg.bn2.gamma") assign(fg.bn2.gamma);
    else if (e.name == "fg.bn2.beta") assign(fg.bn2.beta);
    else if (e.name == "fg.bn2.run_mean") assign(fg.bn2.run_mean);
    else if (e.name == "fg.bn2.run_var") assign(fg.bn2.run_var);
    else if (e.name.rfind("head.", 0) == 0) {
      const size_t dot = e.name.find('.', 5);
      if (dot == std::string::npos) throw std::runtime_error("bad tensor name: " + e.name);
      const int domain = std::stoi(e.name.substr(5, dot - 5));
      const std::string field = e.name.substr(dot + 1);
      auto [it, inserted] = heads.try_emplace(domain);
      ClassifierHead& head = it->second;
      if (field == "w") {
        head.fc.in_dim = dims.feat;
        head.fc.out_dim = static_cast<int>(values.size()) / dims.feat;
        head.fc.w = values;
      } else if (field == "b") {
        head.fc.out_dim = static_cast<int>(values.size());
        head.fc.b = values;
      } else {
        throw std::runtime_error("bad tensor name: " + e.name);
      }
    } else {
      throw std::runtime_error("unknown tensor: " + e.name);
    }
  }
  return {std::move(fg), std::move(heads)};
}

uint64_t fnv1a64(const unsigned char* data, size_t n) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace contdiag
