#include <cmath>
#include <cstdio>
#include <numeric>

#include "doctest.h"

#include "contdiag/net.hpp"

using namespace contdiag;

namespace {

MtfImage random_image(int size, Rng& rng) {
  MtfImage img;
  img.size = size;
  img.bins = 8;
  img.source_len = size * size;
  img.pixels.resize(static_cast<size_t>(size) * size);
  for (double& p : img.pixels) p = rng.uniform();
  return img;
}

struct Fixture {
  FeatureGenerator fg;
  ClassifierHead head;
  std::vector<MtfImage> storage;
  std::vector<const MtfImage*> images;
  std::vector<int> labels;

  explicit Fixture(int input = 10, int classes = 4, uint64_t seed = 2024) {
    Rng rng(seed);
    fg = make_feature_generator(input, rng);
    head = make_classifier_head(fg.dims().feat, classes, rng);
    storage.push_back(random_image(input, rng));
    storage.push_back(random_image(input, rng));
    for (const auto& img : storage) images.push_back(&img);
    labels = {1, 3};
  }
};

// Independent central-difference oracle over one parameter slot.
double fd_grad(Fixture& fx, std::vector<double>& tensor, size_t idx, double eps = 1e-4) {
  const double saved = tensor[idx];
  tensor[idx] = saved + eps;
  const double lp = batch_loss(fx.fg, fx.head, fx.images, fx.labels);
  tensor[idx] = saved - eps;
  const double lm = batch_loss(fx.fg, fx.head, fx.images, fx.labels);
  tensor[idx] = saved;
  return (lp - lm) / (2.0 * eps);
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_CASE("zero head yields a uniform probability vector") {
  Fixture fx;
  std::fill(fx.head.fc.w.begin(), fx.head.fc.w.end(), 0.0);
  std::fill(fx.head.fc.b.begin(), fx.head.fc.b.end(), 0.0);
  const auto probs = forward(fx.fg, fx.head, fx.storage[0], false);
  REQUIRE(probs.size() == 4);
  for (double p : probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softmax output sums to one") {
  Fixture fx;
  for (bool training : {false, true}) {
    const auto probs = forward(fx.fg, fx.head, fx.storage[0], training);
    double total = 0.0;
    for (double p : probs) {
      CHECK(p > 0.0);
      total += p;
    }
    CHECK(std::abs(total - 1.0) < 1e-6);
  }
}

TEST_CASE("forward rejects mismatched image sizes") {
  Fixture fx(10);
  Rng rng(3);
  const MtfImage wrong = random_image(16, rng);
  CHECK_THROWS_AS(forward(fx.fg, fx.head, wrong, false), std::invalid_argument);
}

TEST_CASE("uniform predictions over 4 classes give loss ln 4") {
  Fixture fx;
  std::fill(fx.head.fc.w.begin(), fx.head.fc.w.end(), 0.0);
  std::fill(fx.head.fc.b.begin(), fx.head.fc.b.end(), 0.0);
  const double loss = batch_loss(fx.fg, fx.head, fx.images, fx.labels);
  CHECK(loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
  Fixture fx;
  FgGrad fg_grad = make_grad(fx.fg);
  HeadGrad head_grad = make_grad(fx.head);
  loss_and_grad(fx.fg, fx.head, fx.images, fx.labels, fg_grad, head_grad, nullptr);

  Rng rng(808);
  double worst = 0.0;
  auto check_tensor = [&](std::vector<double>& tensor, const std::vector<double>& grad,
                          int sample) {
    const int take = std::min<int>(sample, static_cast<int>(tensor.size()));
    for (int t = 0; t < take; ++t) {
      const size_t idx =
          (take == static_cast<int>(tensor.size())) ? static_cast<size_t>(t) : rng.index(tensor.size());
      worst = std::max(worst, rel_err(grad[idx], fd_grad(fx, tensor, idx)));
    }
  };
  check_tensor(fx.fg.conv1.w, fg_grad.conv1.w, 720);
  check_tensor(fx.fg.conv1.b, fg_grad.conv1.b, 80);
  check_tensor(fx.fg.bn1.gamma, fg_grad.bn1.gamma, 80);
  check_tensor(fx.fg.bn1.beta, fg_grad.bn1.beta, 80);
  check_tensor(fx.fg.conv2.w, fg_grad.conv2.w, 600);
  check_tensor(fx.fg.conv2.b, fg_grad.conv2.b, 80);
  check_tensor(fx.fg.bn2.gamma, fg_grad.bn2.gamma, 80);
  check_tensor(fx.fg.bn2.beta, fg_grad.bn2.beta, 80);
  check_tensor(fx.head.fc.w, head_grad.fc.w, 320);
  check_tensor(fx.head.fc.b, head_grad.fc.b, 4);
  CHECK(worst < 1e-3);
}

TEST_CASE("a sign-flipped conv backward fails the finite-difference oracle") {
  Fixture fx;
  FgGrad fg_grad = make_grad(fx.fg);
  HeadGrad head_grad = make_grad(fx.head);
  loss_and_grad(fx.fg, fx.head, fx.images, fx.labels, fg_grad, head_grad, nullptr);
  for (double& g : fg_grad.conv1.w) g = -g;  // the mutation

  Rng rng(17);
  double worst = 0.0;
  for (int t = 0; t < 30; ++t) {
    const size_t idx = rng.index(fx.fg.conv1.w.size());
    worst = std::max(worst, rel_err(fg_grad.conv1.w[idx], fd_grad(fx, fx.fg.conv1.w, idx)));
  }
  CHECK(worst > 1e-3);
}

TEST_CASE("duplicating every batch element leaves loss and gradients unchanged") {
  Fixture fx;
  FgGrad g1 = make_grad(fx.fg);
  HeadGrad h1 = make_grad(fx.head);
  const double loss1 = loss_and_grad(fx.fg, fx.head, fx.images, fx.labels, g1, h1, nullptr);

  std::vector<const MtfImage*> doubled = fx.images;
  doubled.insert(doubled.end(), fx.images.begin(), fx.images.end());
  std::vector<int> labels2 = fx.labels;
  labels2.insert(labels2.end(), fx.labels.begin(), fx.labels.end());
  FgGrad g2 = make_grad(fx.fg);
  HeadGrad h2 = make_grad(fx.head);
  const double loss2 = loss_and_grad(fx.fg, fx.head, doubled, labels2, g2, h2, nullptr);

  CHECK(loss1 == doctest::Approx(loss2).epsilon(1e-12));
  for (size_t i = 0; i < g1.conv1.w.size(); ++i) {
    CHECK(g1.conv1.w[i] == doctest::Approx(g2.conv1.w[i]).epsilon(1e-9));
  }
  for (size_t i = 0; i < h1.fc.w.size(); ++i) {
    CHECK(h1.fc.w[i] == doctest::Approx(h2.fc.w[i]).epsilon(1e-9));
  }
}

TEST_CASE("multi-head loss is the mean of per-head cross-entropies") {
  Rng rng(5);
  FeatureGenerator fg = make_feature_generator(10, rng);
  ClassifierHead head_a = make_classifier_head(fg.dims().feat, 4, rng);
  ClassifierHead head_b = make_classifier_head(fg.dims().feat, 3, rng);
  std::vector<MtfImage> imgs;
  for (int i = 0; i < 4; ++i) imgs.push_back(random_image(10, rng));

  std::vector<double> batch(static_cast<size_t>(4) * 100);
  for (int i = 0; i < 4; ++i) {
    std::copy(imgs[i].pixels.begin(), imgs[i].pixels.end(), batch.begin() + i * 100);
  }
  FgGrad fg_grad = make_grad(fg);
  HeadGrad ga = make_grad(head_a);
  HeadGrad gb = make_grad(head_b);
  std::vector<HeadBatch> heads(2);
  heads[0] = {&head_a, &ga, {0, 1}, {1, 2}};
  heads[1] = {&head_b, &gb, {2, 3}, {0, 2}};
  const double loss = multi_loss_and_grad(fg, batch.data(), 4, heads, fg_grad, nullptr);

  // Recompute each head's share against the cached-features path by running
  // the whole batch through the trunk once.
  FgCache cache;
  std::vector<double> feats(static_cast<size_t>(4) * fg.dims().feat);
  fg_forward(fg, batch.data(), 4, true, &cache, feats.data());
  double expected = 0.0;
  for (const HeadBatch& hb : heads) {
    std::vector<double> logits(hb.samples.size() * hb.head->fc.out_dim);
    std::vector<double> gf(hb.samples.size() * fg.dims().feat);
    for (size_t r = 0; r < hb.samples.size(); ++r) {
      std::copy(feats.begin() + hb.samples[r] * fg.dims().feat,
                feats.begin() + (hb.samples[r] + 1) * fg.dims().feat,
                gf.begin() + r * fg.dims().feat);
    }
    kernels::dense_forward(gf.data(), hb.head->fc.w.data(), hb.head->fc.b.data(),
                           static_cast<int>(hb.samples.size()), fg.dims().feat,
                           hb.head->fc.out_dim, logits.data());
    const auto probs = softmax_rows(logits.data(), static_cast<int>(hb.samples.size()),
                                    hb.head->fc.out_dim);
    double head_loss = 0.0;
    for (size_t r = 0; r < hb.samples.size(); ++r) {
      head_loss += -std::log(probs[r * hb.head->fc.out_dim + hb.labels[r]]);
    }
    expected += head_loss / static_cast<double>(hb.samples.size());
  }
  expected /= 2.0;
  CHECK(loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("sgd_update follows the momentum recurrence") {
  std::vector<double> p = {5.0};
  std::vector<double> v = {0.0};
  sgd_update(p, {0.0}, v, 0.1, 0.0);
  CHECK(p[0] == 5.0);  // zero gradient

  p = {5.0};
  v = {0.0};
  sgd_update(p, {1.0}, v, 0.1, 0.0);
  CHECK(p[0] == doctest::Approx(4.9).epsilon(1e-15));

  p = {0.0};
  v = {0.0};
  sgd_update(p, {1.0}, v, 0.1, 0.9);
  CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-15));
  sgd_update(p, {1.0}, v, 0.1, 0.9);
  CHECK(p[0] == doctest::Approx(-0.29).epsilon(1e-15));

  CHECK_THROWS_AS(sgd_update(p, {1.0}, v, 0.0, 0.9), std::invalid_argument);
}

TEST_CASE("grad_check passes on a fresh network and rejects epsilon 0") {
  Fixture fx;
  const GradCheckReport report =
      grad_check(fx.fg, fx.head, fx.images, fx.labels, 1e-4, 1e-3, 99, 25);
  CHECK(report.pass);
  CHECK(report.max_rel_err < 1e-3);
  CHECK(report.entries.size() == 10);

  CHECK_THROWS_AS(grad_check(fx.fg, fx.head, fx.images, fx.labels, 0.0, 1e-3, 99),
                  std::invalid_argument);
}

TEST_CASE("training a toy two-class problem reaches full train accuracy") {
  Rng rng(314);
  const int size = 10;
  FeatureGenerator fg = make_feature_generator(size, rng);
  ClassifierHead head = make_classifier_head(fg.dims().feat, 2, rng);

  // Bright top-left block vs bright bottom-right block, plus noise.
  std::vector<MtfImage> imgs;
  std::vector<int> labels;
  for (int i = 0; i < 16; ++i) {
    MtfImage img = random_image(size, rng);
    for (double& p : img.pixels) p *= 0.2;
    const int cls = i % 2;
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) {
        if (cls == 0) {
          img.pixels[y * size + x] += 0.7;
        } else {
          img.pixels[(size - 1 - y) * size + (size - 1 - x)] += 0.7;
        }
      }
    }
    imgs.push_back(std::move(img));
    labels.push_back(cls);
  }
  std::vector<const MtfImage*> batch;
  for (const auto& img : imgs) batch.push_back(&img);

  FgGrad fg_grad = make_grad(fg);
  FgGrad fg_vel = make_grad(fg);
  HeadGrad h_grad = make_grad(head);
  HeadGrad h_vel = make_grad(head);
  for (int epoch = 0; epoch < 30; ++epoch) {
    BnStats stats;
    loss_and_grad(fg, head, batch, labels, fg_grad, h_grad, &stats);
    sgd_step(fg, fg_grad, fg_vel, 0.01, 0.9);
    sgd_step(head, h_grad, h_vel, 0.01, 0.9);
    apply_bn_update(fg, stats);
  }
  int correct = 0;
  for (size_t i = 0; i < imgs.size(); ++i) {
    const auto probs = forward(fg, head, imgs[i], false);
    const int pred = probs[0] > probs[1] ? 0 : 1;
    if (pred == labels[i]) ++correct;
  }
  CHECK(correct == 16);
}

TEST_CASE("checkpoints round-trip bit-stably") {
  Fixture fx;
  std::map<int, ClassifierHead> heads;
  heads.emplace(3, fx.head);
  Rng rng(12);
  heads.emplace(5, make_classifier_head(fx.fg.dims().feat, 3, rng));

  const std::string path = "test_checkpoint.dfnn";
  save_checkpoint(path, fx.fg, heads);
  auto [fg2, heads2] = load_checkpoint(path);
  CHECK(heads2.size() == 2);
  CHECK(heads2.count(3) == 1);
  CHECK(heads2.count(5) == 1);

  // float32 payload: re-serialization is byte-identical.
  const auto bytes1 = model_bytes(fx.fg, heads);
  const auto bytes2 = model_bytes(fg2, heads2);
  CHECK(bytes1.size() == bytes2.size());
  CHECK(fnv1a64(bytes1.data(), bytes1.size()) == fnv1a64(bytes2.data(), bytes2.size()));

  const auto p1 = forward(fx.fg, fx.head, fx.storage[0], false);
  const auto p2 = forward(fg2, heads2.at(3), fx.storage[0], false);
  for (size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i] == doctest::Approx(p2[i]).epsilon(1e-5));
  }
  std::remove(path.c_str());
}
