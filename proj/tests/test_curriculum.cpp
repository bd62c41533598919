#include <cmath>
#include <set>
#include <stdexcept>

#include "doctest.h"

#include "contdiag/curriculum.hpp"

using namespace contdiag;

namespace {

double window_rms(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / x.size());
}

// Re-simulation of the alternation rule for the interleaving property.
std::vector<int> simulate_alternation(const std::map<int, double>& acc, std::vector<int> ids) {
  std::vector<int> out;
  std::set<int> used;
  while (out.size() < ids.size()) {
    // highest among unused, ties to lower id
    int best = -1;
    for (int id : ids) {
      if (used.count(id)) continue;
      if (best == -1 || acc.at(id) > acc.at(best) || (acc.at(id) == acc.at(best) && id < best)) {
        best = id;
      }
    }
    if (best != -1) {
      out.push_back(best);
      used.insert(best);
    }
    if (out.size() == ids.size()) break;
    int worst = -1;
    for (int id : ids) {
      if (used.count(id)) continue;
      if (worst == -1 || acc.at(id) < acc.at(worst) ||
          (acc.at(id) == acc.at(worst) && id < worst)) {
        worst = id;
      }
    }
    if (worst != -1) {
      out.push_back(worst);
      used.insert(worst);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("order_domains sorts by baseline accuracy") {
  OrderingStrategy s;
  s.baseline_acc = {{1, 0.9}, {2, 0.7}, {3, 0.8}};
  const std::vector<int> ids = {1, 2, 3};

  s.kind = OrderingKind::LowestFirst;
  CHECK(order_domains(s, ids) == std::vector<int>{2, 3, 1});

  s.kind = OrderingKind::HighestFirst;
  CHECK(order_domains(s, ids) == std::vector<int>{1, 3, 2});

  s.kind = OrderingKind::Alternated;
  CHECK(order_domains(s, ids) == std::vector<int>{1, 2, 3});

  s.kind = OrderingKind::AsGiven;
  CHECK(order_domains(s, {3, 1, 2}) == std::vector<int>{3, 1, 2});
}

TEST_CASE("order_domains demands baselines and emits permutations") {
  OrderingStrategy s;
  s.kind = OrderingKind::LowestFirst;
  s.baseline_acc = {{1, 0.9}};
  CHECK_THROWS_AS(order_domains(s, {1, 2}), std::invalid_argument);

  Rng rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    OrderingStrategy t;
    t.kind = trial % 2 == 0 ? OrderingKind::Alternated : OrderingKind::LowestFirst;
    std::vector<int> ids;
    for (int i = 1; i <= 8; ++i) {
      ids.push_back(i);
      t.baseline_acc[i] = std::floor(rng.uniform() * 5.0) / 5.0;  // force ties
    }
    const auto out = order_domains(t, ids);
    CHECK(std::set<int>(out.begin(), out.end()) == std::set<int>(ids.begin(), ids.end()));
    if (t.kind == OrderingKind::Alternated) {
      CHECK(out == simulate_alternation(t.baseline_acc, ids));
    }
  }
}

TEST_CASE("corruption levels carry the table constants") {
  CHECK(CorruptionLevel::mild().data_fraction == 0.20);
  CHECK(CorruptionLevel::mild().noise_rate == 0.05);
  CHECK(CorruptionLevel::moderate().data_fraction == 0.30);
  CHECK(CorruptionLevel::moderate().noise_rate == 0.15);
  CHECK(CorruptionLevel::high().data_fraction == 0.40);
  CHECK(CorruptionLevel::high().noise_rate == 0.30);
  CHECK(CorruptionLevel::none().data_fraction == 0.0);
  CHECK_THROWS_AS(CorruptionLevel::from_name("Extreme"), std::invalid_argument);
}

TEST_CASE("corrupt_dataset: None is bit-identical, Mild alters exactly 20%") {
  const DomainDataset ds = build_dataset(make_domain_spec(1), 25, 0.2, 9);  // 100 train
  REQUIRE(ds.train.size() == 80);

  Rng rng1(4);
  const DomainDataset same = corrupt_dataset(ds, CorruptionLevel::none(), rng1);
  for (size_t i = 0; i < ds.train.size(); ++i) {
    CHECK(same.train[i].samples == ds.train[i].samples);
  }

  // 100-window train split for the 20% count check.
  DomainDataset hundred = ds;
  hundred.train.resize(80);
  for (int i = 0; i < 20; ++i) hundred.train.push_back(ds.train[i]);
  REQUIRE(hundred.train.size() == 100);

  Rng rng2(4);
  const DomainDataset mild = corrupt_dataset(hundred, CorruptionLevel::mild(), rng2);
  int altered = 0;
  for (size_t i = 0; i < hundred.train.size(); ++i) {
    if (mild.train[i].samples != hundred.train[i].samples) ++altered;
    CHECK(mild.train[i].label == hundred.train[i].label);
  }
  CHECK(altered == 20);

  // Test split untouched.
  for (size_t i = 0; i < hundred.test.size(); ++i) {
    CHECK(mild.test[i].samples == hundred.test[i].samples);
  }
}

TEST_CASE("added noise RMS tracks noise_rate within 20%") {
  const DomainDataset ds = build_dataset(make_domain_spec(3), 30, 0.2, 11);
  Rng rng(8);
  const CorruptionLevel level = CorruptionLevel::high();
  const DomainDataset noisy = corrupt_dataset(ds, level, rng);
  double ratio_sum = 0.0;
  int altered = 0;
  for (size_t i = 0; i < ds.train.size(); ++i) {
    if (noisy.train[i].samples == ds.train[i].samples) continue;
    std::vector<double> delta(ds.train[i].samples.size());
    for (size_t j = 0; j < delta.size(); ++j) {
      delta[j] = noisy.train[i].samples[j] - ds.train[i].samples[j];
    }
    ratio_sum += window_rms(delta) / window_rms(ds.train[i].samples);
    ++altered;
  }
  REQUIRE(altered == static_cast<int>(std::llround(0.40 * ds.train.size())));
  const double mean_ratio = ratio_sum / altered;
  CHECK(mean_ratio == doctest::Approx(level.noise_rate).epsilon(0.20));
}
