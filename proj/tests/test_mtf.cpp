#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>

#include "doctest.h"

#include "contdiag/mtf.hpp"
#include "contdiag/rng.hpp"
#include "contdiag/signal.hpp"

using namespace contdiag;

namespace {

// Sort-and-slice occupancy oracle: slice the sorted window into q runs of
// floor/ceil size; a tie group straddling a boundary belongs to the earlier
// run.
std::vector<int> slice_counts(std::vector<double> sorted, int q) {
  std::sort(sorted.begin(), sorted.end());
  const int n = static_cast<int>(sorted.size());
  std::vector<int> counts(q, 0);
  int bin = 0;
  for (int p = 0; p < n; ++p) {
    if (p > 0 && sorted[p] == sorted[p - 1]) {
      // stay in the previous value's bin
    } else {
      bin = static_cast<int>(static_cast<long long>(p) * q / n);
    }
    counts[bin]++;
  }
  return counts;
}

// Single-shot reference encoder: direct double loop over output blocks.
MtfImage reference_encode(const std::vector<double>& samples, int q, int s) {
  const int n = static_cast<int>(samples.size());
  const auto bins = quantize(samples, q);

  std::vector<double> counts(static_cast<size_t>(q) * q, 0.0);
  std::vector<double> totals(q, 0.0);
  for (int i = 0; i + 1 < n; ++i) {
    counts[static_cast<size_t>(bins[i]) * q + bins[i + 1]] += 1.0;
    totals[bins[i]] += 1.0;
  }
  auto prob = [&](int a, int b) {
    return totals[a] == 0.0 ? 0.0 : counts[static_cast<size_t>(a) * q + b] / totals[a];
  };

  MtfImage img;
  img.size = s;
  img.bins = q;
  img.source_len = n;
  img.pixels.assign(static_cast<size_t>(s) * s, 0.0);
  const int block = n / s;
  for (int oi = 0; oi < s; ++oi) {
    const int r0 = oi * block;
    const int r1 = (oi == s - 1) ? n : r0 + block;
    for (int oj = 0; oj < s; ++oj) {
      const int c0 = oj * block;
      const int c1 = (oj == s - 1) ? n : c0 + block;
      double acc = 0.0;
      for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) acc += prob(bins[r], bins[c]);
      }
      img.pixels[static_cast<size_t>(oi) * s + oj] =
          acc / (static_cast<double>(r1 - r0) * (c1 - c0));
    }
  }
  return img;
}

}  // namespace

TEST_CASE("quantize bins a ramp evenly and collapses constants to bin 0") {
  const std::vector<double> ramp = {1, 2, 3, 4, 5, 6, 7, 8};
  CHECK(quantize(ramp, 4) == std::vector<int>{0, 0, 1, 1, 2, 2, 3, 3});

  const std::vector<double> flat(16, 3.5);
  const auto bins = quantize(flat, 4);
  for (int b : bins) CHECK(b == 0);

  CHECK_THROWS_AS(quantize(ramp, 1), std::invalid_argument);
  CHECK_THROWS_AS(quantize({1.0, 2.0}, 4), std::invalid_argument);
}

TEST_CASE("quantize occupancy matches the sort-and-slice oracle") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 64 + static_cast<int>(rng.index(200));
    const int q = 2 + static_cast<int>(rng.index(7));
    std::vector<double> samples(n);
    for (double& v : samples) v = rng.gauss();
    if (trial % 5 == 0) {
      // force ties
      for (double& v : samples) v = std::floor(v * 3.0);
    }
    const auto bins = quantize(samples, q);
    std::vector<int> counts(q, 0);
    for (int b : bins) {
      REQUIRE(b >= 0);
      REQUIRE(b < q);
      counts[b]++;
    }
    CHECK(counts == slice_counts(samples, q));
  }
}

TEST_CASE("transition_matrix handles point masses and alternation") {
  const TransitionMatrix self = transition_matrix({2, 2, 2, 2}, 4);
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      CHECK(self.at(a, b) == ((a == 2 && b == 2) ? 1.0 : 0.0));
    }
  }

  const TransitionMatrix alt = transition_matrix({0, 1, 0, 1, 0}, 2);
  CHECK(alt.at(0, 1) == 1.0);
  CHECK(alt.at(1, 0) == 1.0);
  CHECK(alt.at(0, 0) == 0.0);
  CHECK(alt.at(1, 1) == 0.0);
}

TEST_CASE("transition rows sum to one where defined (count oracle)") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const int q = 2 + static_cast<int>(rng.index(7));
    const int n = 32 + static_cast<int>(rng.index(100));
    std::vector<int> bins(n);
    for (int& b : bins) b = static_cast<int>(rng.index(q));
    const TransitionMatrix tm = transition_matrix(bins, q);

    std::vector<int> starts(q, 0);
    for (int i = 0; i + 1 < n; ++i) starts[bins[i]]++;
    for (int a = 0; a < q; ++a) {
      double row = 0.0;
      for (int b = 0; b < q; ++b) {
        CHECK(tm.at(a, b) >= 0.0);
        row += tm.at(a, b);
      }
      if (starts[a] > 0) {
        CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
      } else {
        CHECK(row == 0.0);
      }
    }
  }
}

TEST_CASE("mtf_field looks up w at every sample pair") {
  // Constant signal: all samples in bin 0, w[0][0] = 1 -> all-ones field.
  const std::vector<int> flat(8, 0);
  const TransitionMatrix tm_flat = transition_matrix(flat, 4);
  const auto field_flat = mtf_field(flat, tm_flat);
  for (double v : field_flat) CHECK(v == 1.0);

  // Alternating signal: field value is 0 exactly on same-bin pairs.
  const std::vector<int> alt = {0, 1, 0, 1, 0};
  const TransitionMatrix tm_alt = transition_matrix(alt, 2);
  const auto field = mtf_field(alt, tm_alt);
  for (size_t i = 0; i < alt.size(); ++i) {
    for (size_t j = 0; j < alt.size(); ++j) {
      CHECK(field[i * alt.size() + j] == (alt[i] == alt[j] ? 0.0 : 1.0));
    }
  }

  // Values are always drawn from entries of w.
  Rng rng(5);
  std::vector<int> bins(40);
  for (int& b : bins) b = static_cast<int>(rng.index(3));
  const TransitionMatrix tm = transition_matrix(bins, 3);
  for (double v : mtf_field(bins, tm)) {
    bool found = false;
    for (double w : tm.w) found = found || (v == w);
    CHECK(found);
  }
}

TEST_CASE("aggregate means blocks and folds the remainder into the last") {
  std::vector<double> ones(512 * 512, 1.0);
  const MtfImage img = aggregate(ones, 512, 32, 8);
  CHECK(img.size == 32);
  for (double v : img.pixels) CHECK(v == 1.0);

  std::vector<double> c(100 * 100, 0.37);
  const MtfImage cimg = aggregate(c, 100, 7, 8);  // 100 = 7*14 + 2 remainder
  for (double v : cimg.pixels) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));

  // Random field: compare with an independent per-block double loop.
  Rng rng(9);
  const int n = 37;
  const int s = 5;
  std::vector<double> field(static_cast<size_t>(n) * n);
  for (double& v : field) v = rng.uniform();
  const MtfImage out = aggregate(field, n, s, 4);
  const int block = n / s;
  for (int oi = 0; oi < s; ++oi) {
    for (int oj = 0; oj < s; ++oj) {
      const int r1 = (oi == s - 1) ? n : (oi + 1) * block;
      const int c1 = (oj == s - 1) ? n : (oj + 1) * block;
      double acc = 0.0;
      int cnt = 0;
      for (int r = oi * block; r < r1; ++r) {
        for (int cc = oj * block; cc < c1; ++cc) {
          acc += field[static_cast<size_t>(r) * n + cc];
          ++cnt;
        }
      }
      CHECK(out.at(oi, oj) == doctest::Approx(acc / cnt).epsilon(1e-12));
    }
  }
}

TEST_CASE("encode equals the single-shot reference on random windows") {
  Rng rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> samples(256);
    for (double& v : samples) v = rng.gauss();
    const MtfImage a = encode(samples, 8, 16);
    const MtfImage b = reference_encode(samples, 8, 16);
    REQUIRE(a.pixels.size() == b.pixels.size());
    for (size_t i = 0; i < a.pixels.size(); ++i) {
      CHECK(a.pixels[i] == doctest::Approx(b.pixels[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("encoding is invariant under positive affine transforms") {
  const DomainSpec spec = make_domain_spec(1);
  const SignalWindow w = synthesize_window(spec, FaultClass::InnerRace, 800.0, 11);
  std::vector<double> scaled = w.samples;
  for (double& v : scaled) v = 3.0 * v + 5.0;
  const MtfImage a = encode(w.samples, 8, 12);
  const MtfImage b = encode(scaled, 8, 12);
  CHECK(a.pixels == b.pixels);  // pixel-exact
}

TEST_CASE("pixels stay in [0,1] across synthetic windows") {
  for (int id = 1; id <= 18; ++id) {
    const DomainDataset ds = build_dataset(make_domain_spec(id), 4, 0.25, 13);
    for (const auto& w : ds.train) {
      const MtfImage img = encode(w.samples, 8, 12);
      for (double v : img.pixels) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
      }
    }
  }
}

TEST_CASE("mtf blob round-trips through the binary format") {
  Rng rng(55);
  std::vector<double> samples(128);
  for (double& v : samples) v = rng.gauss();
  const MtfImage img = encode(samples, 8, 16);
  const std::string path = "test_image_roundtrip.mtf";
  save_mtf(path, img);
  const MtfImage back = load_mtf(path);
  CHECK(back.size == img.size);
  CHECK(back.bins == img.bins);
  REQUIRE(back.pixels.size() == img.pixels.size());
  for (size_t i = 0; i < img.pixels.size(); ++i) {
    CHECK(back.pixels[i] == doctest::Approx(img.pixels[i]).epsilon(1e-6));
  }
  std::remove(path.c_str());
}
