#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <map>
#include <set>

#include "doctest.h"

#include "contdiag/signal.hpp"

using namespace contdiag;

namespace {

// Hann-windowed DFT magnitude at integer bin k (test oracle).
double dft_magnitude(const std::vector<double>& x, int k) {
  const int n = static_cast<int>(x.size());
  std::complex<double> acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double hann = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (n - 1));
    const double phase = -2.0 * M_PI * k * i / n;
    acc += x[i] * hann * std::complex<double>(std::cos(phase), std::sin(phase));
  }
  return std::abs(acc);
}

// Peak magnitude within +-2 bins of a (fractional) target bin.
double band_peak(const std::vector<double>& x, double bin) {
  double best = 0.0;
  const int lo = std::max(1, static_cast<int>(std::floor(bin)) - 2);
  for (int k = lo; k <= static_cast<int>(std::ceil(bin)) + 2; ++k) {
    best = std::max(best, dft_magnitude(x, k));
  }
  return best;
}

// Median magnitude over a quiet stretch of bins, as a noise-floor proxy.
double noise_floor(const std::vector<double>& x, int lo, int hi) {
  std::vector<double> mags;
  for (int k = lo; k <= hi; ++k) mags.push_back(dft_magnitude(x, k));
  std::sort(mags.begin(), mags.end());
  return mags[mags.size() / 2];
}

DomainSpec clean_env_spec(int domain_id) {
  DomainSpec spec = make_domain_spec(domain_id);
  spec.environments = {Environment::H};
  return spec;
}

double corr_at_zero_lag(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("make_domain_spec matches the 18-row domain table") {
  for (int id = 1; id <= 18; ++id) {
    const DomainSpec spec = make_domain_spec(id);
    CHECK(spec.domain_id == id);
    CHECK(spec.base_noise == 0.05);

    if (id <= 6) CHECK(spec.bearing == Bearing::DeepGroove6204);
    if (id >= 7 && id <= 12) CHECK(spec.bearing == Bearing::Tapered30204);
    if (id >= 13) {
      CHECK((spec.bearing == Bearing::CylindricalN204 ||
             spec.bearing == Bearing::CylindricalNJ204));
    }

    if (id <= 12) {
      CHECK(spec.fault_classes ==
            std::vector<FaultClass>{FaultClass::Ball, FaultClass::InnerRace,
                                    FaultClass::OuterRace, FaultClass::Healthy});
    } else {
      CHECK(spec.fault_classes ==
            std::vector<FaultClass>{FaultClass::OuterRace, FaultClass::Healthy,
                                    FaultClass::InnerRace});
    }

    const int row = ((id - 1) / 2) % 3;
    if (row == 0) {
      CHECK(spec.environments ==
            std::vector<Environment>{Environment::H, Environment::M1, Environment::U1,
                                     Environment::L});
    } else if (row == 1) {
      CHECK(spec.environments ==
            std::vector<Environment>{Environment::H, Environment::U1, Environment::U2,
                                     Environment::U3});
    } else {
      CHECK(spec.environments ==
            std::vector<Environment>{Environment::H, Environment::M1, Environment::M2,
                                     Environment::M3});
    }

    CHECK(spec.speed_band == (id % 2 == 1 ? SpeedBand::Slow : SpeedBand::Fast));
    CHECK(spec.sample_rate_hz == (id % 2 == 1 ? 8000.0 : 16000.0));
  }
}

TEST_CASE("spec examples: domain 13, domain 1, domain 2") {
  const DomainSpec d13 = make_domain_spec(13);
  CHECK(d13.bearing == Bearing::CylindricalN204);
  CHECK(d13.fault_classes.size() == 3);
  CHECK(d13.fault_classes[0] == FaultClass::OuterRace);
  CHECK(d13.speed_band == SpeedBand::Slow);

  const DomainSpec d1 = make_domain_spec(1);
  CHECK(d1.bearing == Bearing::DeepGroove6204);
  CHECK(d1.fault_classes.size() == 4);
  CHECK(d1.speed_band == SpeedBand::Slow);

  const DomainSpec d2 = make_domain_spec(2);
  CHECK(d2.bearing == d1.bearing);
  CHECK(d2.fault_classes == d1.fault_classes);
  CHECK(d2.environments == d1.environments);
  CHECK(d2.speed_band == SpeedBand::Fast);
}

TEST_CASE("make_domain_spec rejects out-of-range ids") {
  CHECK_THROWS_AS(make_domain_spec(0), std::invalid_argument);
  CHECK_THROWS_AS(make_domain_spec(19), std::invalid_argument);
  CHECK_THROWS_AS(make_domain_spec(-3), std::invalid_argument);
}

TEST_CASE("synthesize_window is deterministic and validates arguments") {
  const DomainSpec spec = make_domain_spec(1);
  const SignalWindow a = synthesize_window(spec, FaultClass::Ball, 600.0, 99);
  const SignalWindow b = synthesize_window(spec, FaultClass::Ball, 600.0, 99);
  CHECK(a.samples == b.samples);
  CHECK(a.samples.size() == kDefaultWindowLen);

  CHECK_THROWS_AS(synthesize_window(make_domain_spec(13), FaultClass::Ball, 600.0, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(synthesize_window(spec, FaultClass::Ball, 700.0, 1), std::invalid_argument);
}

TEST_CASE("healthy windows carry no fault line above the noise floor") {
  for (int id : {1, 7, 13}) {
    const DomainSpec spec = clean_env_spec(id);
    for (double rpm : band_speeds(spec.speed_band)) {
      const SignalWindow w = synthesize_window(spec, FaultClass::Healthy, rpm, 4242);
      const double shaft_bin =
          shaft_cycles_per_sample(spec, rpm) * static_cast<double>(w.samples.size());
      const double floor = noise_floor(w.samples, 200, 250);
      // The ball line at 1.98x sits beside the 2x harmonic, so probe the
      // raceway lines only.
      for (FaultClass f : {FaultClass::OuterRace, FaultClass::InnerRace}) {
        const double peak = band_peak(w.samples, fault_order_ratio(f) * shaft_bin);
        CHECK(peak < 6.0 * floor);
      }
    }
  }
}

TEST_CASE("fault windows put at least 3x the noise floor at the fault line") {
  for (int id : {1, 7, 13}) {
    const DomainSpec spec = clean_env_spec(id);
    for (FaultClass f : spec.fault_classes) {
      if (f == FaultClass::Healthy) continue;
      for (double rpm : band_speeds(spec.speed_band)) {
        for (uint64_t seed : {1ull, 2ull, 3ull}) {
          const SignalWindow w = synthesize_window(spec, f, rpm, seed);
          const double shaft_bin =
              shaft_cycles_per_sample(spec, rpm) * static_cast<double>(w.samples.size());
          const double peak = band_peak(w.samples, fault_order_ratio(f) * shaft_bin);
          const double floor = noise_floor(w.samples, 200, 250);
          CHECK(peak > 3.0 * floor);
        }
      }
    }
  }
}

TEST_CASE("fault and healthy windows differ at the fault line by 3x the floor") {
  const DomainSpec spec = clean_env_spec(1);
  for (FaultClass f : {FaultClass::Ball, FaultClass::InnerRace, FaultClass::OuterRace}) {
    const SignalWindow faulty = synthesize_window(spec, f, 800.0, 17);
    const SignalWindow healthy = synthesize_window(spec, FaultClass::Healthy, 800.0, 17);
    const double shaft_bin =
        shaft_cycles_per_sample(spec, 800.0) * static_cast<double>(faulty.samples.size());
    const double bin = fault_order_ratio(f) * shaft_bin;
    const double floor = noise_floor(healthy.samples, 200, 250);
    CHECK(band_peak(faulty.samples, bin) - band_peak(healthy.samples, bin) > 3.0 * floor);
  }
}

TEST_CASE("U3 environment amplifies the shaft line beyond U1") {
  DomainSpec u1 = make_domain_spec(3);
  u1.environments = {Environment::U1};
  DomainSpec u3 = make_domain_spec(3);
  u3.environments = {Environment::U3};
  const SignalWindow a = synthesize_window(u1, FaultClass::Healthy, 600.0, 5);
  const SignalWindow b = synthesize_window(u3, FaultClass::Healthy, 600.0, 5);
  const double shaft_bin =
      shaft_cycles_per_sample(u1, 600.0) * static_cast<double>(a.samples.size());
  CHECK(band_peak(b.samples, shaft_bin) > band_peak(a.samples, shaft_bin));
}

TEST_CASE("seed changes the noise realization, not the harmonic skeleton") {
  for (int id : {1, 4, 9, 14}) {
    DomainSpec spec = make_domain_spec(id);
    spec.base_noise = 0.0;
    const auto& speeds = band_speeds(spec.speed_band);
    for (FaultClass f : spec.fault_classes) {
      const SignalWindow a = synthesize_window(spec, f, speeds[0], 1001);
      const SignalWindow b = synthesize_window(spec, f, speeds[0], 2002);
      CHECK(corr_at_zero_lag(a.samples, b.samples) > 0.5);
    }
  }
}

TEST_CASE("build_dataset splits are class-balanced with distinct seeds") {
  const DomainDataset ds = build_dataset(make_domain_spec(1), 40, 0.25, 7);
  CHECK(ds.train.size() == 4 * 30);
  CHECK(ds.test.size() == 4 * 10);

  const DomainDataset cyl = build_dataset(make_domain_spec(13), 40, 0.25, 7);
  CHECK(cyl.train.size() == 3 * 30);
  CHECK(cyl.test.size() == 3 * 10);

  std::map<FaultClass, int> train_counts;
  for (const auto& w : ds.train) train_counts[w.label]++;
  for (const auto& [label, count] : train_counts) CHECK(count == 30);

  std::set<uint64_t> seeds;
  for (const auto& w : ds.train) seeds.insert(w.seed);
  for (const auto& w : ds.test) seeds.insert(w.seed);
  CHECK(seeds.size() == ds.train.size() + ds.test.size());

  const DomainDataset again = build_dataset(make_domain_spec(1), 40, 0.25, 7);
  REQUIRE(again.train.size() == ds.train.size());
  for (size_t i = 0; i < ds.train.size(); ++i) {
    CHECK(again.train[i].samples == ds.train[i].samples);
  }

  CHECK_THROWS_AS(build_dataset(make_domain_spec(1), 1, 0.25, 7), std::invalid_argument);
  CHECK_THROWS_AS(build_dataset(make_domain_spec(1), 40, 0.0, 7), std::invalid_argument);
  CHECK_THROWS_AS(build_dataset(make_domain_spec(1), 40, 1.0, 7), std::invalid_argument);
}

TEST_CASE("csv export/import round-trips windows") {
  const DomainDataset ds = build_dataset(make_domain_spec(2), 4, 0.25, 3, 64);
  const std::string path = "test_windows_roundtrip.csv";
  export_windows_csv(path, ds.train);
  const std::vector<SignalWindow> back = import_windows_csv(path);
  REQUIRE(back.size() == ds.train.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].domain_id == ds.train[i].domain_id);
    CHECK(back[i].label == ds.train[i].label);
    CHECK(back[i].shaft_rpm == ds.train[i].shaft_rpm);
    CHECK(back[i].samples == ds.train[i].samples);
  }
  std::remove(path.c_str());
}
