#include "contdiag/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "contdiag/rng.hpp"

namespace contdiag {

namespace {

// Windows model an order-tracked (angle-synchronous) acquisition resampled to
// a fixed number of samples per shaft revolution: harmonic and fault lines
// sit at rpm-invariant orders, while structural resonances excited by the
// impacts shift with shaft speed as they do in the order domain.
constexpr double kSamplesPerRev = 20.0;

constexpr double kShaftAmp = 1.0;
constexpr double kSecondHarmonicAmp = 0.10;
constexpr double kShaftPhase = 0.0;
constexpr double kSecondPhase = 0.9;

// Severity constants: M adds a 2x line, U scales the 1x line, L adds
// sub-harmonic rattle bursts at 0.5x.
constexpr double kMisalignAmp[3] = {0.2, 0.4, 0.6};
constexpr double kUnbalanceScale[3] = {1.3, 1.6, 2.0};
constexpr double kLoosenessBurstAmp = 0.30;
constexpr double kLoosenessRingFreq = 0.06;  // cycles/sample
constexpr double kLoosenessTau = 14.0;       // samples

constexpr double kFaultLineAmp = 0.9;
constexpr double kFaultBurstAmp = 0.7;
constexpr double kFaultLinePhase = 0.3;
constexpr double kFaultBurstTau = 4.0;
constexpr double kAmpJitterLo = 0.6;
constexpr double kAmpJitterHi = 1.4;
constexpr double kBurstTimeJitter = 0.12;  // fraction of the burst period

// Structural resonance excited by fault impacts, by bearing model (Hz).
double ring_freq_hz(Bearing b) {
  switch (b) {
    case Bearing::DeepGroove6204: return 60.0;
    case Bearing::Tapered30204: return 68.0;
    case Bearing::CylindricalN204: return 76.0;
    case Bearing::CylindricalNJ204: return 84.0;
  }
  return 70.0;
}

// Fixed-Hz resonance mapped into the order-tracked sample grid.
double ring_cycles_per_sample(Bearing b, double shaft_rpm) {
  return ring_freq_hz(b) / (shaft_rpm / 60.0) / kSamplesPerRev;
}

void add_sine(std::vector<double>& x, double cps, double amp, double phase) {
  if (amp == 0.0) return;
  const double w = 2.0 * M_PI * cps;
  for (size_t i = 0; i < x.size(); ++i) x[i] += amp * std::sin(w * static_cast<double>(i) + phase);
}

// Exponentially decaying ring repeated at `rate` bursts/sample with seeded
// per-burst timing jitter.
void add_burst_train(std::vector<double>& x, double rate, double amp, double ring_cps, double tau,
                     Rng& rng) {
  if (rate <= 0.0 || amp == 0.0) return;
  const double period = 1.0 / rate;
  const int n = static_cast<int>(x.size());
  const int count = static_cast<int>(std::floor(n * rate)) + 1;
  const double w = 2.0 * M_PI * ring_cps;
  const int span = static_cast<int>(6.0 * tau);
  for (int k = 0; k < count; ++k) {
    const double jitter = (rng.uniform() - 0.5) * 2.0 * kBurstTimeJitter * period;
    const double t0 = k * period + jitter;
    int start = static_cast<int>(std::ceil(std::max(0.0, t0)));
    int end = std::min(n, start + span);
    for (int i = start; i < end; ++i) {
      const double dt = static_cast<double>(i) - t0;
      x[i] += amp * std::exp(-dt / tau) * std::sin(w * dt);
    }
  }
}

double rms(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

}  // namespace

const std::vector<double>& band_speeds(SpeedBand band) {
  static const std::vector<double> slow = {600.0, 800.0, 1000.0};
  static const std::vector<double> fast = {1200.0, 1400.0, 1600.0};
  return band == SpeedBand::Slow ? slow : fast;
}

const char* fault_name(FaultClass f) {
  switch (f) {
    case FaultClass::Ball: return "Ball";
    case FaultClass::InnerRace: return "InnerRace";
    case FaultClass::OuterRace: return "OuterRace";
    case FaultClass::Healthy: return "Healthy";
  }
  return "?";
}

FaultClass fault_from_name(const std::string& name) {
  if (name == "Ball") return FaultClass::Ball;
  if (name == "InnerRace") return FaultClass::InnerRace;
  if (name == "OuterRace") return FaultClass::OuterRace;
  if (name == "Healthy") return FaultClass::Healthy;
  throw std::invalid_argument("unknown fault class: " + name);
}

const char* bearing_name(Bearing b) {
  switch (b) {
    case Bearing::DeepGroove6204: return "6204";
    case Bearing::Tapered30204: return "30204";
    case Bearing::CylindricalN204: return "N204";
    case Bearing::CylindricalNJ204: return "NJ204";
  }
  return "?";
}

const char* environment_name(Environment e) {
  switch (e) {
    case Environment::H: return "H";
    case Environment::M1: return "M1";
    case Environment::M2: return "M2";
    case Environment::M3: return "M3";
    case Environment::U1: return "U1";
    case Environment::U2: return "U2";
    case Environment::U3: return "U3";
    case Environment::L: return "L";
  }
  return "?";
}

DomainSpec make_domain_spec(int domain_id) {
  if (domain_id < 1 || domain_id > 18) {
    throw std::invalid_argument("domain_id must be in 1..18");
  }
  DomainSpec spec;
  spec.domain_id = domain_id;

  if (domain_id <= 6) {
    spec.bearing = Bearing::DeepGroove6204;
  } else if (domain_id <= 12) {
    spec.bearing = Bearing::Tapered30204;
  } else {
    spec.bearing = (domain_id % 2 == 1) ? Bearing::CylindricalN204 : Bearing::CylindricalNJ204;
  }

  if (domain_id <= 12) {
    spec.fault_classes = {FaultClass::Ball, FaultClass::InnerRace, FaultClass::OuterRace,
                          FaultClass::Healthy};
  } else {
    spec.fault_classes = {FaultClass::OuterRace, FaultClass::Healthy, FaultClass::InnerRace};
  }

  switch (((domain_id - 1) / 2) % 3) {
    case 0:
      spec.environments = {Environment::H, Environment::M1, Environment::U1, Environment::L};
      break;
    case 1:
      spec.environments = {Environment::H, Environment::U1, Environment::U2, Environment::U3};
      break;
    default:
      spec.environments = {Environment::H, Environment::M1, Environment::M2, Environment::M3};
      break;
  }

  spec.speed_band = (domain_id % 2 == 1) ? SpeedBand::Slow : SpeedBand::Fast;
  spec.sample_rate_hz = (spec.speed_band == SpeedBand::Slow) ? 8000.0 : 16000.0;
  spec.base_noise = 0.05;
  return spec;
}

int label_index(const DomainSpec& spec, FaultClass label) {
  for (size_t i = 0; i < spec.fault_classes.size(); ++i) {
    if (spec.fault_classes[i] == label) return static_cast<int>(i);
  }
  throw std::invalid_argument(std::string("label ") + fault_name(label) +
                              " not present in domain " + std::to_string(spec.domain_id));
}

double shaft_cycles_per_sample(const DomainSpec& spec, double shaft_rpm) {
  (void)spec;
  (void)shaft_rpm;
  return 1.0 / kSamplesPerRev;
}

double fault_order_ratio(FaultClass f) {
  switch (f) {
    case FaultClass::OuterRace: return 3.05;
    case FaultClass::InnerRace: return 4.95;
    case FaultClass::Ball: return 1.98;
    case FaultClass::Healthy: return 0.0;
  }
  return 0.0;
}

SignalWindow synthesize_window(const DomainSpec& spec, FaultClass label, double shaft_rpm,
                               uint64_t seed, int window_len) {
  const int li = label_index(spec, label);  // validates the label
  const auto& speeds = band_speeds(spec.speed_band);
  if (std::find(speeds.begin(), speeds.end(), shaft_rpm) == speeds.end()) {
    throw std::invalid_argument("shaft_rpm not in the domain's speed band");
  }
  if (window_len <= 0) throw std::invalid_argument("window_len must be positive");

  uint64_t stream = hash_combine(seed, static_cast<uint64_t>(spec.domain_id));
  stream = hash_combine(stream, static_cast<uint64_t>(li));
  stream = hash_combine(stream, static_cast<uint64_t>(shaft_rpm));
  Rng rng(stream);

  const Environment env = spec.environments.empty()
                              ? Environment::H
                              : spec.environments[rng.index(spec.environments.size())];

  const double shaft = shaft_cycles_per_sample(spec, shaft_rpm);
  std::vector<double> x(static_cast<size_t>(window_len), 0.0);

  double shaft_amp = kShaftAmp;
  double second_amp = kSecondHarmonicAmp;
  switch (env) {
    case Environment::U1: shaft_amp *= kUnbalanceScale[0]; break;
    case Environment::U2: shaft_amp *= kUnbalanceScale[1]; break;
    case Environment::U3: shaft_amp *= kUnbalanceScale[2]; break;
    case Environment::M1: second_amp += kMisalignAmp[0]; break;
    case Environment::M2: second_amp += kMisalignAmp[1]; break;
    case Environment::M3: second_amp += kMisalignAmp[2]; break;
    default: break;
  }

  add_sine(x, shaft, shaft_amp, kShaftPhase);
  add_sine(x, 2.0 * shaft, second_amp, kSecondPhase);

  if (env == Environment::L) {
    add_burst_train(x, 0.5 * shaft, kLoosenessBurstAmp, kLoosenessRingFreq, kLoosenessTau, rng);
  }

  if (label != FaultClass::Healthy) {
    const double jitter = rng.uniform(kAmpJitterLo, kAmpJitterHi);
    const double fault_cps = fault_order_ratio(label) * shaft;
    add_sine(x, fault_cps, kFaultLineAmp * jitter, kFaultLinePhase);
    add_burst_train(x, fault_cps, kFaultBurstAmp * jitter,
                    ring_cycles_per_sample(spec.bearing, shaft_rpm), kFaultBurstTau, rng);
  }

  if (spec.base_noise > 0.0) {
    const double sigma = spec.base_noise * rms(x);
    for (double& v : x) v += sigma * rng.gauss();
  }

  SignalWindow w;
  w.samples = std::move(x);
  w.label = label;
  w.domain_id = spec.domain_id;
  w.shaft_rpm = shaft_rpm;
  w.seed = seed;
  return w;
}

DomainDataset build_dataset(const DomainSpec& spec, int n_per_class, double test_fraction,
                            uint64_t base_seed, int window_len) {
  if (n_per_class < 2) throw std::invalid_argument("n_per_class must be >= 2");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test_fraction must be in (0, 1)");
  }
  int n_test = static_cast<int>(std::llround(n_per_class * test_fraction));
  n_test = std::clamp(n_test, 1, n_per_class - 1);
  const int n_train = n_per_class - n_test;

  const auto& speeds = band_speeds(spec.speed_band);
  DomainDataset ds;
  ds.spec = spec;
  for (size_t ci = 0; ci < spec.fault_classes.size(); ++ci) {
    const FaultClass label = spec.fault_classes[ci];
    for (int j = 0; j < n_per_class; ++j) {
      uint64_t seed = hash_combine(base_seed, static_cast<uint64_t>(spec.domain_id));
      seed = hash_combine(seed, static_cast<uint64_t>(ci));
      seed = hash_combine(seed, static_cast<uint64_t>(j));
      const double rpm = speeds[static_cast<size_t>(j) % speeds.size()];
      SignalWindow w = synthesize_window(spec, label, rpm, seed, window_len);
      (j < n_train ? ds.train : ds.test).push_back(std::move(w));
    }
  }
  return ds;
}

void export_windows_csv(const std::string& path, const std::vector<SignalWindow>& windows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  char buf[64];
  for (const auto& w : windows) {
    out << w.domain_id << ',' << fault_name(w.label) << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", w.shaft_rpm);
    out << buf;
    for (double s : w.samples) {
      std::snprintf(buf, sizeof(buf), "%.17g", s);
      out << ',' << buf;
    }
    out << '\n';
  }
}

std::vector<SignalWindow> import_windows_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::vector<SignalWindow> windows;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    SignalWindow w;
    if (!std::getline(ss, field, ',')) continue;
    w.domain_id = std::stoi(field);
    if (!std::getline(ss, field, ',')) {
      throw std::runtime_error("missing label at line " + std::to_string(lineno));
    }
    w.label = fault_from_name(field);
    if (!std::getline(ss, field, ',')) {
      throw std::runtime_error("missing rpm at line " + std::to_string(lineno));
    }
    w.shaft_rpm = std::stod(field);
    while (std::getline(ss, field, ',')) w.samples.push_back(std::stod(field));
    if (w.samples.empty()) {
      throw std::runtime_error("no samples at line " + std::to_string(lineno));
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

}  // namespace contdiag
