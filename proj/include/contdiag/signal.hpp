#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace contdiag {

enum class Bearing { DeepGroove6204, Tapered30204, CylindricalN204, CylindricalNJ204 };
enum class FaultClass { Ball, InnerRace, OuterRace, Healthy };
enum class Environment { H, M1, M2, M3, U1, U2, U3, L };
enum class SpeedBand { Slow, Fast };

inline constexpr int kDefaultWindowLen = 512;

// One of the 18 domain configurations: bearing model, fault label set,
// environmental condition set and speed band.
struct DomainSpec {
  int domain_id = 0;
  Bearing bearing = Bearing::DeepGroove6204;
  std::vector<FaultClass> fault_classes;
  std::vector<Environment> environments;
  SpeedBand speed_band = SpeedBand::Slow;
  double sample_rate_hz = 8000.0;
  double base_noise = 0.05;
};

struct SignalWindow {
  std::vector<double> samples;
  FaultClass label = FaultClass::Healthy;
  int domain_id = 0;
  double shaft_rpm = 0.0;
  uint64_t seed = 0;
};

struct DomainDataset {
  DomainSpec spec;
  std::vector<SignalWindow> train;
  std::vector<SignalWindow> test;
};

const std::vector<double>& band_speeds(SpeedBand band);

const char* fault_name(FaultClass f);
FaultClass fault_from_name(const std::string& name);
const char* bearing_name(Bearing b);
const char* environment_name(Environment e);

// Table-driven construction of one of the 18 domains; throws
// std::invalid_argument outside 1..18.
DomainSpec make_domain_spec(int domain_id);

// Index of a label inside spec.fault_classes; throws if absent.
int label_index(const DomainSpec& spec, FaultClass label);

// Normalized frequency (cycles/sample) of the shaft line in a synthesized
// window. Windows model an acquisition decimated by a fixed factor so that a
// 512-sample window spans tens of shaft revolutions.
double shaft_cycles_per_sample(const DomainSpec& spec, double shaft_rpm);

// Fault characteristic frequency as a multiple of the shaft frequency.
double fault_order_ratio(FaultClass f);

// Deterministic in all arguments. Gaussian noise, per-window amplitude
// jitter, burst timing jitter and the environment pick all derive from seed.
SignalWindow synthesize_window(const DomainSpec& spec, FaultClass label, double shaft_rpm,
                               uint64_t seed, int window_len = kDefaultWindowLen);

// Class-balanced train/test split with disjoint per-window seed ranges.
DomainDataset build_dataset(const DomainSpec& spec, int n_per_class, double test_fraction,
                            uint64_t base_seed, int window_len = kDefaultWindowLen);

// CSV rows: domain_id,label,rpm,s0,...,s{N-1}. No header line.
void export_windows_csv(const std::string& path, const std::vector<SignalWindow>& windows);
std::vector<SignalWindow> import_windows_csv(const std::string& path);

}  // namespace contdiag
