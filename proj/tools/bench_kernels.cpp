// Times the OpenMP kernels against the serial reference on the shapes the
// trunk actually runs.

#include <chrono>
#include <cstdio>
#include <vector>

#include <omp.h>

#include "contdiag/kernels.hpp"
#include "contdiag/mtf.hpp"
#include "contdiag/rng.hpp"
#include "contdiag/signal.hpp"

using namespace contdiag;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <typename F>
double time_best_of(int reps, F&& fn) {
  double best = 1e30;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now_seconds();
    fn();
    best = std::min(best, now_seconds() - t0);
  }
  return best;
}

void bench_conv(const ConvShape& s, const char* label, int reps) {
  Rng rng(11);
  std::vector<double> in(static_cast<size_t>(s.batch) * s.in_ch * s.in_plane());
  std::vector<double> w(static_cast<size_t>(s.out_ch) * s.patch_len());
  std::vector<double> bias(s.out_ch);
  for (double& v : in) v = rng.uniform(-1, 1);
  for (double& v : w) v = rng.uniform(-1, 1);
  for (double& v : bias) v = rng.uniform(-1, 1);
  std::vector<double> out(static_cast<size_t>(s.batch) * s.out_ch * s.out_plane());
  std::vector<double> dout(out.size(), 0.5);
  std::vector<double> din(in.size());
  std::vector<double> dw(w.size());
  std::vector<double> db(bias.size());

  const double flops_fwd = 2.0 * s.batch * s.out_ch * s.out_plane() * s.patch_len();

  const double t_omp = time_best_of(
      reps, [&] { kernels::conv_forward(in.data(), w.data(), bias.data(), s, out.data()); });
  const double t_ref = time_best_of(
      reps, [&] { refk::conv_forward(in.data(), w.data(), bias.data(), s, out.data()); });
  const double t_omp_bwd = time_best_of(reps, [&] {
    kernels::conv_backward(in.data(), w.data(), s, dout.data(), din.data(), dw.data(), db.data());
  });
  const double t_ref_bwd = time_best_of(reps, [&] {
    refk::conv_backward(in.data(), w.data(), s, dout.data(), din.data(), dw.data(), db.data());
  });

  std::printf("%-22s fwd omp %8.3f ms (%6.2f GF/s)  ref %8.3f ms (%6.2f GF/s)  speedup %.2fx\n",
              label, t_omp * 1e3, flops_fwd / t_omp * 1e-9, t_ref * 1e3,
              flops_fwd / t_ref * 1e-9, t_ref / t_omp);
  std::printf("%-22s bwd omp %8.3f ms               ref %8.3f ms               speedup %.2fx\n",
              "", t_omp_bwd * 1e3, t_ref_bwd * 1e3, t_ref_bwd / t_omp_bwd);
}

void bench_encode(int reps) {
  const DomainSpec spec = make_domain_spec(1);
  std::vector<SignalWindow> windows;
  for (int i = 0; i < 64; ++i) {
    windows.push_back(synthesize_window(spec, FaultClass::OuterRace, 600.0, 1000 + i));
  }
  std::vector<MtfImage> images(windows.size());
  const double t_omp = time_best_of(reps, [&] {
#pragma omp parallel for
    for (long long i = 0; i < static_cast<long long>(windows.size()); ++i) {
      images[i] = encode(windows[i].samples, 8, 12);
    }
  });
  const double t_ser = time_best_of(reps, [&] {
    for (size_t i = 0; i < windows.size(); ++i) {
      images[i] = encode(windows[i].samples, 8, 12);
    }
  });
  std::printf("%-22s omp %8.3f ms  serial %8.3f ms  speedup %.2fx  (64 windows)\n", "mtf encode",
              t_omp * 1e3, t_ser * 1e3, t_ser / t_omp);
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  // conv2 on the 12x12 trunk: input 5x5x80 -> 3x3x80
  bench_conv({16, 80, 5, 5, 80, 3}, "conv2 (12px trunk)", 20);
  // conv2 on the 16x16 trunk: input 7x7x80 -> 5x5x80
  bench_conv({16, 80, 7, 7, 80, 3}, "conv2 (16px trunk)", 20);
  // conv1 on the 12x12 trunk
  bench_conv({16, 1, 12, 12, 80, 3}, "conv1 (12px trunk)", 20);
  bench_encode(10);
  return 0;
}
