#include "contdiag/mtf.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace contdiag {

std::vector<int> quantize(const double* samples, int n, int q_bins) {
  if (q_bins < 2) throw std::invalid_argument("q_bins must be >= 2");
  if (n < q_bins) throw std::invalid_argument("window shorter than q_bins");

  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return samples[a] < samples[b]; });

  std::vector<int> bins(static_cast<size_t>(n));
  int prev_bin = 0;
  for (int p = 0; p < n; ++p) {
    int b = static_cast<int>(static_cast<long long>(p) * q_bins / n);
    if (p > 0 && samples[order[p]] == samples[order[p - 1]]) b = prev_bin;
    bins[order[p]] = b;
    prev_bin = b;
  }
  return bins;
}

std::vector<int> quantize(const std::vector<double>& samples, int q_bins) {
  return quantize(samples.data(), static_cast<int>(samples.size()), q_bins);
}

TransitionMatrix transition_matrix(const std::vector<int>& bins, int q_bins) {
  if (bins.size() < 2) throw std::invalid_argument("need at least two samples");
  for (int b : bins) {
    if (b < 0 || b >= q_bins) throw std::invalid_argument("bin value out of range");
  }
  TransitionMatrix tm;
  tm.q_bins = q_bins;
  tm.w.assign(static_cast<size_t>(q_bins) * q_bins, 0.0);
  std::vector<double> row_total(static_cast<size_t>(q_bins), 0.0);
  for (size_t i = 0; i + 1 < bins.size(); ++i) {
    tm.w[static_cast<size_t>(bins[i]) * q_bins + bins[i + 1]] += 1.0;
    row_total[bins[i]] += 1.0;
  }
  for (int a = 0; a < q_bins; ++a) {
    if (row_total[a] == 0.0) continue;
    for (int b = 0; b < q_bins; ++b) tm.w[static_cast<size_t>(a) * q_bins + b] /= row_total[a];
  }
  return tm;
}

std::vector<double> mtf_field(const std::vector<int>& bins, const TransitionMatrix& tm) {
  const size_t n = bins.size();
  std::vector<double> field(n * n);
  for (size_t i = 0; i < n; ++i) {
    const double* row = tm.w.data() + static_cast<size_t>(bins[i]) * tm.q_bins;
    double* out = field.data() + i * n;
    for (size_t j = 0; j < n; ++j) out[j] = row[bins[j]];
  }
  return field;
}

MtfImage aggregate(const std::vector<double>& field, int n, int out_size, int q_bins) {
  if (out_size <= 0 || out_size > n) throw std::invalid_argument("out_size must be in 1..n");
  if (field.size() != static_cast<size_t>(n) * n) {
    throw std::invalid_argument("field size does not match n");
  }
  const int block = n / out_size;
  MtfImage img;
  img.size = out_size;
  img.bins = q_bins;
  img.source_len = n;
  img.pixels.assign(static_cast<size_t>(out_size) * out_size, 0.0);
  for (int oi = 0; oi < out_size; ++oi) {
    const int r0 = oi * block;
    const int r1 = (oi == out_size - 1) ? n : r0 + block;
    for (int oj = 0; oj < out_size; ++oj) {
      const int c0 = oj * block;
      const int c1 = (oj == out_size - 1) ? n : c0 + block;
      double acc = 0.0;
      for (int r = r0; r < r1; ++r) {
        const double* row = field.data() + static_cast<size_t>(r) * n;
        for (int c = c0; c < c1; ++c) acc += row[c];
      }
      img.pixels[static_cast<size_t>(oi) * out_size + oj] =
          acc / (static_cast<double>(r1 - r0) * (c1 - c0));
    }
  }
  return img;
}

MtfImage encode(const std::vector<double>& samples, int q_bins, int out_size) {
  const auto bins = quantize(samples, q_bins);
  const auto tm = transition_matrix(bins, q_bins);
  const auto field = mtf_field(bins, tm);
  return aggregate(field, static_cast<int>(samples.size()), out_size, q_bins);
}

namespace {

void put_u32(std::ofstream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void save_mtf(const std::string& path, const MtfImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write("MTF1", 4);
  put_u32(out, static_cast<uint32_t>(image.size));
  put_u32(out, static_cast<uint32_t>(image.bins));
  for (double v : image.pixels) {
    float f = static_cast<float>(v);
    static_assert(sizeof(float) == 4);
    out.write(reinterpret_cast<const char*>(&f), 4);
  }
}

MtfImage load_mtf(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "MTF1", 4) != 0) {
    throw std::runtime_error("bad magic in " + path);
  }
  MtfImage img;
  img.size = static_cast<int>(get_u32(in));
  img.bins = static_cast<int>(get_u32(in));
  img.source_len = 0;
  img.pixels.resize(static_cast<size_t>(img.size) * img.size);
  for (double& v : img.pixels) {
    float f = 0.0f;
    in.read(reinterpret_cast<char*>(&f), 4);
    v = static_cast<double>(f);
  }
  if (!in) throw std::runtime_error("truncated image in " + path);
  return img;
}

void save_pgm(const std::string& path, const MtfImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "P5\n" << image.size << ' ' << image.size << "\n255\n";
  for (double v : image.pixels) {
    const int g = std::clamp(static_cast<int>(v * 255.0 + 0.5), 0, 255);
    out.put(static_cast<char>(g));
  }
}

}  // namespace contdiag
