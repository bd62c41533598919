#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace contdiag {

// Row-stochastic matrix of quantile-bin transitions. Rows for bins that never
// start a pair are all-zero.
struct TransitionMatrix {
  int q_bins = 0;
  std::vector<double> w;  // q_bins x q_bins, row-major

  double at(int a, int b) const { return w[static_cast<size_t>(a) * q_bins + b]; }
};

// S x S image with pixels in [0, 1].
struct MtfImage {
  int size = 0;
  int bins = 0;
  int source_len = 0;
  std::vector<double> pixels;  // size x size, row-major

  double at(int i, int j) const { return pixels[static_cast<size_t>(i) * size + j]; }
};

// Quantile binning of a window into q_bins levels; equal-occupancy up to ties,
// ties broken toward the lower bin. A constant window maps entirely to bin 0.
std::vector<int> quantize(const std::vector<double>& samples, int q_bins);

std::vector<int> quantize(const double* samples, int n, int q_bins);

TransitionMatrix transition_matrix(const std::vector<int>& bins, int q_bins);

// field[i][j] = w[bins[i]][bins[j]], an n x n matrix.
std::vector<double> mtf_field(const std::vector<int>& bins, const TransitionMatrix& w);

// Non-overlapping block mean pooling with block floor(n/out_size); the
// remainder rows/columns fold into the last block.
MtfImage aggregate(const std::vector<double>& field, int n, int out_size, int q_bins);

// quantize -> transition_matrix -> mtf_field -> aggregate.
MtfImage encode(const std::vector<double>& samples, int q_bins, int out_size);

// Binary dump: magic "MTF1", u32 size, u32 bins (little-endian), then
// size*size float32 pixels, row-major.
void save_mtf(const std::string& path, const MtfImage& image);
MtfImage load_mtf(const std::string& path);

// 8-bit portable graymap for eyeballing.
void save_pgm(const std::string& path, const MtfImage& image);

}  // namespace contdiag
