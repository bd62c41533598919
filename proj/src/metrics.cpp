#include "contdiag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace contdiag {

AccuracyMatrix::AccuracyMatrix(int total_domains) : total_(total_domains) {
  if (total_domains < 1) throw std::invalid_argument("need at least one domain");
}

void AccuracyMatrix::push_row(const std::vector<double>& row) {
  const int episode = rows_written() + 1;
  if (episode > total_) throw std::logic_error("matrix already complete");
  if (static_cast<int>(row.size()) != episode) {
    throw std::invalid_argument("row " + std::to_string(episode) + " must have " +
                                std::to_string(episode) + " entries");
  }
  for (double v : row) {
    if (v < 0.0 || v > 1.0) throw std::invalid_argument("accuracy outside [0,1]");
  }
  rows_.push_back(row);
}

double AccuracyMatrix::at(int episode, int position) const {
  if (episode < 1 || episode > rows_written() || position < 1 || position > episode) {
    throw std::out_of_range("accuracy matrix index out of range");
  }
  return rows_[episode - 1][position - 1];
}

namespace {

void require_complete(const AccuracyMatrix& m) {
  if (!m.complete()) throw std::logic_error("accuracy matrix incomplete");
}

}  // namespace

double acc(const AccuracyMatrix& m) {
  require_complete(m);
  const int d = m.total_domains();
  double total = 0.0;
  for (int i = 1; i <= d; ++i) total += m.at(d, i);
  return total / static_cast<double>(d);
}

double la(const AccuracyMatrix& m) {
  require_complete(m);
  const int d = m.total_domains();
  double total = 0.0;
  for (int i = 1; i <= d; ++i) total += m.at(i, i);
  return total / static_cast<double>(d);
}

double fm(const AccuracyMatrix& m) {
  require_complete(m);
  const int d = m.total_domains();
  if (d < 2) throw std::logic_error("forgetting undefined for a single domain");
  double total = 0.0;
  for (int i = 1; i <= d - 1; ++i) {
    double best = -HUGE_VAL;
    for (int l = i; l <= d - 1; ++l) best = std::max(best, m.at(l, i) - m.at(d, i));
    total += best;
  }
  return total / static_cast<double>(d - 1);
}

PrfReport prf(const std::vector<std::vector<int>>& confusion) {
  const size_t n = confusion.size();
  for (const auto& row : confusion) {
    if (row.size() != n) throw std::invalid_argument("confusion matrix must be square");
    for (int v : row) {
      if (v < 0) throw std::invalid_argument("confusion counts must be non-negative");
    }
  }
  PrfReport report;
  report.per_class.resize(n);
  for (size_t c = 0; c < n; ++c) {
    long long tp = confusion[c][c];
    long long col = 0;
    long long row = 0;
    for (size_t i = 0; i < n; ++i) {
      col += confusion[i][c];
      row += confusion[c][i];
    }
    ClassPrf& e = report.per_class[c];
    if (col == 0) {
      e.degenerate_precision = true;
    } else {
      e.precision = static_cast<double>(tp) / static_cast<double>(col);
    }
    if (row == 0) {
      e.degenerate_recall = true;
    } else {
      e.recall = static_cast<double>(tp) / static_cast<double>(row);
    }
    if (e.precision + e.recall > 0.0) {
      e.f1 = 2.0 * e.precision * e.recall / (e.precision + e.recall);
    }
    report.macro_precision += e.precision;
    report.macro_recall += e.recall;
    report.macro_f1 += e.f1;
  }
  if (n > 0) {
    report.macro_precision /= static_cast<double>(n);
    report.macro_recall /= static_cast<double>(n);
    report.macro_f1 /= static_cast<double>(n);
  }
  return report;
}

double wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired samples must match in length");
  if (a.size() < 5) throw std::invalid_argument("need at least 5 pairs");

  std::vector<double> diffs;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) return 1.0;
  const int m = static_cast<int>(diffs.size());

  // Midranks of |d|, doubled so they stay integral under ties.
  std::vector<int> order(m);
  for (int i = 0; i < m; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return std::abs(diffs[x]) < std::abs(diffs[y]); });
  std::vector<long long> rank2(m, 0);
  std::vector<long long> tie_sizes;
  int i = 0;
  while (i < m) {
    int j = i;
    while (j < m && std::abs(diffs[order[j]]) == std::abs(diffs[order[i]])) ++j;
    const long long sum2 = static_cast<long long>(i + 1 + j) * (j - i);  // 2 * midrank * count
    const long long r2 = sum2 / (j - i);
    for (int t = i; t < j; ++t) rank2[order[t]] = r2;
    tie_sizes.push_back(j - i);
    i = j;
  }

  long long w_plus2 = 0;
  long long total2 = 0;
  for (int t = 0; t < m; ++t) {
    total2 += rank2[t];
    if (diffs[t] > 0.0) w_plus2 += rank2[t];
  }

  if (m <= 20) {
    // Exact distribution of W+ over all 2^m sign assignments.
    std::vector<double> counts(static_cast<size_t>(total2) + 1, 0.0);
    counts[0] = 1.0;
    long long upper = 0;
    for (int t = 0; t < m; ++t) {
      upper += rank2[t];
      for (long long s = upper; s >= rank2[t]; --s) counts[s] += counts[s - rank2[t]];
    }
    const double denom = std::pow(2.0, m);
    double le = 0.0;
    double ge = 0.0;
    for (long long s = 0; s <= total2; ++s) {
      if (s <= w_plus2) le += counts[s];
      if (s >= w_plus2) ge += counts[s];
    }
    return std::min(1.0, 2.0 * std::min(le, ge) / denom);
  }

  // Normal approximation with tie correction.
  const double w = static_cast<double>(w_plus2) / 2.0;
  const double mu = static_cast<double>(m) * (m + 1) / 4.0;
  double var = static_cast<double>(m) * (m + 1) * (2 * m + 1) / 24.0;
  for (long long t : tie_sizes) var -= static_cast<double>(t * t * t - t) / 48.0;
  const double z = (w - mu) / std::sqrt(var);
  return std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  out.n = static_cast<int>(values.size());
  if (out.n == 0) return out;
  double total = 0.0;
  for (double v : values) total += v;
  out.mean = total / out.n;
  if (out.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / (out.n - 1));
  }
  return out;
}

}  // namespace contdiag
