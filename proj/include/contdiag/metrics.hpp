#pragma once

#include <cstdint>
#include <map>
#include <vector>

namespace contdiag {

// Lower-triangular accuracy record: row l holds the test accuracy of every
// domain position i <= l, written once right after episode l.
class AccuracyMatrix {
 public:
  explicit AccuracyMatrix(int total_domains);

  // Row for the next episode; must carry exactly one entry per seen position.
  void push_row(const std::vector<double>& row);

  double at(int episode, int position) const;  // 1-based, position <= episode
  int rows_written() const { return static_cast<int>(rows_.size()); }
  int total_domains() const { return total_; }
  bool complete() const { return rows_written() == total_; }
  const std::vector<std::vector<double>>& rows() const { return rows_; }

 private:
  int total_;
  std::vector<std::vector<double>> rows_;
};

// Mean final-row accuracy. Requires a complete matrix.
double acc(const AccuracyMatrix& m);

// Mean diagonal (just-learned) accuracy. Requires a complete matrix.
double la(const AccuracyMatrix& m);

// Mean over early positions of the largest later drop; negative under
// backward transfer. Requires a complete matrix with at least two domains.
double fm(const AccuracyMatrix& m);

struct ClassPrf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate_precision = false;
  bool degenerate_recall = false;
};

struct PrfReport {
  std::vector<ClassPrf> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

// Standard precision/recall/F1 from confusion[true][predicted]; 0/0 counts
// report 0 and set the degenerate flag.
PrfReport prf(const std::vector<std::vector<int>>& confusion);

// Two-sided Wilcoxon signed-rank p-value for paired samples; exact
// enumeration for up to 20 nonzero differences, normal approximation with
// tie correction beyond. All-zero differences give p = 1.
double wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);

struct RunResult {
  uint64_t seed = 0;
  double acc = 0.0;
  double la = 0.0;
  double fm = 0.0;
  bool fm_defined = false;
  std::map<int, double> per_domain_final;  // position -> final accuracy
  std::map<int, PrfReport> per_domain_prf;
};

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  int n = 0;
};

MeanStd mean_std(const std::vector<double>& values);

}  // namespace contdiag
