#pragma once

#include <vector>

#include "contdiag/mtf.hpp"

namespace contdiag {

struct EncodedSample {
  MtfImage image;
  int label = 0;
};

// One domain's encoded splits, keyed by its position in the training order.
struct EncodedDomain {
  int position = 0;
  int domain_id = 0;
  int n_classes = 0;
  std::vector<EncodedSample> train;
  std::vector<EncodedSample> test;
};

}  // namespace contdiag
