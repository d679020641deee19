#pragma once

#include <vector>

#include "bwc/tensor.hpp"

namespace bwc {

// Tensor whose axes carry integer labels. Contracting two labelled tensors sums over
// every label they share; a label repeated on one tensor is traced.
struct LabeledTensor {
  DenseTensor t;
  std::vector<int> labels;
};

LabeledTensor trace_repeated(const LabeledTensor& a);
LabeledTensor contract_labeled(const LabeledTensor& a, const LabeledTensor& b);

// Contracts a whole network, always merging the pair with the smallest result.
LabeledTensor contract_network(std::vector<LabeledTensor> parts);

// Permutes the axes into the requested label order.
DenseTensor arrange(const LabeledTensor& a, const std::vector<int>& labels);

}  // namespace bwc
