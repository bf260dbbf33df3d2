#pragma once

#include "aan/tensor.hpp"

namespace aan {

// log(sigmoid(x)) = -softplus(-x), stable for any finite logit.
double log_sigmoid(double logit);
double sigmoid(double logit);

struct BceResult {
  double loss;  // mean over all logits
  Tensor grad;  // d(mean loss)/d(logit), same shape as logits
};

// Binary cross-entropy fused with the sigmoid: never evaluates log(0).
// target must be 0 or 1 and applies to every logit in the tensor.
BceResult bce_from_logits(const Tensor& logits, int target);

}  // namespace aan
