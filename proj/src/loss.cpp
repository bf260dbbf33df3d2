#include "aan/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace aan {

double log_sigmoid(double logit) {
  // -softplus(-x) with the usual max trick
  if (logit >= 0.0) return -std::log1p(std::exp(-logit));
  return logit - std::log1p(std::exp(logit));
}

double sigmoid(double logit) {
  if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

BceResult bce_from_logits(const Tensor& logits, int target) {
  if (target != 0 && target != 1) throw std::invalid_argument("bce_from_logits: target must be 0 or 1");
  require_finite(logits, "bce_from_logits input");
  if (logits.numel() == 0) throw std::invalid_argument("bce_from_logits: empty logit tensor");
  const double n = static_cast<double>(logits.numel());
  const double t = static_cast<double>(target);
  BceResult r;
  r.loss = 0.0;
  r.grad = Tensor(logits.shape);
  for (std::int64_t i = 0; i < logits.numel(); ++i) {
    const double l = logits[i];
    // -[t*log(sig(l)) + (1-t)*log(1-sig(l))], log(1-sig(l)) = log_sigmoid(-l)
    r.loss += -(t * log_sigmoid(l) + (1.0 - t) * log_sigmoid(-l));
    r.grad[i] = (sigmoid(l) - t) / n;
  }
  r.loss /= n;
  return r;
}

}  // namespace aan
