#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "aan/loss.hpp"

using namespace aan;

TEST_CASE("bce at logit 0: loss log 2, gradient +-0.5") {
  Tensor l({1}, {0.0});
  auto pos = bce_from_logits(l, 1);
  CHECK(pos.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(pos.grad[0] == doctest::Approx(-0.5).epsilon(1e-15));
  auto neg = bce_from_logits(l, 0);
  CHECK(neg.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(neg.grad[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("bce at logit 50, target 0: loss is about 50 with no overflow") {
  Tensor l({1}, {50.0});
  auto r = bce_from_logits(l, 0);
  // Extended-precision reference: 50 + log1p(exp(-50)).
  const long double ref = 50.0L + std::log1p(std::exp(-50.0L));
  CHECK(std::isfinite(r.loss));
  CHECK(r.loss == doctest::Approx(static_cast<double>(ref)).epsilon(1e-15));
  CHECK(r.grad[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bce gradient matches finite differences of the stable loss") {
  for (double logit : {-3.0, -0.7, 0.0, 1.3, 8.0}) {
    for (int target : {0, 1}) {
      Tensor l({1}, {logit});
      auto r = bce_from_logits(l, target);
      const double eps = 1e-6;
      Tensor lp({1}, {logit + eps}), lm({1}, {logit - eps});
      const double fd = (bce_from_logits(lp, target).loss - bce_from_logits(lm, target).loss) / (2 * eps);
      CHECK(r.grad[0] == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("bce stays finite over the whole tested logit range") {
  for (double logit = -1000.0; logit <= 1000.0; logit += 61.3) {
    Tensor l({1}, {logit});
    CHECK(std::isfinite(bce_from_logits(l, 0).loss));
    CHECK(std::isfinite(bce_from_logits(l, 1).loss));
  }
  Tensor big({2}, {1e3, -1e3});
  CHECK(std::isfinite(bce_from_logits(big, 1).loss));
}

TEST_CASE("bce mean reduction over a batch") {
  Tensor l({2}, {0.0, 0.0});
  auto r = bce_from_logits(l, 1);
  CHECK(r.loss == doctest::Approx(std::log(2.0)));
  CHECK(r.grad[0] == doctest::Approx(-0.25));  // (sigmoid-1)/N
}

TEST_CASE("bce rejects bad targets and non-finite logits") {
  Tensor l({1}, {0.0});
  CHECK_THROWS_AS(bce_from_logits(l, 2), std::invalid_argument);
  Tensor bad({1}, {std::numeric_limits<double>::quiet_NaN()});
  CHECK_THROWS_AS(bce_from_logits(bad, 0), std::runtime_error);
}
