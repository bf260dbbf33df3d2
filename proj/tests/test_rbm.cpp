#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "aan/loss.hpp"
#include "aan/rbm.hpp"
#include "helpers/rbm_enum_oracle.hpp"

using namespace aan;
using aan_test::JointEnum;
using aan_test::random_rbm;

namespace {

Tensor spins_tensor(const std::vector<std::vector<double>>& rows) {
  const int n = static_cast<int>(rows.size());
  const int d = static_cast<int>(rows[0].size());
  Tensor t({n, d});
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) t[r * d + c] = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return t;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return num / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> flatten_grads(const RbmGradients& g) {
  std::vector<double> out;
  Tensor w = g.total_w(), b = g.total_b(), c = g.total_c();
  out.insert(out.end(), w.data.begin(), w.data.end());
  out.insert(out.end(), b.data.begin(), b.data.end());
  out.insert(out.end(), c.data.begin(), c.data.end());
  return out;
}

}  // namespace

TEST_CASE("energy: zero parameters, two visible units -> exactly 1") {
  RbmParams p(2, 3);
  std::vector<double> v{1.0, -1.0}, h{1.0, 1.0, -1.0};
  CHECK(energy(v, h, p) == 1.0);
}

TEST_CASE("energy: 1x1 with w=0.5 and aligned spins -> 0") {
  RbmParams p(1, 1);
  p.w[0] = 0.5;
  std::vector<double> v{1.0}, h{1.0};
  CHECK(energy(v, h, p) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("energy: global spin flip is a symmetry when biases vanish") {
  Rng rng(7);
  RbmParams p = random_rbm(3, 4, 0.7, 0.0, rng);
  for (double& b : p.b.data) b = 0.0;
  for (double& c : p.c.data) c = 0.0;
  for (std::uint64_t vb = 0; vb < 8; ++vb) {
    for (std::uint64_t hb = 0; hb < 16; ++hb) {
      auto v = spins_from_bits(vb, 3);
      auto h = spins_from_bits(hb, 4);
      auto vf = v, hf = h;
      for (double& x : vf) x = -x;
      for (double& x : hf) x = -x;
      CHECK(energy(v, h, p) == doctest::Approx(energy(vf, hf, p)).epsilon(1e-14));
    }
  }
}

TEST_CASE("energy validates lengths and spin values") {
  RbmParams p(2, 2);
  std::vector<double> h{1.0, 1.0};
  std::vector<double> bad_len{1.0};
  std::vector<double> bad_val{0.5, 1.0};
  CHECK_THROWS_AS(energy(bad_len, h, p), std::invalid_argument);
  CHECK_THROWS_AS(energy(bad_val, h, p), std::invalid_argument);
}

TEST_CASE("hidden_conditional: zero parameters give probability one half") {
  RbmParams p(3, 2);
  auto probs = hidden_conditional(std::vector<double>{1.0, -1.0, 1.0}, p);
  for (double pr : probs) CHECK(pr == 0.5);
}

TEST_CASE("hidden_conditional: unit weight gives sigmoid(2)") {
  RbmParams p(1, 1);
  p.w[0] = 1.0;
  auto probs = hidden_conditional(std::vector<double>{1.0}, p);
  CHECK(probs[0] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-15));
  CHECK(probs[0] == doctest::Approx(0.8808).epsilon(1e-4));
}

TEST_CASE("visible_conditional: negative unit weight gives sigmoid(-2)") {
  RbmParams p(1, 1);
  p.w[0] = -1.0;
  auto probs = visible_conditional(std::vector<double>{1.0}, p);
  CHECK(probs[0] == doctest::Approx(1.0 / (1.0 + std::exp(2.0))).epsilon(1e-15));
  CHECK(probs[0] == doctest::Approx(0.1192).epsilon(1e-3));
}

TEST_CASE("conditionals match the naive joint enumeration to 1e-12") {
  Rng rng(11);
  RbmParams p32 = random_rbm(3, 2, 0.6, 0.3, rng);
  JointEnum joint = JointEnum::build(p32);
  for (std::uint64_t vb = 0; vb < 8; ++vb) {
    auto v = spins_from_bits(vb, 3);
    auto probs = hidden_conditional(v, p32);
    for (int j = 0; j < 2; ++j) {
      CHECK(probs[static_cast<std::size_t>(j)] == doctest::Approx(joint.cond_h_plus(vb, j)).epsilon(1e-12));
    }
  }
  RbmParams p23 = random_rbm(2, 3, 0.6, 0.3, rng);
  JointEnum joint23 = JointEnum::build(p23);
  for (std::uint64_t hb = 0; hb < 8; ++hb) {
    auto h = spins_from_bits(hb, 3);
    auto probs = visible_conditional(h, p23);
    for (int i = 0; i < 2; ++i) {
      CHECK(probs[static_cast<std::size_t>(i)] == doctest::Approx(joint23.cond_v_plus(hb, i)).epsilon(1e-12));
    }
  }
}

TEST_CASE("the quadratic energy term is constant on spins and cancels everywhere") {
  Rng rng(13);
  RbmParams p = random_rbm(3, 3, 0.5, 0.2, rng);
  JointEnum with = JointEnum::build(p, true);
  JointEnum without = JointEnum::build(p, false);
  // log Z shifts by exactly -n_v/2; probabilities are untouched.
  CHECK(with.log_z == doctest::Approx(without.log_z - 1.5).epsilon(1e-12));
  for (std::size_t i = 0; i < with.prob.size(); ++i) {
    CHECK(with.prob[i] == doctest::Approx(without.prob[i]).epsilon(1e-12));
  }
  CHECK(exact_partition(p) == doctest::Approx(with.log_z).epsilon(1e-12));
}

TEST_CASE("sample_spins: degenerate probabilities and binomial means") {
  Rng rng(17);
  Tensor ones({100}, 1.0);
  Tensor spins = sample_spins(ones, rng);
  for (double s : spins.data) CHECK(s == 1.0);
  Tensor zeros({100}, 0.0);
  spins = sample_spins(zeros, rng);
  for (double s : spins.data) CHECK(s == -1.0);

  const int n = 100000;
  for (double pr : {0.5, 0.75}) {
    Tensor probs({n}, pr);
    Tensor draws = sample_spins(probs, rng);
    const double mean = std::accumulate(draws.data.begin(), draws.data.end(), 0.0) / n;
    const double expect = 2.0 * pr - 1.0;
    const double sigma = std::sqrt((1.0 - expect * expect) / n);
    CHECK(std::fabs(mean - expect) < 3.0 * sigma);
  }
}

TEST_CASE("gibbs chain at zero parameters has symmetric long-run means") {
  RbmParams p(3, 2);
  Rng rng(19);
  Tensor v0 = sample_spins(Tensor({1, 3}, 0.5), rng);
  GibbsChainState chain = GibbsChainState::from_visible(v0, p, Rng(12345));
  const int sweeps = 100000;
  std::vector<double> sums(3, 0.0);
  for (int s = 0; s < sweeps; ++s) {
    gibbs_step(chain, p);
    for (int u = 0; u < 3; ++u) sums[static_cast<std::size_t>(u)] += chain.v[u];
  }
  const double sigma = 1.0 / std::sqrt(static_cast<double>(sweeps));
  for (double s : sums) CHECK(std::fabs(s / sweeps) < 3.0 * sigma);
  CHECK(chain.steps_taken == sweeps);
}

TEST_CASE("empirical conditional means follow tanh(field)") {
  Rng rng(23);
  RbmParams p = random_rbm(4, 3, 0.8, 0.4, rng);
  Tensor v = sample_spins(Tensor({1, 4}, 0.5), rng);
  std::span<const double> vrow(v.data.data(), 4);
  auto field = hidden_field(vrow, p);
  const int n = 100000;
  Tensor probs = hidden_conditional_batch(v, p);
  std::vector<double> sums(3, 0.0);
  for (int s = 0; s < n; ++s) {
    Tensor h = sample_spins(probs, rng);
    for (int j = 0; j < 3; ++j) sums[static_cast<std::size_t>(j)] += h[j];
  }
  for (int j = 0; j < 3; ++j) {
    const double expect = std::tanh(field[static_cast<std::size_t>(j)]);
    const double sigma = std::sqrt((1.0 - expect * expect) / n);
    CHECK(std::fabs(sums[static_cast<std::size_t>(j)] / n - expect) < 3.0 * sigma);
  }
}

TEST_CASE("gibbs chain visits the enumerated joint distribution (total variation < 0.02)") {
  Rng rng(29);
  RbmParams p = random_rbm(3, 2, 0.4, 0.2, rng);
  JointEnum joint = JointEnum::build(p);

  Tensor v0 = sample_spins(Tensor({1, 3}, 0.5), rng);
  GibbsChainState chain = GibbsChainState::from_visible(v0, p, Rng(777));
  for (int s = 0; s < 10000; ++s) gibbs_step(chain, p);  // burn-in
  const int kept = 100000;
  std::vector<double> counts(32, 0.0);
  for (int s = 0; s < kept; ++s) {
    gibbs_step(chain, p);
    std::uint64_t vb = 0, hb = 0;
    for (int i = 0; i < 3; ++i) vb |= (chain.v[i] > 0 ? 1ull : 0ull) << i;
    for (int j = 0; j < 2; ++j) hb |= (chain.h[j] > 0 ? 1ull : 0ull) << j;
    counts[(vb << 2) | hb] += 1.0;
  }
  double tv = 0.0;
  for (std::size_t s = 0; s < 32; ++s) tv += std::fabs(counts[s] / kept - joint.prob[s]);
  tv /= 2.0;
  CHECK(tv < 0.02);
}

TEST_CASE("gibbs chains are deterministic given the seed") {
  Rng rng(31);
  RbmParams p = random_rbm(4, 4, 0.5, 0.2, rng);
  Tensor v0 = sample_spins(Tensor({2, 4}, 0.5), rng);
  GibbsChainState a = GibbsChainState::from_visible(v0, p, Rng(42));
  GibbsChainState b = GibbsChainState::from_visible(v0, p, Rng(42));
  for (int s = 0; s < 200; ++s) {
    gibbs_step(a, p);
    gibbs_step(b, p);
    CHECK(a.v.data == b.v.data);
    CHECK(a.h.data == b.h.data);
  }
}

TEST_CASE("cd_k_update rejects k < 1 and non-spin data") {
  RbmParams p(2, 2);
  Rng rng(1);
  Tensor data({2, 2}, 1.0);
  CHECK_THROWS_AS(cd_k_update(data, p, 0, rng), std::invalid_argument);
  Tensor bad({1, 2}, 0.3);
  CHECK_THROWS_AS(cd_k_update(bad, p, 1, rng), std::invalid_argument);
}

TEST_CASE("cd positive phase equals the oracle positive phase exactly") {
  Rng rng(37);
  RbmParams p = random_rbm(4, 3, 0.6, 0.3, rng);
  Tensor data = sample_spins(Tensor({64, 4}, 0.5), rng);
  Rng cd_rng(5);
  CdResult cd = cd_k_update(data, p, 2, cd_rng);
  RbmGradients oracle = exact_gradient_oracle(p, data);
  for (std::int64_t i = 0; i < cd.grads.pos_w.numel(); ++i) {
    CHECK(cd.grads.pos_w[i] == doctest::Approx(oracle.pos_w[i]).epsilon(1e-13));
  }
  for (int i = 0; i < 4; ++i) CHECK(cd.grads.pos_b[i] == doctest::Approx(oracle.pos_b[i]).epsilon(1e-13));
  for (int j = 0; j < 3; ++j) CHECK(cd.grads.pos_c[j] == doctest::Approx(oracle.pos_c[j]).epsilon(1e-13));
}

TEST_CASE("cd gradient vanishes in expectation when data comes from the model") {
  Rng rng(41);
  RbmParams p = random_rbm(4, 3, 0.4, 0.2, rng);
  JointEnum joint = JointEnum::build(p);
  const int n = 10000;
  Tensor data({n, 4});
  for (int r = 0; r < n; ++r) {
    const std::uint64_t vb = joint.sample_v(rng);
    for (int i = 0; i < 4; ++i) data[r * 4 + i] = aan_test::spin_of(vb, i);
  }
  Rng cd_rng(9);
  CdResult cd = cd_k_update(data, p, 1, cd_rng);
  // Per-sample gradient entries are bounded by 2, so the standard error of
  // the mean is at most 2/sqrt(n); allow 3 of those.
  const double bound = 3.0 * 2.0 / std::sqrt(static_cast<double>(n));
  for (double g : flatten_grads(cd.grads)) CHECK(std::fabs(g) < bound);
}

TEST_CASE("cd-10 mean gradient points along the exact gradient (cosine > 0.9)") {
  Rng rng(43);
  RbmParams p = random_rbm(4, 3, 0.5, 0.2, rng);
  // Data from a distribution the model has not learned.
  const int n = 10000;
  Tensor data({n, 4});
  for (int r = 0; r < n; ++r) {
    const double base = rng.bernoulli(0.5) ? 1.0 : -1.0;
    for (int i = 0; i < 4; ++i) data[r * 4 + i] = rng.bernoulli(0.15) ? -base : base;
  }
  Rng cd_rng(21);
  CdResult cd = cd_k_update(data, p, 10, cd_rng);
  RbmGradients oracle = exact_gradient_oracle(p, data);
  CHECK(cosine(flatten_grads(cd.grads), flatten_grads(oracle)) > 0.9);
}

TEST_CASE("cd bias shrinks with chain length (k=10 beats k=1 on most trials)") {
  Rng rng(47);
  int wins = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    RbmParams p = random_rbm(4, 3, 0.6, 0.3, rng);
    const int n = 4000;
    Tensor data({n, 4});
    for (int r = 0; r < n; ++r) {
      const double base = rng.bernoulli(0.5) ? 1.0 : -1.0;
      for (int i = 0; i < 4; ++i) data[r * 4 + i] = rng.bernoulli(0.2) ? -base : base;
    }
    RbmGradients oracle = exact_gradient_oracle(p, data);
    Rng r1(1000 + t), r10(2000 + t);
    CdResult cd1 = cd_k_update(data, p, 1, r1);
    CdResult cd10 = cd_k_update(data, p, 10, r10);
    const double c1 = cosine(flatten_grads(cd1.grads), flatten_grads(oracle));
    const double c10 = cosine(flatten_grads(cd10.grads), flatten_grads(oracle));
    if (c10 > c1) wins += 1;
  }
  CHECK(wins > trials / 2);
}

TEST_CASE("exact_partition: zero-parameter 1x1 model gives log 4 - 1/2") {
  RbmParams p(1, 1);
  CHECK(exact_partition(p) == doctest::Approx(std::log(4.0) - 0.5).epsilon(1e-14));
}

TEST_CASE("exact_partition: factorizes in closed form when weights vanish") {
  Rng rng(53);
  RbmParams p(4, 3);
  for (double& b : p.b.data) b = rng.normal(0.0, 0.8);
  for (double& c : p.c.data) c = rng.normal(0.0, 0.8);
  double want = -0.5 * 4;
  for (double b : p.b.data) want += std::log(2.0 * std::cosh(b));
  for (double c : p.c.data) want += std::log(2.0 * std::cosh(c));
  CHECK(exact_partition(p) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("exact_partition matches the naive enumerator on random instances") {
  Rng rng(59);
  for (int t = 0; t < 5; ++t) {
    RbmParams p = random_rbm(4, 3, 0.7, 0.4, rng);
    JointEnum joint = JointEnum::build(p);
    CHECK(exact_partition(p) == doctest::Approx(joint.log_z).epsilon(1e-12));
  }
}

TEST_CASE("enumerated probabilities sum to one within 1e-10 (20 random 4x3 models)") {
  Rng rng(61);
  for (int t = 0; t < 20; ++t) {
    RbmParams p = random_rbm(4, 3, 0.8, 0.4, rng);
    const double log_z = exact_partition(p);
    double total = 0.0;
    for (std::uint64_t vb = 0; vb < 16; ++vb) {
      auto v = spins_from_bits(vb, 4);
      for (std::uint64_t hb = 0; hb < 8; ++hb) {
        auto h = spins_from_bits(hb, 3);
        total += std::exp(-energy(v, h, p) - log_z);
      }
    }
    CHECK(std::fabs(total - 1.0) < 1e-10);
  }
}

TEST_CASE("exact_log_likelihood: zero parameters give -n_v log 2") {
  RbmParams p(4, 3);
  Rng rng(67);
  Tensor data = sample_spins(Tensor({10, 4}, 0.5), rng);
  CHECK(exact_log_likelihood(p, data) == doctest::Approx(-4.0 * std::log(2.0)).epsilon(1e-13));
}

TEST_CASE("visible marginals sum to one within 1e-10") {
  Rng rng(71);
  RbmParams p = random_rbm(4, 3, 0.7, 0.3, rng);
  const double log_z = exact_partition(p);
  double total = 0.0;
  for (std::uint64_t vb = 0; vb < 16; ++vb) {
    total += std::exp(free_energy(spins_from_bits(vb, 4), p) - log_z);
  }
  CHECK(std::fabs(total - 1.0) < 1e-10);
}

TEST_CASE("free energy agrees with the 2cosh closed form") {
  Rng rng(73);
  RbmParams p = random_rbm(3, 4, 0.6, 0.3, rng);
  for (std::uint64_t vb = 0; vb < 8; ++vb) {
    auto v = spins_from_bits(vb, 3);
    double want = -0.5 * 3;
    for (int i = 0; i < 3; ++i) want += v[static_cast<std::size_t>(i)] * p.b[i];
    for (double f : hidden_field(v, p)) want += std::log(2.0 * std::cosh(f));
    CHECK(free_energy(v, p) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("exact gradient oracle: zero parameters give pure data moments") {
  RbmParams p(3, 2);
  Tensor data = spins_tensor({{1, 1, -1}, {1, -1, -1}, {-1, 1, 1}, {1, 1, 1}});
  RbmGradients g = exact_gradient_oracle(p, data);
  // tanh(0) hidden expectations kill dW and dc; db is the data mean exactly.
  Tensor tw = g.total_w(), tb = g.total_b(), tc = g.total_c();
  for (std::int64_t i = 0; i < tw.numel(); ++i) CHECK(tw[i] == 0.0);
  for (int j = 0; j < 2; ++j) CHECK(tc[j] == 0.0);
  CHECK(tb[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(tb[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(tb[2] == doctest::Approx(0.0).epsilon(1e-15));
  // Zero-mean data: everything vanishes.
  Tensor sym = spins_tensor({{1, 1, 1}, {-1, -1, -1}});
  RbmGradients gs = exact_gradient_oracle(p, sym);
  for (double v : flatten_grads(gs)) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("exact gradient oracle matches finite differences of the likelihood (3x3)") {
  Rng rng(79);
  RbmParams p = random_rbm(3, 3, 0.6, 0.3, rng);
  Tensor data = sample_spins(Tensor({8, 3}, 0.5), rng);
  RbmGradients g = exact_gradient_oracle(p, data);
  const double eps = 1e-5;
  auto fd_check = [&](Tensor& param, const Tensor& analytic) {
    for (std::int64_t e = 0; e < param.numel(); ++e) {
      const double orig = param[e];
      param[e] = orig + eps;
      const double lp = exact_log_likelihood(p, data);
      param[e] = orig - eps;
      const double lm = exact_log_likelihood(p, data);
      param[e] = orig;
      const double fd = (lp - lm) / (2.0 * eps);
      CHECK(std::fabs(fd - analytic[e]) < 1e-7);
    }
  };
  fd_check(p.w, g.total_w());
  fd_check(p.b, g.total_b());
  fd_check(p.c, g.total_c());
}

TEST_CASE("gradient ascent with the oracle monotonically improves the likelihood") {
  Rng rng(83);
  RbmParams p = random_rbm(3, 2, 0.1, 0.05, rng);
  Tensor data = spins_tensor({{1, 1, 1}, {1, 1, -1}, {-1, -1, -1}, {1, 1, 1}, {-1, -1, 1}, {1, 1, 1}});
  double prev = exact_log_likelihood(p, data);
  const double lr = 0.01;
  for (int s = 0; s < 200; ++s) {
    RbmGradients g = exact_gradient_oracle(p, data);
    Tensor dw = g.total_w(), db = g.total_b(), dc = g.total_c();
    for (std::int64_t i = 0; i < p.w.numel(); ++i) p.w[i] += lr * dw[i];
    for (int i = 0; i < 3; ++i) p.b[i] += lr * db[i];
    for (int j = 0; j < 2; ++j) p.c[j] += lr * dc[j];
    const double ll = exact_log_likelihood(p, data);
    CHECK(ll >= prev - 1e-12);
    prev = ll;
  }
}

TEST_CASE("enumeration bounds are enforced") {
  CHECK_THROWS_WITH_AS(exact_partition(RbmParams(13, 12)), doctest::Contains("enumeration bound"),
                       std::invalid_argument);
  RbmParams p(2, 21);
  Tensor data({1, 2}, 1.0);
  CHECK_THROWS_AS(exact_log_likelihood(p, data), std::invalid_argument);
  RbmParams p2(21, 2);
  Tensor d2({1, 21}, 1.0);
  CHECK_THROWS_AS(exact_gradient_oracle(p2, d2), std::invalid_argument);
}
