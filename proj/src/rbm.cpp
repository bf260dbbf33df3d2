#include "aan/rbm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "aan/loss.hpp"

namespace aan {

namespace {

void check_lengths(std::size_t got, int want, const char* what) {
  if (static_cast<int>(got) != want) {
    throw std::invalid_argument(std::string(what) + ": length " + std::to_string(got) + " does not match " +
                                std::to_string(want));
  }
}

void require_spin_span(std::span<const double> s, const char* what) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != 1.0 && s[i] != -1.0) {
      throw std::invalid_argument(std::string(what) + ": entry " + std::to_string(i) + " is not a spin (" +
                                  std::to_string(s[i]) + ")");
    }
  }
}

void check_batch(const Tensor& t, int dim, const char* what) {
  if (t.ndim() != 2 || t.dim(1) != dim) {
    throw std::invalid_argument(std::string(what) + ": expected [N, " + std::to_string(dim) + "], got " +
                                t.shape_str());
  }
}

}  // namespace

RbmParams::RbmParams(int n_v_, int n_h_) : n_v(n_v_), n_h(n_h_) {
  if (n_v < 1 || n_h < 1) throw std::invalid_argument("RbmParams: unit counts must be >= 1");
  w = Tensor({n_v, n_h});
  b = Tensor({n_v});
  c = Tensor({n_h});
}

RbmParams RbmParams::init(int n_v, int n_h, double weight_std, Rng& rng) {
  RbmParams p(n_v, n_h);
  for (double& x : p.w.data) x = rng.normal(0.0, weight_std);
  return p;
}

void require_spins(const Tensor& t, const char* what) {
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    if (t.data[i] != 1.0 && t.data[i] != -1.0) {
      throw std::invalid_argument(std::string(what) + ": entry at flat index " + std::to_string(i) +
                                  " is not a spin (" + std::to_string(t.data[i]) + ")");
    }
  }
}

double energy(std::span<const double> v, std::span<const double> h, const RbmParams& p) {
  check_lengths(v.size(), p.n_v, "energy: visible");
  check_lengths(h.size(), p.n_h, "energy: hidden");
  require_spin_span(v, "energy: visible");
  require_spin_span(h, "energy: hidden");
  double quad = 0.0, vb = 0.0, hc = 0.0, inter = 0.0;
  for (int i = 0; i < p.n_v; ++i) {
    quad += 0.5 * v[i] * v[i];
    vb += v[i] * p.b[i];
  }
  for (int j = 0; j < p.n_h; ++j) hc += h[j] * p.c[j];
  for (int i = 0; i < p.n_v; ++i) {
    const double* wi = p.w.data.data() + static_cast<std::int64_t>(i) * p.n_h;
    double acc = 0.0;
    for (int j = 0; j < p.n_h; ++j) acc += h[j] * wi[j];
    inter += v[i] * acc;
  }
  return quad - inter - vb - hc;
}

std::vector<double> hidden_field(std::span<const double> v, const RbmParams& p) {
  check_lengths(v.size(), p.n_v, "hidden_field: visible");
  std::vector<double> f(p.c.data.begin(), p.c.data.end());
  for (int i = 0; i < p.n_v; ++i) {
    const double vi = v[i];
    const double* wi = p.w.data.data() + static_cast<std::int64_t>(i) * p.n_h;
    for (int j = 0; j < p.n_h; ++j) f[static_cast<std::size_t>(j)] += vi * wi[j];
  }
  return f;
}

std::vector<double> visible_field(std::span<const double> h, const RbmParams& p) {
  check_lengths(h.size(), p.n_h, "visible_field: hidden");
  std::vector<double> f(p.b.data.begin(), p.b.data.end());
  for (int i = 0; i < p.n_v; ++i) {
    const double* wi = p.w.data.data() + static_cast<std::int64_t>(i) * p.n_h;
    double acc = 0.0;
    for (int j = 0; j < p.n_h; ++j) acc += wi[j] * h[j];
    f[static_cast<std::size_t>(i)] += acc;
  }
  return f;
}

std::vector<double> hidden_conditional(std::span<const double> v, const RbmParams& p) {
  require_spin_span(v, "hidden_conditional: visible");
  std::vector<double> f = hidden_field(v, p);
  for (double& x : f) x = sigmoid(2.0 * x);
  return f;
}

std::vector<double> visible_conditional(std::span<const double> h, const RbmParams& p) {
  require_spin_span(h, "visible_conditional: hidden");
  std::vector<double> f = visible_field(h, p);
  for (double& x : f) x = sigmoid(2.0 * x);
  return f;
}

namespace {

enum class FieldMap { conditional, mean };

Tensor batch_fields(const Tensor& in, const RbmParams& p, bool to_hidden, FieldMap map) {
  const int n = in.dim(0);
  const int out_dim = to_hidden ? p.n_h : p.n_v;
  const int in_dim = to_hidden ? p.n_v : p.n_h;
  Tensor out({n, out_dim});
  for (int r = 0; r < n; ++r) {
    std::span<const double> row(in.data.data() + static_cast<std::int64_t>(r) * in_dim,
                                static_cast<std::size_t>(in_dim));
    std::vector<double> f = to_hidden ? hidden_field(row, p) : visible_field(row, p);
    double* o = out.data.data() + static_cast<std::int64_t>(r) * out_dim;
    for (int j = 0; j < out_dim; ++j) {
      o[j] = map == FieldMap::conditional ? sigmoid(2.0 * f[static_cast<std::size_t>(j)])
                                          : std::tanh(f[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

}  // namespace

Tensor hidden_conditional_batch(const Tensor& v, const RbmParams& p) {
  check_batch(v, p.n_v, "hidden_conditional_batch");
  require_spins(v, "hidden_conditional_batch");
  return batch_fields(v, p, true, FieldMap::conditional);
}

Tensor visible_conditional_batch(const Tensor& h, const RbmParams& p) {
  check_batch(h, p.n_h, "visible_conditional_batch");
  require_spins(h, "visible_conditional_batch");
  return batch_fields(h, p, false, FieldMap::conditional);
}

Tensor hidden_mean_batch(const Tensor& v, const RbmParams& p) {
  check_batch(v, p.n_v, "hidden_mean_batch");
  require_spins(v, "hidden_mean_batch");
  return batch_fields(v, p, true, FieldMap::mean);
}

Tensor visible_mean_batch(const Tensor& h, const RbmParams& p) {
  check_batch(h, p.n_h, "visible_mean_batch");
  require_spins(h, "visible_mean_batch");
  return batch_fields(h, p, false, FieldMap::mean);
}

Tensor sample_spins(const Tensor& probabilities, Rng& rng) {
  Tensor out(probabilities.shape);
  for (std::int64_t i = 0; i < probabilities.numel(); ++i) {
    const double pr = probabilities[i];
    if (!(pr >= 0.0 && pr <= 1.0)) {
      throw std::invalid_argument("sample_spins: probability " + std::to_string(pr) + " outside [0, 1]");
    }
    out[i] = rng.uniform() < pr ? 1.0 : -1.0;
  }
  return out;
}

GibbsChainState GibbsChainState::from_visible(const Tensor& v0, const RbmParams& p, Rng rng) {
  check_batch(v0, p.n_v, "GibbsChainState::from_visible");
  require_spins(v0, "GibbsChainState::from_visible");
  GibbsChainState s;
  s.v = v0;
  s.rng = rng;
  s.h = sample_spins(hidden_conditional_batch(v0, p), s.rng);
  s.steps_taken = 0;
  return s;
}

void gibbs_step(GibbsChainState& state, const RbmParams& p) {
  state.h = sample_spins(hidden_conditional_batch(state.v, p), state.rng);
  state.v = sample_spins(visible_conditional_batch(state.h, p), state.rng);
  state.steps_taken += 1;
}

RbmGradients::RbmGradients(const RbmParams& p)
    : pos_w({p.n_v, p.n_h}),
      pos_b({p.n_v}),
      pos_c({p.n_h}),
      neg_w({p.n_v, p.n_h}),
      neg_b({p.n_v}),
      neg_c({p.n_h}) {}

namespace {

Tensor diff(const Tensor& a, const Tensor& b) {
  Tensor out(a.shape);
  for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
  return out;
}

// Accumulates mean_r v_i * m_j into w, mean_r v into bv, mean_r m into bm.
void accumulate_moments(const Tensor& v, const Tensor& m, Tensor& w, Tensor& bv, Tensor& bm) {
  const int n = v.dim(0);
  const int n_v = v.dim(1);
  const int n_h = m.dim(1);
  const double inv = 1.0 / static_cast<double>(n);
  for (int r = 0; r < n; ++r) {
    const double* vr = v.data.data() + static_cast<std::int64_t>(r) * n_v;
    const double* mr = m.data.data() + static_cast<std::int64_t>(r) * n_h;
    for (int i = 0; i < n_v; ++i) {
      double* wi = w.data.data() + static_cast<std::int64_t>(i) * n_h;
      const double viw = vr[i] * inv;
      for (int j = 0; j < n_h; ++j) wi[j] += viw * mr[j];
      bv[i] += vr[i] * inv;
    }
    for (int j = 0; j < n_h; ++j) bm[j] += mr[j] * inv;
  }
}

}  // namespace

Tensor RbmGradients::total_w() const { return diff(pos_w, neg_w); }
Tensor RbmGradients::total_b() const { return diff(pos_b, neg_b); }
Tensor RbmGradients::total_c() const { return diff(pos_c, neg_c); }

CdResult cd_k_update(const Tensor& data, const RbmParams& p, int k, Rng& rng) {
  if (k < 1) throw std::invalid_argument("cd_k_update: k must be >= 1, got " + std::to_string(k));
  check_batch(data, p.n_v, "cd_k_update data");
  require_spins(data, "cd_k_update data");

  CdResult r{RbmGradients(p), Tensor(), Tensor()};

  // Positive phase: clamped data with Rao-Blackwellized hidden expectations.
  Tensor h_mean_data = hidden_mean_batch(data, p);
  accumulate_moments(data, h_mean_data, r.grads.pos_w, r.grads.pos_b, r.grads.pos_c);

  // Negative phase: k alternating Gibbs steps started from the data.
  GibbsChainState chain;
  chain.v = data;
  chain.rng = rng;
  for (int step = 0; step < k; ++step) {
    chain.h = sample_spins(hidden_conditional_batch(chain.v, p), chain.rng);
    Tensor v_prob = visible_conditional_batch(chain.h, p);
    chain.v = sample_spins(v_prob, chain.rng);
    if (step == k - 1) {
      r.negative_visible_mean = visible_mean_batch(chain.h, p);
    }
    chain.steps_taken += 1;
  }
  rng = chain.rng;

  Tensor h_mean_neg = hidden_mean_batch(chain.v, p);
  accumulate_moments(chain.v, h_mean_neg, r.grads.neg_w, r.grads.neg_b, r.grads.neg_c);
  r.negative_spins = chain.v;
  return r;
}

// ---------------------------------------------------------------------------
// Exact enumeration
// ---------------------------------------------------------------------------

std::vector<double> spins_from_bits(std::uint64_t bits, int n) {
  std::vector<double> s(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = (bits >> i) & 1u ? 1.0 : -1.0;
  return s;
}

namespace {

// log sum over all hidden states of exp(sum_j h_j f_j), stabilized by the
// maximum sum_j |f_j|; literal enumeration over 2^n_h configurations.
double log_hidden_sum(const std::vector<double>& fields) {
  const int n_h = static_cast<int>(fields.size());
  double shift = 0.0;
  for (double f : fields) shift += std::fabs(f);
  double acc = 0.0;
  const std::uint64_t states = 1ull << n_h;
  for (std::uint64_t bits = 0; bits < states; ++bits) {
    double s = 0.0;
    for (int j = 0; j < n_h; ++j) s += ((bits >> j) & 1u ? 1.0 : -1.0) * fields[static_cast<std::size_t>(j)];
    acc += std::exp(s - shift);
  }
  return shift + std::log(acc);
}

}  // namespace

double free_energy(std::span<const double> v, const RbmParams& p) {
  if (p.n_h > kMaxEnumLayerUnits) {
    throw std::invalid_argument("free_energy: n_h " + std::to_string(p.n_h) + " exceeds enumeration bound " +
                                std::to_string(kMaxEnumLayerUnits));
  }
  require_spin_span(v, "free_energy: visible");
  double vb = 0.0;
  for (int i = 0; i < p.n_v; ++i) vb += v[i] * p.b[i];
  return -0.5 * static_cast<double>(p.n_v) + vb + log_hidden_sum(hidden_field(v, p));
}

double exact_partition(const RbmParams& p) {
  if (p.n_v + p.n_h > kMaxEnumTotalUnits) {
    throw std::invalid_argument("exact_partition: n_v + n_h = " + std::to_string(p.n_v + p.n_h) +
                                " exceeds enumeration bound " + std::to_string(kMaxEnumTotalUnits));
  }
  const std::uint64_t v_states = 1ull << p.n_v;
  // logsumexp over visible states of the per-state free energy
  std::vector<double> fe(static_cast<std::size_t>(v_states));
  double m = -1e300;
  for (std::uint64_t bits = 0; bits < v_states; ++bits) {
    std::vector<double> v = spins_from_bits(bits, p.n_v);
    fe[static_cast<std::size_t>(bits)] = free_energy(v, p);
    m = std::max(m, fe[static_cast<std::size_t>(bits)]);
  }
  double acc = 0.0;
  for (double f : fe) acc += std::exp(f - m);
  return m + std::log(acc);
}

double exact_log_likelihood(const RbmParams& p, const Tensor& data) {
  check_batch(data, p.n_v, "exact_log_likelihood data");
  require_spins(data, "exact_log_likelihood data");
  if (p.n_h > kMaxEnumLayerUnits) {
    throw std::invalid_argument("exact_log_likelihood: n_h " + std::to_string(p.n_h) +
                                " exceeds enumeration bound " + std::to_string(kMaxEnumLayerUnits));
  }
  const double log_z = exact_partition(p);
  const int n = data.dim(0);
  double acc = 0.0;
  for (int r = 0; r < n; ++r) {
    std::span<const double> v(data.data.data() + static_cast<std::int64_t>(r) * p.n_v,
                              static_cast<std::size_t>(p.n_v));
    acc += free_energy(v, p) - log_z;
  }
  return acc / static_cast<double>(n);
}

RbmGradients exact_gradient_oracle(const RbmParams& p, const Tensor& data) {
  check_batch(data, p.n_v, "exact_gradient_oracle data");
  require_spins(data, "exact_gradient_oracle data");
  if (p.n_v > kMaxEnumLayerUnits || p.n_h > kMaxEnumLayerUnits) {
    throw std::invalid_argument("exact_gradient_oracle: layer sizes " + std::to_string(p.n_v) + "x" +
                                std::to_string(p.n_h) + " exceed enumeration bound " +
                                std::to_string(kMaxEnumLayerUnits));
  }

  RbmGradients g(p);

  // Positive phase: data moments with exact hidden expectations.
  Tensor h_mean = hidden_mean_batch(data, p);
  accumulate_moments(data, h_mean, g.pos_w, g.pos_b, g.pos_c);

  // Negative phase: model moments by enumeration over all visible states,
  // P(v) proportional to exp(free energy), hidden layer marginalized exactly.
  const std::uint64_t v_states = 1ull << p.n_v;
  std::vector<double> fe(static_cast<std::size_t>(v_states));
  double m = -1e300;
  for (std::uint64_t bits = 0; bits < v_states; ++bits) {
    fe[static_cast<std::size_t>(bits)] = free_energy(spins_from_bits(bits, p.n_v), p);
    m = std::max(m, fe[static_cast<std::size_t>(bits)]);
  }
  double z = 0.0;
  for (double f : fe) z += std::exp(f - m);
  for (std::uint64_t bits = 0; bits < v_states; ++bits) {
    const double pv = std::exp(fe[static_cast<std::size_t>(bits)] - m) / z;
    std::vector<double> v = spins_from_bits(bits, p.n_v);
    std::vector<double> f = hidden_field(v, p);
    for (int j = 0; j < p.n_h; ++j) f[static_cast<std::size_t>(j)] = std::tanh(f[static_cast<std::size_t>(j)]);
    for (int i = 0; i < p.n_v; ++i) {
      double* wi = g.neg_w.data.data() + static_cast<std::int64_t>(i) * p.n_h;
      const double pvi = pv * v[static_cast<std::size_t>(i)];
      for (int j = 0; j < p.n_h; ++j) wi[j] += pvi * f[static_cast<std::size_t>(j)];
      g.neg_b[i] += pv * v[static_cast<std::size_t>(i)];
    }
    for (int j = 0; j < p.n_h; ++j) g.neg_c[j] += pv * f[static_cast<std::size_t>(j)];
  }
  return g;
}

}  // namespace aan
