#include "aan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "aan/loss.hpp"

namespace aan {

// ---------------------------------------------------------------------------
// TrainConfig
// ---------------------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing junk");
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key + ": bad number '" + v + "'");
  }
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing junk");
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key + ": bad integer '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config key " + key + ": bad bool '" + v + "'");
}

}  // namespace

std::string TrainConfig::preset_name() const {
  if (!preset.empty()) return preset;
  return dataset == DatasetKind::mnist ? "mnist-small" : "toy2d";
}

std::string TrainConfig::serialize() const {
  std::ostringstream os;
  os << "mode=" << (mode == TrainMode::aan ? "aan" : "gan") << "\n";
  os << "dataset=" << (dataset == DatasetKind::mnist ? "mnist" : "toy2d") << "\n";
  os << "preset=" << preset << "\n";
  os << "batch_size=" << batch_size << "\n";
  os << "cd_steps=" << cd_steps << "\n";
  os << "rbm_lr=" << fmt_double(rbm_lr) << "\n";
  os << "rbm_momentum=" << fmt_double(rbm_momentum) << "\n";
  os << "rbm_hidden=" << rbm_hidden << "\n";
  os << "rbm_init_std=" << fmt_double(rbm_init_std) << "\n";
  os << "adam_lr=" << fmt_double(adam_lr) << "\n";
  os << "adam_beta1=" << fmt_double(adam_beta1) << "\n";
  os << "adam_beta2=" << fmt_double(adam_beta2) << "\n";
  os << "adam_eps=" << fmt_double(adam_eps) << "\n";
  os << "feature_dim=" << feature_dim << "\n";
  os << "steps=" << steps << "\n";
  os << "seed=" << seed << "\n";
  os << "g_mode=" << (g_mode == GeneratorLossMode::minimax ? "minimax" : "nonsaturating") << "\n";
  os << "binarize=" << (binarize == BinarizeMode::stochastic ? "stochastic" : "sign") << "\n";
  os << "g_input=" << (g_input == GeneratorInput::spins ? "spins" : "probabilities") << "\n";
  os << "noise=" << (noise == NoiseSource::Kind::uniform ? "uniform" : "spin") << "\n";
  os << "stride_literal=" << (stride_literal ? "true" : "false") << "\n";
  os << "rbm_update_enabled=" << (rbm_update_enabled ? "true" : "false") << "\n";
  os << "substitute_uniform_spins=" << (substitute_uniform_spins ? "true" : "false") << "\n";
  os << "toy_n=" << toy_n << "\n";
  os << "toy_centers=" << toy_centers << "\n";
  os << "toy_radius=" << fmt_double(toy_radius) << "\n";
  os << "toy_noise_std=" << fmt_double(toy_noise_std) << "\n";
  os << "mnist_images=" << mnist_images << "\n";
  os << "mnist_labels=" << mnist_labels << "\n";
  os << "eval_batch=" << eval_batch << "\n";
  os << "checkpoint_every=" << checkpoint_every << "\n";
  os << "sample_burnin=" << sample_burnin << "\n";
  return os.str();
}

void TrainConfig::apply_key_value(const std::string& key, const std::string& value) {
  if (key == "mode") {
    if (value == "aan") mode = TrainMode::aan;
    else if (value == "gan") mode = TrainMode::gan_baseline;
    else throw std::invalid_argument("config key mode: expected aan|gan, got '" + value + "'");
  } else if (key == "dataset") {
    if (value == "mnist") dataset = DatasetKind::mnist;
    else if (value == "toy2d") dataset = DatasetKind::toy2d;
    else throw std::invalid_argument("config key dataset: expected mnist|toy2d, got '" + value + "'");
  } else if (key == "preset") {
    preset = value;
  } else if (key == "batch_size") {
    batch_size = static_cast<int>(parse_int(key, value));
  } else if (key == "cd_steps") {
    cd_steps = static_cast<int>(parse_int(key, value));
  } else if (key == "rbm_lr") {
    rbm_lr = parse_double(key, value);
  } else if (key == "rbm_momentum") {
    rbm_momentum = parse_double(key, value);
  } else if (key == "rbm_hidden") {
    rbm_hidden = static_cast<int>(parse_int(key, value));
  } else if (key == "rbm_init_std") {
    rbm_init_std = parse_double(key, value);
  } else if (key == "adam_lr") {
    adam_lr = parse_double(key, value);
  } else if (key == "adam_beta1") {
    adam_beta1 = parse_double(key, value);
  } else if (key == "adam_beta2") {
    adam_beta2 = parse_double(key, value);
  } else if (key == "adam_eps") {
    adam_eps = parse_double(key, value);
  } else if (key == "feature_dim") {
    feature_dim = static_cast<int>(parse_int(key, value));
  } else if (key == "steps") {
    steps = parse_int(key, value);
  } else if (key == "seed") {
    seed = static_cast<std::uint64_t>(parse_int(key, value));
  } else if (key == "g_mode") {
    if (value == "minimax") g_mode = GeneratorLossMode::minimax;
    else if (value == "nonsaturating") g_mode = GeneratorLossMode::nonsaturating;
    else throw std::invalid_argument("config key g_mode: expected minimax|nonsaturating, got '" + value + "'");
  } else if (key == "binarize") {
    if (value == "stochastic") binarize = BinarizeMode::stochastic;
    else if (value == "sign") binarize = BinarizeMode::sign;
    else throw std::invalid_argument("config key binarize: expected stochastic|sign, got '" + value + "'");
  } else if (key == "g_input") {
    if (value == "spins") g_input = GeneratorInput::spins;
    else if (value == "probabilities") g_input = GeneratorInput::probabilities;
    else throw std::invalid_argument("config key g_input: expected spins|probabilities, got '" + value + "'");
  } else if (key == "noise") {
    if (value == "uniform") noise = NoiseSource::Kind::uniform;
    else if (value == "spin") noise = NoiseSource::Kind::spin;
    else throw std::invalid_argument("config key noise: expected uniform|spin, got '" + value + "'");
  } else if (key == "stride_literal") {
    stride_literal = parse_bool(key, value);
  } else if (key == "rbm_update_enabled") {
    rbm_update_enabled = parse_bool(key, value);
  } else if (key == "substitute_uniform_spins") {
    substitute_uniform_spins = parse_bool(key, value);
  } else if (key == "toy_n") {
    toy_n = static_cast<int>(parse_int(key, value));
  } else if (key == "toy_centers") {
    toy_centers = static_cast<int>(parse_int(key, value));
  } else if (key == "toy_radius") {
    toy_radius = parse_double(key, value);
  } else if (key == "toy_noise_std") {
    toy_noise_std = parse_double(key, value);
  } else if (key == "mnist_images") {
    mnist_images = value;
  } else if (key == "mnist_labels") {
    mnist_labels = value;
  } else if (key == "eval_batch") {
    eval_batch = static_cast<int>(parse_int(key, value));
  } else if (key == "checkpoint_every") {
    checkpoint_every = parse_int(key, value);
  } else if (key == "sample_burnin") {
    sample_burnin = static_cast<int>(parse_int(key, value));
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

TrainConfig TrainConfig::deserialize(const std::string& text) {
  TrainConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("config line missing '=': " + line);
    cfg.apply_key_value(line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
  if (cd_steps < 1) throw std::invalid_argument("cd_steps must be >= 1");
  if (feature_dim < 1) throw std::invalid_argument("feature_dim must be >= 1");
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (eval_batch < 2) throw std::invalid_argument("eval_batch must be >= 2");
  if (rbm_hidden < 0) throw std::invalid_argument("rbm_hidden must be >= 0");
  if (sample_burnin < 1) throw std::invalid_argument("sample_burnin must be >= 1");
  if (dataset == DatasetKind::mnist && (mnist_images.empty() || mnist_labels.empty())) {
    throw std::invalid_argument("mnist dataset requires mnist_images and mnist_labels paths");
  }
  if (toy_centers < 1 || toy_n < toy_centers) throw std::invalid_argument("toy2d: need n >= centers >= 1");
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

namespace {

Dataset load_dataset(const TrainConfig& cfg) {
  if (cfg.dataset == DatasetKind::mnist) return load_mnist_idx(cfg.mnist_images, cfg.mnist_labels);
  return make_toy2d(cfg.toy_n, cfg.toy_centers, cfg.toy_radius, cfg.toy_noise_std, cfg.seed);
}

Tensor negated(const Tensor& t) {
  Tensor out(t.shape);
  for (std::int64_t i = 0; i < t.numel(); ++i) out[i] = -t[i];
  return out;
}

double spin_flip_fraction(const Tensor& a, const Tensor& b) {
  double flips = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) flips += a[i] != b[i] ? 1.0 : 0.0;
  return flips / static_cast<double>(a.numel());
}

}  // namespace

Trainer::Trainer(const TrainConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  ArchPreset preset{cfg_.preset_name(), cfg_.feature_dim, cfg_.stride_literal, 0.2};
  Rng rng_d = Rng::stream(cfg_.seed, "init-d");
  Rng rng_g = Rng::stream(cfg_.seed, "init-g");
  Rng rng_rbm = Rng::stream(cfg_.seed, "init-rbm");
  d_ = make_discriminator(preset, rng_d);
  g_ = make_generator(preset, rng_g);
  const int n_h = cfg_.rbm_hidden > 0 ? cfg_.rbm_hidden : cfg_.feature_dim;
  rbm_ = RbmParams::init(cfg_.feature_dim, n_h, cfg_.rbm_init_std, rng_rbm);

  d_opt_.lr = g_opt_.lr = cfg_.adam_lr;
  d_opt_.beta1 = g_opt_.beta1 = cfg_.adam_beta1;
  d_opt_.beta2 = g_opt_.beta2 = cfg_.adam_beta2;
  d_opt_.eps = g_opt_.eps = cfg_.adam_eps;
  d_opt_.init_like(d_.net.params());
  g_opt_.init_like(g_.net.params());
  rbm_opt_.lr = cfg_.rbm_lr;
  rbm_opt_.momentum = cfg_.rbm_momentum;
  rbm_opt_.init_like(rbm_.param_list());

  Dataset full = load_dataset(cfg_);
  auto parts = split_train_heldout(full, 0.1);
  train_ = std::move(parts.first);
  heldout_ = std::move(parts.second);

  const int ne = std::min<int>(cfg_.eval_batch, heldout_.size());
  std::vector<std::int64_t> idx(static_cast<std::size_t>(ne));
  for (int i = 0; i < ne; ++i) idx[static_cast<std::size_t>(i)] = i;
  eval_real_ = heldout_.gather(idx);

  rng_train_ = Rng::stream(cfg_.seed, "train");
}

struct Trainer::Snapshot {
  std::vector<Tensor> d_params;
  std::vector<Tensor> g_params;
  Tensor rbm_w, rbm_b, rbm_c;
  AdamState d_opt, g_opt;
  MomentumState rbm_opt;
  Rng rng;
};

Trainer::Snapshot Trainer::snapshot() const {
  Snapshot s;
  for (const Layer& l : d_.net.layers) {
    if (l.has_params()) {
      s.d_params.push_back(l.weights);
      s.d_params.push_back(l.bias);
    }
  }
  for (const Layer& l : g_.net.layers) {
    if (l.has_params()) {
      s.g_params.push_back(l.weights);
      s.g_params.push_back(l.bias);
    }
  }
  s.rbm_w = rbm_.w;
  s.rbm_b = rbm_.b;
  s.rbm_c = rbm_.c;
  s.d_opt = d_opt_;
  s.g_opt = g_opt_;
  s.rbm_opt = rbm_opt_;
  s.rng = rng_train_;
  return s;
}

void Trainer::restore(const Snapshot& s) {
  std::size_t di = 0;
  for (Tensor* p : d_.net.params()) *p = s.d_params[di++];
  std::size_t gi = 0;
  for (Tensor* p : g_.net.params()) *p = s.g_params[gi++];
  rbm_.w = s.rbm_w;
  rbm_.b = s.rbm_b;
  rbm_.c = s.rbm_c;
  d_opt_ = s.d_opt;
  g_opt_ = s.g_opt;
  rbm_opt_ = s.rbm_opt;
  rng_train_ = s.rng;
}

Tensor Trainer::draw_batch() {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(cfg_.batch_size));
  for (int i = 0; i < cfg_.batch_size; ++i) {
    idx[static_cast<std::size_t>(i)] =
        static_cast<std::int64_t>(rng_train_.next_below(static_cast<std::uint64_t>(train_.size())));
  }
  return train_.gather(idx);
}

StepMetrics Trainer::step() {
  Snapshot snap = snapshot();
  try {
    StepMetrics m = run_step();
    if (!m.all_finite()) throw std::runtime_error("non-finite metric value");
    step_ += 1;
    m.step = step_;
    return m;
  } catch (const std::exception& e) {
    restore(snap);
    throw TrainStepError(step_ + 1, e.what());
  }
}

StepMetrics Trainer::run_step() {
  d_.net.zero_grad();
  g_.net.zero_grad();

  Tensor real = draw_batch();
  auto real_pass = d_.forward(real);

  Tensor g_in;
  double recon = 0.0;
  if (cfg_.mode == TrainMode::gan_baseline) {
    NoiseSource src{cfg_.feature_dim, cfg_.noise};
    g_in = src.sample(cfg_.batch_size, rng_train_);
  } else if (cfg_.substitute_uniform_spins) {
    g_in = sample_spins(Tensor(real_pass.features.shape, 0.5), rng_train_);
  } else {
    Tensor spins = binarize_features(real_pass.features, cfg_.binarize, rng_train_);
    CdResult cd = cd_k_update(spins, rbm_, cfg_.cd_steps, rng_train_);
    if (cfg_.rbm_update_enabled) {
      // Descend the negative log-likelihood: loss gradient is phi- minus phi+.
      Tensor lw = negated(cd.grads.total_w());
      Tensor lb = negated(cd.grads.total_b());
      Tensor lc = negated(cd.grads.total_c());
      sgd_momentum_step(rbm_.param_list(), {&lw, &lb, &lc}, rbm_opt_);
    }
    recon = spin_flip_fraction(spins, cd.negative_spins);
    g_in = cfg_.g_input == GeneratorInput::spins ? cd.negative_spins : cd.negative_visible_mean;
  }

  Tensor fake = g_.forward(g_in);
  return finish_step(real_pass, fake, recon);
}

StepMetrics Trainer::finish_step(const DiscriminatorNet::ForwardResult& real_pass, const Tensor& fake,
                                 double rbm_recon_error) {
  // D update: backward for the real batch first (its caches are live), then a
  // fresh forward/backward for the fake batch; one Adam step on the sums.
  BceResult bce_real = bce_from_logits(real_pass.logits, 1);
  d_.net.backward(bce_real.grad);
  auto fake_pass = d_.forward(fake);
  BceResult bce_fake = bce_from_logits(fake_pass.logits, 0);
  d_.net.backward(bce_fake.grad);
  adam_step(d_.net.params(), d_.net.grads(), d_opt_);
  last_d_loss_ = bce_real.loss + bce_fake.loss;

  // G update through the (now updated, frozen) discriminator: D's parameter
  // gradients from this pass are discarded at the next zero_grad.
  auto fake_pass2 = d_.forward(fake);
  GanLosses gl = gan_losses(real_pass.logits, fake_pass2.logits, cfg_.g_mode);
  Tensor d_input_grad = d_.net.backward(gl.g_grad_fake);
  g_.net.backward(d_input_grad);
  adam_step(g_.net.params(), g_.net.grads(), g_opt_);
  last_g_loss_ = gl.g_loss;

  ValueTerms terms = eval_terms();
  StepMetrics m;
  m.step = step_ + 1;
  m.e_logd_real = terms.e_logd_real;
  m.e_log1md_fake = terms.e_log1md_fake;
  m.e_logd_fake = terms.e_logd_fake;
  m.ratio = terms.e_logd_real / terms.e_logd_fake;
  m.d_loss = last_d_loss_;
  m.g_loss = last_g_loss_;
  m.rbm_recon_error = rbm_recon_error;
  m.sample_diversity = sample_diversity(fake);
  return m;
}

ValueTerms Trainer::eval_terms() {
  // Fixed held-out batch, stateless per-step stream: monitoring stays
  // decoupled from the optimization draws.
  Rng er = Rng::stream(cfg_.seed, "eval", static_cast<std::uint64_t>(step_ + 1));
  auto real_pass = d_.forward(eval_real_);
  const int ne = eval_real_.dim(0);
  Tensor fake_in;
  if (cfg_.mode == TrainMode::gan_baseline || cfg_.substitute_uniform_spins) {
    NoiseSource src{cfg_.feature_dim,
                    cfg_.substitute_uniform_spins ? NoiseSource::Kind::spin : cfg_.noise};
    fake_in = src.sample(ne, er);
  } else {
    Tensor v0 = binarize_features(real_pass.features, cfg_.binarize, er);
    GibbsChainState chain = GibbsChainState::from_visible(v0, rbm_, er);
    for (int s = 0; s < cfg_.cd_steps; ++s) gibbs_step(chain, rbm_);
    fake_in = cfg_.g_input == GeneratorInput::spins ? chain.v : visible_mean_batch(chain.h, rbm_);
  }
  Tensor fake = g_.forward(fake_in);
  auto fake_pass = d_.forward(fake);
  return gan_losses(real_pass.logits, fake_pass.logits, cfg_.g_mode).terms;
}

Tensor Trainer::sample_fakes(int count, Rng rng) {
  if (count < 1) throw std::invalid_argument("sample_fakes: count must be positive");
  Tensor fake_in;
  if (cfg_.mode == TrainMode::gan_baseline) {
    NoiseSource src{cfg_.feature_dim, cfg_.noise};
    fake_in = src.sample(count, rng);
  } else {
    Tensor v0 = sample_spins(Tensor({count, rbm_.n_v}, 0.5), rng);
    GibbsChainState chain = GibbsChainState::from_visible(v0, rbm_, rng);
    for (int s = 0; s < cfg_.sample_burnin; ++s) gibbs_step(chain, rbm_);
    fake_in = cfg_.g_input == GeneratorInput::spins ? chain.v : visible_mean_batch(chain.h, rbm_);
  }
  return g_.forward(fake_in);
}

// ---------------------------------------------------------------------------
// checkpoint conversion
// ---------------------------------------------------------------------------

Checkpoint Trainer::to_checkpoint() const {
  Checkpoint ck;
  ck.step = static_cast<std::uint64_t>(step_);
  ck.d_opt_step = static_cast<std::uint64_t>(d_opt_.step_count);
  ck.g_opt_step = static_cast<std::uint64_t>(g_opt_.step_count);
  ck.config_text = cfg_.serialize();
  ck.rng_state = rng_train_.save_state();

  auto push_list = [&ck](const std::string& prefix, const std::vector<const Tensor*>& list) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      ck.tensors.push_back({prefix + std::to_string(i), *list[i]});
    }
  };
  std::vector<const Tensor*> dp, gp;
  for (const Layer& l : d_.net.layers) {
    if (l.has_params()) {
      dp.push_back(&l.weights);
      dp.push_back(&l.bias);
    }
  }
  for (const Layer& l : g_.net.layers) {
    if (l.has_params()) {
      gp.push_back(&l.weights);
      gp.push_back(&l.bias);
    }
  }
  push_list("d.param.", dp);
  push_list("g.param.", gp);
  ck.tensors.push_back({"rbm.w", rbm_.w});
  ck.tensors.push_back({"rbm.b", rbm_.b});
  ck.tensors.push_back({"rbm.c", rbm_.c});
  for (std::size_t i = 0; i < d_opt_.m.size(); ++i) {
    ck.tensors.push_back({"opt.d.m." + std::to_string(i), d_opt_.m[i]});
    ck.tensors.push_back({"opt.d.v." + std::to_string(i), d_opt_.v[i]});
  }
  for (std::size_t i = 0; i < g_opt_.m.size(); ++i) {
    ck.tensors.push_back({"opt.g.m." + std::to_string(i), g_opt_.m[i]});
    ck.tensors.push_back({"opt.g.v." + std::to_string(i), g_opt_.v[i]});
  }
  for (std::size_t i = 0; i < rbm_opt_.velocity.size(); ++i) {
    ck.tensors.push_back({"opt.rbm.vel." + std::to_string(i), rbm_opt_.velocity[i]});
  }
  return ck;
}

Trainer Trainer::from_checkpoint(const Checkpoint& ck) {
  TrainConfig cfg = TrainConfig::deserialize(ck.config_text);
  Trainer t(cfg);

  auto load_list = [&ck](const std::string& prefix, std::vector<Tensor*> list) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Tensor& src = ck.require(prefix + std::to_string(i));
      if (!src.same_shape(*list[i])) {
        throw std::runtime_error("checkpoint tensor " + prefix + std::to_string(i) + " has shape " +
                                 src.shape_str() + ", expected " + list[i]->shape_str());
      }
      *list[i] = src;
    }
  };
  load_list("d.param.", t.d_.net.params());
  load_list("g.param.", t.g_.net.params());

  t.rbm_.w = ck.require("rbm.w");
  t.rbm_.b = ck.require("rbm.b");
  t.rbm_.c = ck.require("rbm.c");

  for (std::size_t i = 0; i < t.d_opt_.m.size(); ++i) {
    t.d_opt_.m[i] = ck.require("opt.d.m." + std::to_string(i));
    t.d_opt_.v[i] = ck.require("opt.d.v." + std::to_string(i));
  }
  for (std::size_t i = 0; i < t.g_opt_.m.size(); ++i) {
    t.g_opt_.m[i] = ck.require("opt.g.m." + std::to_string(i));
    t.g_opt_.v[i] = ck.require("opt.g.v." + std::to_string(i));
  }
  for (std::size_t i = 0; i < t.rbm_opt_.velocity.size(); ++i) {
    t.rbm_opt_.velocity[i] = ck.require("opt.rbm.vel." + std::to_string(i));
  }
  t.d_opt_.step_count = static_cast<std::int64_t>(ck.d_opt_step);
  t.g_opt_.step_count = static_cast<std::int64_t>(ck.g_opt_step);
  t.rng_train_.restore_state(ck.rng_state);
  t.step_ = static_cast<std::int64_t>(ck.step);
  return t;
}

// ---------------------------------------------------------------------------
// diagnostics
// ---------------------------------------------------------------------------

RatioSeries convergence_ratio(const std::vector<StepMetrics>& stream, int window, double eps) {
  if (window < 1) throw std::invalid_argument("convergence_ratio: window must be >= 1");
  RatioSeries out;
  if (static_cast<int>(stream.size()) < window) return out;
  const std::size_t n_windows = stream.size() - static_cast<std::size_t>(window) + 1;
  out.value.resize(n_windows, 0.0);
  out.defined.resize(n_windows, 1);
  for (std::size_t s = 0; s < n_windows; ++s) {
    double acc = 0.0;
    bool ok = true;
    for (int k = 0; k < window; ++k) {
      const StepMetrics& m = stream[s + static_cast<std::size_t>(k)];
      if (std::fabs(m.e_logd_fake) < eps) {
        ok = false;
        break;
      }
      acc += m.e_logd_real / m.e_logd_fake;
    }
    out.value[s] = ok ? acc / window : std::numeric_limits<double>::quiet_NaN();
    out.defined[s] = ok ? 1 : 0;
  }
  return out;
}

Tensor gibbs_sweep(const Tensor& real, const RbmParams& rbm, DiscriminatorNet& d, GeneratorNet& g,
                   BinarizeMode binarize, int max_steps, Rng rng, std::vector<Tensor>* chain_states) {
  if (max_steps < 1) throw std::invalid_argument("gibbs_sweep: max_steps must be >= 1");
  for (const Tensor* p : {&rbm.w, &rbm.b, &rbm.c}) require_finite(*p, "gibbs_sweep rbm params");
  for (const Layer& l : d.net.layers) {
    require_finite(l.weights, "gibbs_sweep discriminator params");
  }
  for (const Layer& l : g.net.layers) {
    require_finite(l.weights, "gibbs_sweep generator params");
  }

  const int n = real.dim(0);
  auto pass = d.forward(real);
  Tensor v0 = binarize_features(pass.features, binarize, rng);
  GibbsChainState chain = GibbsChainState::from_visible(v0, rbm, rng);

  std::vector<Tensor> columns;  // columns[s] holds G decodings after s+1 steps
  columns.reserve(static_cast<std::size_t>(max_steps));
  if (chain_states) chain_states->push_back(chain.v);
  for (int s = 0; s < max_steps; ++s) {
    gibbs_step(chain, rbm);
    if (chain_states) chain_states->push_back(chain.v);
    columns.push_back(g.forward(chain.v));
  }

  // Row-major grid: each row is [original, step 1, ..., step max_steps].
  std::vector<int> shape = real.shape;
  shape[0] = n * (max_steps + 1);
  Tensor grid(shape);
  const std::int64_t per = real.numel() / n;
  for (int r = 0; r < n; ++r) {
    double* dst = grid.data.data() + static_cast<std::int64_t>(r) * (max_steps + 1) * per;
    const double* src = real.data.data() + static_cast<std::int64_t>(r) * per;
    std::copy(src, src + per, dst);
    for (int s = 0; s < max_steps; ++s) {
      const double* col = columns[static_cast<std::size_t>(s)].data.data() + static_cast<std::int64_t>(r) * per;
      std::copy(col, col + per, dst + static_cast<std::int64_t>(s + 1) * per);
    }
  }
  return grid;
}

AutocorrResult feature_autocorrelation(const std::vector<Tensor>& chain_states, int max_lag) {
  if (chain_states.size() < 2) {
    throw std::invalid_argument("feature_autocorrelation: need at least 2 recorded steps");
  }
  if (max_lag < 1 || max_lag >= static_cast<int>(chain_states.size())) {
    throw std::invalid_argument("feature_autocorrelation: max_lag out of range");
  }
  const int t_len = static_cast<int>(chain_states.size());
  const int n = chain_states[0].dim(0);
  const int dim = chain_states[0].dim(1);
  AutocorrResult out;
  out.corr.assign(static_cast<std::size_t>(max_lag), 0.0);
  std::int64_t constant_units = 0;
  const std::int64_t total_units = static_cast<std::int64_t>(n) * dim;
  std::vector<double> series(static_cast<std::size_t>(t_len));
  std::vector<double> acc(static_cast<std::size_t>(max_lag), 0.0);
  for (int c = 0; c < n; ++c) {
    for (int u = 0; u < dim; ++u) {
      double mean = 0.0;
      for (int t = 0; t < t_len; ++t) {
        series[static_cast<std::size_t>(t)] = chain_states[static_cast<std::size_t>(t)][c * dim + u];
        mean += series[static_cast<std::size_t>(t)];
      }
      mean /= t_len;
      double var = 0.0;
      for (int t = 0; t < t_len; ++t) {
        const double d = series[static_cast<std::size_t>(t)] - mean;
        var += d * d;
      }
      if (var == 0.0) {
        // Frozen series equals its own shift at every lag.
        constant_units += 1;
        for (int l = 1; l <= max_lag; ++l) acc[static_cast<std::size_t>(l - 1)] += 1.0;
        continue;
      }
      for (int l = 1; l <= max_lag; ++l) {
        double num = 0.0;
        for (int t = 0; t + l < t_len; ++t) {
          num += (series[static_cast<std::size_t>(t)] - mean) * (series[static_cast<std::size_t>(t + l)] - mean);
        }
        acc[static_cast<std::size_t>(l - 1)] += num / var;
      }
    }
  }
  for (int l = 0; l < max_lag; ++l) {
    out.corr[static_cast<std::size_t>(l)] = acc[static_cast<std::size_t>(l)] / static_cast<double>(total_units);
  }
  out.all_constant = constant_units == total_units;
  return out;
}

ModeCoverage mode_coverage(const Tensor& samples, const std::vector<std::pair<double, double>>& centers,
                           double radius) {
  if (samples.ndim() != 2 || samples.dim(1) != 2) {
    throw std::invalid_argument("mode_coverage: expected [N, 2] samples, got " + samples.shape_str());
  }
  if (centers.empty()) throw std::invalid_argument("mode_coverage: no centers");
  ModeCoverage out;
  out.histogram.assign(centers.size(), 0);
  const int n = samples.dim(0);
  for (int i = 0; i < n; ++i) {
    const double x = samples[2 * i];
    const double y = samples[2 * i + 1];
    double best = 1e300;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const double dx = x - centers[k].first;
      const double dy = y - centers[k].second;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best) {
        best = d2;
        best_k = k;
      }
    }
    if (best <= radius * radius) {
      out.histogram[best_k] += 1;
    } else {
      out.unassigned += 1;
    }
  }
  const double threshold = 0.01 * static_cast<double>(n);
  for (std::size_t k = 0; k < centers.size(); ++k) {
    if (static_cast<double>(out.histogram[k]) >= threshold && out.histogram[k] > 0) out.covered += 1;
  }
  return out;
}

double sample_diversity(const Tensor& batch) {
  if (batch.ndim() < 2 || batch.dim(0) < 2) {
    throw std::invalid_argument("sample_diversity: need a batch of at least 2 samples");
  }
  const int n = batch.dim(0);
  const std::int64_t per = batch.numel() / n;
  double total = 0.0;
  for (std::int64_t p = 0; p < per; ++p) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += batch[static_cast<std::int64_t>(i) * per + p];
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = batch[static_cast<std::int64_t>(i) * per + p] - mean;
      var += d * d;
    }
    total += var / n;
  }
  return total / static_cast<double>(per);
}

}  // namespace aan
