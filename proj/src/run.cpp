#include "aan/run.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace aan {

namespace {

std::string utc_stamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return buf;
}

void write_manifest(const RunPaths& paths, const TrainConfig& cfg) {
  std::ofstream out(paths.manifest, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + paths.manifest);
  out << "# run manifest\n";
  out << "run_dir=" << paths.dir << "\n";
  out << "metrics_csv=" << paths.metrics << "\n";
  out << "checkpoint_final=" << paths.checkpoint_final << "\n";
  out << "samples=" << paths.samples << "\n";
  out << cfg.serialize();
  if (!out) throw std::runtime_error("manifest write failed for " + paths.manifest);
}

void write_samples_artifact(Trainer& trainer, const RunPaths& paths, std::ostream& log) {
  const TrainConfig& cfg = trainer.config();
  Tensor fakes = trainer.sample_fakes(cfg.dataset == DatasetKind::mnist ? 64 : 1024,
                                      Rng::stream(cfg.seed, "export"));
  if (cfg.dataset == DatasetKind::mnist) {
    write_image_grid(fakes, 8, 8, paths.samples);
  } else {
    write_points_csv(fakes, paths.samples);
    auto centers = toy2d_centers(cfg.toy_centers, cfg.toy_radius);
    auto cov = mode_coverage(fakes, centers, 0.25);
    log << "mode coverage: " << cov.covered << "/" << cfg.toy_centers << " centers\n";
  }
  log << "samples written to " << paths.samples << "\n";
}

RunPaths train_loop(Trainer& trainer, const RunPaths& paths, std::ostream& log) {
  const TrainConfig& cfg = trainer.config();
  MetricsWriter metrics(paths.metrics);
  while (trainer.current_step() < cfg.steps) {
    StepMetrics m = trainer.step();
    metrics.append(m);
    if (cfg.checkpoint_every > 0 && m.step % cfg.checkpoint_every == 0 && m.step < cfg.steps) {
      const std::string p = paths.dir + "/checkpoint_step" + std::to_string(m.step) + ".aanc";
      save_checkpoint(trainer.to_checkpoint(), p);
    }
    if (m.step % 500 == 0 || m.step == cfg.steps) {
      log << "step " << m.step << "/" << cfg.steps << "  d_loss=" << m.d_loss << "  g_loss=" << m.g_loss
          << "  E[logD(x)]=" << m.e_logd_real << "  ratio=" << m.ratio << "\n";
    }
  }
  save_checkpoint(trainer.to_checkpoint(), paths.checkpoint_final);
  write_samples_artifact(trainer, paths, log);
  return paths;
}

}  // namespace

RunPaths resolve_run_paths(const std::string& out_dir, DatasetKind dataset, std::uint64_t seed) {
  RunPaths p;
  if (!out_dir.empty()) {
    p.dir = out_dir;
  } else {
    const char* root = std::getenv("AAN_OUT_ROOT");
    p.dir = std::string(root ? root : "runs") + "/run-" + utc_stamp() + "-seed" + std::to_string(seed);
  }
  p.manifest = p.dir + "/manifest.txt";
  p.metrics = p.dir + "/metrics.csv";
  p.checkpoint_final = p.dir + "/checkpoint_final.aanc";
  p.samples = p.dir + (dataset == DatasetKind::mnist ? "/samples_final.pgm" : "/samples_final.csv");
  return p;
}

RunPaths run_train(const TrainConfig& cfg, const std::string& out_dir, std::ostream& log) {
  cfg.validate();
  RunPaths paths = resolve_run_paths(out_dir, cfg.dataset, cfg.seed);
  fs::create_directories(paths.dir);
  fs::remove(paths.metrics);  // fresh runs never append
  write_manifest(paths, cfg);
  Trainer trainer(cfg);
  return train_loop(trainer, paths, log);
}

RunPaths run_train_resume(const std::string& checkpoint_path, std::int64_t steps_override,
                          const std::string& out_dir, std::ostream& log) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  Trainer trainer = Trainer::from_checkpoint(ck);
  TrainConfig cfg = trainer.config();
  if (steps_override > 0) {
    cfg.steps = steps_override;
    // Rebuild with the widened target; model state is untouched.
    Checkpoint patched = trainer.to_checkpoint();
    patched.config_text = cfg.serialize();
    trainer = Trainer::from_checkpoint(patched);
  }
  RunPaths paths = resolve_run_paths(out_dir, trainer.config().dataset, trainer.config().seed);
  fs::create_directories(paths.dir);
  write_manifest(paths, trainer.config());
  log << "resumed from " << checkpoint_path << " at step " << trainer.current_step() << "\n";
  return train_loop(trainer, paths, log);
}

Tensor make_two_mode_spins(int n, int dim, double flip_prob, Rng& rng) {
  if (n < 1 || dim < 1) throw std::invalid_argument("make_two_mode_spins: n and dim must be positive");
  if (!(flip_prob >= 0.0 && flip_prob < 0.5)) {
    throw std::invalid_argument("make_two_mode_spins: flip_prob must be in [0, 0.5)");
  }
  Tensor out({n, dim});
  for (int i = 0; i < n; ++i) {
    const double base = rng.bernoulli(0.5) ? 1.0 : -1.0;
    for (int u = 0; u < dim; ++u) {
      out[static_cast<std::int64_t>(i) * dim + u] = rng.bernoulli(flip_prob) ? -base : base;
    }
  }
  return out;
}

EvalRbmResult run_eval_rbm(int n_v, int n_h, std::int64_t steps, std::uint64_t seed, int cd_steps, double lr,
                           double momentum, int batch_size, double flip_prob, std::ostream& log) {
  if (n_v + n_h > kMaxEnumTotalUnits) {
    throw std::invalid_argument("eval-rbm: n_v + n_h exceeds the exact-enumeration bound of " +
                                std::to_string(kMaxEnumTotalUnits));
  }
  Rng data_rng = Rng::stream(seed, "eval-rbm-data");
  Tensor heldout = make_two_mode_spins(512, n_v, flip_prob, data_rng);
  Rng init_rng = Rng::stream(seed, "eval-rbm-init");
  RbmParams rbm = RbmParams::init(n_v, n_h, 0.01, init_rng);
  MomentumState opt;
  opt.lr = lr;
  opt.momentum = momentum;
  opt.init_like(rbm.param_list());
  Rng train_rng = Rng::stream(seed, "eval-rbm-train");

  EvalRbmResult result;
  result.initial_heldout_ll = exact_log_likelihood(rbm, heldout);
  log << "eval-rbm: " << n_v << "x" << n_h << " rbm, cd-" << cd_steps << ", lr " << lr << ", momentum "
      << momentum << ", " << steps << " steps\n";
  log << "initial heldout log-likelihood: " << result.initial_heldout_ll << "\n";

  for (std::int64_t s = 0; s < steps; ++s) {
    Tensor batch = make_two_mode_spins(batch_size, n_v, flip_prob, train_rng);
    CdResult cd = cd_k_update(batch, rbm, cd_steps, train_rng);
    Tensor lw = cd.grads.total_w(), lb = cd.grads.total_b(), lc = cd.grads.total_c();
    for (double& v : lw.data) v = -v;
    for (double& v : lb.data) v = -v;
    for (double& v : lc.data) v = -v;
    sgd_momentum_step(rbm.param_list(), {&lw, &lb, &lc}, opt);
    if ((s + 1) % 500 == 0) {
      log << "step " << (s + 1) << " heldout log-likelihood: " << exact_log_likelihood(rbm, heldout) << "\n";
    }
  }
  result.final_heldout_ll = exact_log_likelihood(rbm, heldout);
  log << "final heldout log-likelihood: " << result.final_heldout_ll << "\n";
  log << "improvement: " << (result.final_heldout_ll - result.initial_heldout_ll) << " nats\n";
  return result;
}

// ---------------------------------------------------------------------------
// gradient check suites
// ---------------------------------------------------------------------------

namespace {

Net random_net_instance(int which, Rng& rng) {
  auto dense_rand = [&rng](int in, int out) {
    Layer l = Layer::dense(in, out);
    for (double& w : l.weights.data) w = rng.normal(0.0, 0.5);
    for (double& b : l.bias.data) b = rng.normal(0.0, 0.1);
    return l;
  };
  auto conv_rand = [&rng](int ic, int oc, int k, int s) {
    Layer l = Layer::conv2d(ic, oc, k, s);
    for (double& w : l.weights.data) w = rng.normal(0.0, 0.5);
    for (double& b : l.bias.data) b = rng.normal(0.0, 0.1);
    return l;
  };
  auto tconv_rand = [&rng](int ic, int oc, int k, int s) {
    Layer l = Layer::conv2d_transpose(ic, oc, k, s);
    for (double& w : l.weights.data) w = rng.normal(0.0, 0.5);
    for (double& b : l.bias.data) b = rng.normal(0.0, 0.1);
    return l;
  };
  Net net;
  switch (which % 5) {
    case 0:  // single dense
      net.layers = {dense_rand(4, 3)};
      break;
    case 1: {  // conv + leaky
      const int stride = 1 + static_cast<int>(rng.next_below(2));
      net.layers = {conv_rand(2, 3, 3, stride), Layer::activation(ActKind::leaky_relu, 0.2)};
      break;
    }
    case 2:  // transposed conv + tanh
      net.layers = {tconv_rand(2, 2, 3, 2), Layer::activation(ActKind::tanh)};
      break;
    case 3:  // 3-layer MLP with every activation kind
      net.layers = {dense_rand(5, 8), Layer::activation(ActKind::leaky_relu, 0.2),
                    dense_rand(8, 6),  Layer::activation(ActKind::sigmoid),
                    dense_rand(6, 2),  Layer::activation(ActKind::tanh)};
      break;
    case 4:  // conv stack into dense head (discriminator-shaped)
      net.layers = {conv_rand(1, 2, 3, 2), Layer::activation(ActKind::relu),
                    dense_rand(2 * 3 * 3, 4), Layer::activation(ActKind::tanh),
                    dense_rand(4, 1)};
      break;
  }
  return net;
}

Tensor random_input_for(int which, Rng& rng) {
  std::vector<int> shape;
  switch (which % 5) {
    case 0: shape = {3, 4}; break;
    case 1: shape = {2, 2, 6, 6}; break;
    case 2: shape = {2, 2, 3, 3}; break;
    case 3: shape = {4, 5}; break;
    case 4: shape = {2, 1, 8, 8}; break;
  }
  Tensor x(shape);
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  return x;
}

}  // namespace

double run_grad_check(int trials, double eps, std::ostream& log) {
  Rng rng = Rng::stream(20260809, "grad-check");
  double worst = 0.0;
  int worst_instance = -1;
  for (int t = 0; t < trials; ++t) {
    Net net = random_net_instance(t, rng);
    Tensor x = random_input_for(t, rng);
    const double err = finite_difference_check(net, x, eps);
    if (err > worst) {
      worst = err;
      worst_instance = t;
    }
  }
  log << "grad-check: " << trials << " randomized instances, eps " << eps << ", max relative error " << worst
      << " (instance " << worst_instance << ")\n";
  return worst;
}

// ---------------------------------------------------------------------------
// sweep-gibbs & export-samples
// ---------------------------------------------------------------------------

void run_sweep_gibbs(const std::string& checkpoint_path, int images, int max_steps, const std::string& out_dir,
                     std::ostream& log) {
  if (images < 1 || max_steps < 1) throw std::invalid_argument("sweep-gibbs: images and max-steps must be >= 1");
  Checkpoint ck = load_checkpoint(checkpoint_path);
  Trainer trainer = Trainer::from_checkpoint(ck);
  const TrainConfig& cfg = trainer.config();
  fs::create_directories(out_dir);

  const int n = std::min(images, trainer.heldout_data().size());
  std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  Tensor real = trainer.heldout_data().gather(idx);

  std::vector<Tensor> chain_states;
  Tensor grid = gibbs_sweep(real, trainer.rbm(), trainer.discriminator(), trainer.generator(), cfg.binarize,
                            max_steps, Rng::stream(cfg.seed, "sweep"), &chain_states);

  if (cfg.dataset == DatasetKind::mnist) {
    const std::string path = out_dir + "/gibbs_sweep.pgm";
    write_image_grid(grid, n, max_steps + 1, path);
    log << "sweep grid written to " << path << "\n";
  } else {
    const std::string path = out_dir + "/gibbs_sweep.csv";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "row,column,x,y\n";
    const std::int64_t per = grid.numel() / grid.dim(0);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c <= max_steps; ++c) {
        const double* p = grid.data.data() + (static_cast<std::int64_t>(r) * (max_steps + 1) + c) * per;
        out << r << "," << c << "," << p[0] << "," << p[1] << "\n";
      }
    }
    log << "sweep table written to " << path << "\n";
  }

  if (chain_states.size() >= 3) {
    auto ac = feature_autocorrelation(chain_states, std::min<int>(max_steps, 10));
    const std::string path = out_dir + "/feature_autocorrelation.csv";
    std::ofstream out(path);
    out << "lag,correlation\n";
    for (std::size_t l = 0; l < ac.corr.size(); ++l) out << (l + 1) << "," << ac.corr[l] << "\n";
    log << "lag-1 feature autocorrelation: " << ac.corr[0] << (ac.all_constant ? " (constant chain)" : "")
        << "\n";
  }
}

void run_export_samples(const std::string& checkpoint_path, int count, const std::string& out_dir,
                        std::ostream& log) {
  if (count < 1) throw std::invalid_argument("export-samples: count must be >= 1");
  Checkpoint ck = load_checkpoint(checkpoint_path);
  Trainer trainer = Trainer::from_checkpoint(ck);
  const TrainConfig& cfg = trainer.config();
  fs::create_directories(out_dir);
  Tensor fakes = trainer.sample_fakes(count, Rng::stream(cfg.seed, "export"));
  if (cfg.dataset == DatasetKind::mnist) {
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
    const int rows = (count + cols - 1) / cols;
    const std::string path = out_dir + "/samples.pgm";
    write_image_grid(fakes, rows, cols, path);
    log << "samples written to " << path << "\n";
  } else {
    const std::string path = out_dir + "/samples.csv";
    write_points_csv(fakes, path);
    auto centers = toy2d_centers(cfg.toy_centers, cfg.toy_radius);
    auto cov = mode_coverage(fakes, centers, 0.25);
    log << "samples written to " << path << "\n";
    log << "mode coverage: " << cov.covered << "/" << cfg.toy_centers << " centers\n";
  }
}

}  // namespace aan
