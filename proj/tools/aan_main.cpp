#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "aan/run.hpp"

namespace {

// Flags are collected as (config key, value) pairs and applied on top of the
// config file, so flags always win.
struct KeyedFlags {
  std::vector<std::pair<std::string, std::string>> values;

  void add(CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& desc) {
    cmd->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { values.emplace_back(key, v); }, desc);
  }
  void add_flag(CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& desc) {
    cmd->add_flag_callback(flag, [this, key]() { values.emplace_back(key, "true"); }, desc);
  }
};

aan::TrainConfig build_config(const std::string& config_file, const KeyedFlags& flags) {
  aan::TrainConfig cfg;
  if (!config_file.empty()) {
    std::ifstream in(config_file);
    if (!in) throw std::runtime_error("cannot open config file " + config_file);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw std::runtime_error("config line missing '=': " + line);
      cfg.apply_key_value(line.substr(0, eq), line.substr(eq + 1));
    }
  }
  for (const auto& [key, value] : flags.values) cfg.apply_key_value(key, value);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Associative adversarial network trainer"};
  app.require_subcommand(1);

  // --- train ---
  auto* train = app.add_subcommand("train", "Train an AAN or plain-GAN baseline");
  std::string train_out, train_config, train_resume;
  KeyedFlags tf;
  train->add_option("--out", train_out, "run directory (default: timestamped under $AAN_OUT_ROOT)");
  train->add_option("--config", train_config, "key=value config file; flags override");
  train->add_option("--resume", train_resume, "checkpoint to resume from");
  tf.add(train, "--mode", "mode", "aan|gan");
  tf.add(train, "--dataset", "dataset", "mnist|toy2d");
  tf.add(train, "--preset", "preset", "toy2d|mnist-small|celeba-paper");
  tf.add(train, "--feature-dim", "feature_dim", "F/C split width (RBM visible units)");
  tf.add(train, "--rbm-hidden", "rbm_hidden", "RBM hidden units (0 = feature_dim)");
  tf.add(train, "--cd-steps", "cd_steps", "contrastive-divergence steps");
  tf.add(train, "--steps", "steps", "training steps");
  tf.add(train, "--seed", "seed", "master seed");
  tf.add(train, "--batch-size", "batch_size", "minibatch size");
  tf.add(train, "--g-mode", "g_mode", "minimax|nonsaturating");
  tf.add(train, "--binarize", "binarize", "stochastic|sign");
  tf.add(train, "--g-input", "g_input", "spins|probabilities");
  tf.add(train, "--noise", "noise", "uniform|spin (gan baseline)");
  tf.add(train, "--adam-lr", "adam_lr", "Adam learning rate for D and G");
  tf.add(train, "--rbm-lr", "rbm_lr", "RBM SGD learning rate");
  tf.add(train, "--rbm-momentum", "rbm_momentum", "RBM SGD momentum");
  tf.add(train, "--checkpoint-every", "checkpoint_every", "periodic checkpoint interval (0 = final only)");
  tf.add(train, "--mnist-images", "mnist_images", "IDX image file");
  tf.add(train, "--mnist-labels", "mnist_labels", "IDX label file");
  tf.add(train, "--toy-n", "toy_n", "toy2d dataset size");
  tf.add(train, "--toy-centers", "toy_centers", "toy2d mixture components");
  tf.add_flag(train, "--stride-literal", "stride_literal", "stride = filter width conv reading");

  // --- sweep-gibbs ---
  auto* sweep = app.add_subcommand("sweep-gibbs", "Decode a Gibbs chain through G step by step");
  std::string sweep_ckpt, sweep_out = "sweep";
  int sweep_images = 8, sweep_max_steps = 10;
  sweep->add_option("--checkpoint", sweep_ckpt, "trained checkpoint")->required();
  sweep->add_option("--images", sweep_images, "number of source images");
  sweep->add_option("--max-steps", sweep_max_steps, "Gibbs steps (grid columns minus one)");
  sweep->add_option("--out", sweep_out, "output directory");

  // --- eval-rbm ---
  auto* eval = app.add_subcommand("eval-rbm", "Exact held-out likelihood of a tiny RBM under CD training");
  int ev_nv = 4, ev_nh = 3, ev_cd = 2, ev_batch = 256;
  std::int64_t ev_steps = 500;
  std::uint64_t ev_seed = 1;
  double ev_lr = 0.001, ev_momentum = 0.8, ev_flip = 0.1;
  eval->add_option("--nv", ev_nv, "visible units");
  eval->add_option("--nh", ev_nh, "hidden units");
  eval->add_option("--steps", ev_steps, "training steps");
  eval->add_option("--seed", ev_seed, "seed");
  eval->add_option("--cd-steps", ev_cd, "contrastive-divergence steps");
  eval->add_option("--lr", ev_lr, "learning rate");
  eval->add_option("--momentum", ev_momentum, "momentum");
  eval->add_option("--batch-size", ev_batch, "minibatch size");
  eval->add_option("--flip-prob", ev_flip, "target distribution flip noise");

  // --- grad-check ---
  auto* grad = app.add_subcommand("grad-check", "Finite-difference check of every layer backward pass");
  int gc_trials = 50;
  double gc_eps = 1e-5;
  grad->add_option("--trials", gc_trials, "randomized instances");
  grad->add_option("--eps", gc_eps, "central-difference step");

  // --- export-samples ---
  auto* exp = app.add_subcommand("export-samples", "Generate samples from a trained checkpoint");
  std::string exp_ckpt, exp_out = "samples";
  int exp_count = 64;
  exp->add_option("--checkpoint", exp_ckpt, "trained checkpoint")->required();
  exp->add_option("--count", exp_count, "number of samples");
  exp->add_option("--out", exp_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      if (!train_resume.empty()) {
        std::int64_t steps_override = 0;
        for (const auto& [key, value] : tf.values) {
          if (key == "steps") steps_override = std::stoll(value);
        }
        aan::run_train_resume(train_resume, steps_override, train_out, std::cout);
      } else {
        aan::TrainConfig cfg = build_config(train_config, tf);
        aan::run_train(cfg, train_out, std::cout);
      }
    } else if (sweep->parsed()) {
      aan::run_sweep_gibbs(sweep_ckpt, sweep_images, sweep_max_steps, sweep_out, std::cout);
    } else if (eval->parsed()) {
      aan::run_eval_rbm(ev_nv, ev_nh, ev_steps, ev_seed, ev_cd, ev_lr, ev_momentum, ev_batch, ev_flip,
                        std::cout);
    } else if (grad->parsed()) {
      const double worst = aan::run_grad_check(gc_trials, gc_eps, std::cout);
      if (worst >= 1e-5) {
        std::cerr << "grad-check FAILED: max relative error " << worst << " >= 1e-5\n";
        return 1;
      }
    } else if (exp->parsed()) {
      aan::run_export_samples(exp_ckpt, exp_count, exp_out, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
