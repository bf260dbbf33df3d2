#pragma once

#include <cstdint>
#include <ostream>
#include <string>

#include "aan/trainer.hpp"

namespace aan {

// Resolved per-run artifact locations. The manifest is written before any
// training starts and is sufficient to reproduce the run.
struct RunPaths {
  std::string dir;
  std::string manifest;
  std::string metrics;
  std::string checkpoint_final;
  std::string samples;  // .pgm for image data, .csv for 2-D points
};

// out_dir empty -> $AAN_OUT_ROOT (or ./runs) / run-<utc timestamp>-seed<seed>.
RunPaths resolve_run_paths(const std::string& out_dir, DatasetKind dataset, std::uint64_t seed);

// Trains from scratch; artifacts under the returned paths.
RunPaths run_train(const TrainConfig& cfg, const std::string& out_dir, std::ostream& log);

// Resumes from a checkpoint; `steps_override` > 0 replaces the target step
// count. Metrics rows are appended to the existing CSV in out_dir.
RunPaths run_train_resume(const std::string& checkpoint_path, std::int64_t steps_override,
                          const std::string& out_dir, std::ostream& log);

struct EvalRbmResult {
  double initial_heldout_ll = 0.0;
  double final_heldout_ll = 0.0;
};
// Trains an n_v x n_h spin RBM with CD-k / SGD+momentum on a fixed synthetic
// two-mode spin distribution and reports the exact held-out log-likelihood.
EvalRbmResult run_eval_rbm(int n_v, int n_h, std::int64_t steps, std::uint64_t seed, int cd_steps, double lr,
                           double momentum, int batch_size, double flip_prob, std::ostream& log);

// Synthetic spin data: two antipodal modes (all +1 / all -1) with independent
// per-unit flip noise.
Tensor make_two_mode_spins(int n, int dim, double flip_prob, Rng& rng);

// Finite-difference suites over randomized layer instances of every kind.
// Returns the worst relative error observed.
double run_grad_check(int trials, double eps, std::ostream& log);

void run_sweep_gibbs(const std::string& checkpoint_path, int images, int max_steps,
                     const std::string& out_dir, std::ostream& log);

void run_export_samples(const std::string& checkpoint_path, int count, const std::string& out_dir,
                        std::ostream& log);

}  // namespace aan
