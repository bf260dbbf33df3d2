#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "aan/checkpoint.hpp"
#include "aan/data_io.hpp"
#include "aan/gan.hpp"
#include "aan/metrics.hpp"
#include "aan/optim.hpp"
#include "aan/rbm.hpp"

namespace aan {

enum class TrainMode { aan, gan_baseline };
enum class GeneratorInput { spins, probabilities };

struct TrainConfig {
  TrainMode mode = TrainMode::aan;
  DatasetKind dataset = DatasetKind::toy2d;
  std::string preset;  // empty -> chosen by dataset
  int batch_size = 256;
  int cd_steps = 2;
  double rbm_lr = 0.001;
  double rbm_momentum = 0.8;
  int rbm_hidden = 0;  // 0 -> feature_dim
  double rbm_init_std = 0.01;
  double adam_lr = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int feature_dim = 64;
  std::int64_t steps = 1000;
  std::uint64_t seed = 1;
  GeneratorLossMode g_mode = GeneratorLossMode::nonsaturating;
  BinarizeMode binarize = BinarizeMode::stochastic;
  GeneratorInput g_input = GeneratorInput::spins;
  NoiseSource::Kind noise = NoiseSource::Kind::uniform;
  bool stride_literal = false;
  // Diagnostics switches: disable the RBM update, or replace the binarized
  // features with uniform spins (turns the aan step into the gan step).
  bool rbm_update_enabled = true;
  bool substitute_uniform_spins = false;
  // Dataset parameters.
  int toy_n = 10000;
  int toy_centers = 8;
  double toy_radius = 0.7;
  double toy_noise_std = 0.03;
  std::string mnist_images;
  std::string mnist_labels;
  int eval_batch = 256;
  // Artifacts.
  std::int64_t checkpoint_every = 0;  // 0 -> final checkpoint only
  int sample_burnin = 30;             // Gibbs steps for free-running generation

  std::string preset_name() const;
  std::string serialize() const;  // canonical key=value text
  static TrainConfig deserialize(const std::string& text);
  void apply_key_value(const std::string& key, const std::string& value);
  void validate() const;
};

// A training step that produced a non-finite value: the step was rolled back
// and the offending term is named.
struct TrainStepError : std::runtime_error {
  TrainStepError(std::int64_t step, const std::string& what)
      : std::runtime_error("train step " + std::to_string(step) + " aborted and rolled back: " + what) {}
};

class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);
  static Trainer from_checkpoint(const Checkpoint& ck);

  // Advances D, G (and in aan mode the RBM) by exactly one optimizer step.
  StepMetrics step();

  Checkpoint to_checkpoint() const;

  // Free-running generation: RBM chain from uniform spins (aan) or noise
  // (gan baseline), decoded through G.
  Tensor sample_fakes(int count, Rng rng);

  const TrainConfig& config() const { return cfg_; }
  DiscriminatorNet& discriminator() { return d_; }
  GeneratorNet& generator() { return g_; }
  RbmParams& rbm() { return rbm_; }
  const Dataset& train_data() const { return train_; }
  const Dataset& heldout_data() const { return heldout_; }
  const Tensor& eval_batch() const { return eval_real_; }
  std::int64_t current_step() const { return step_; }

 private:
  struct Snapshot;
  Snapshot snapshot() const;
  void restore(const Snapshot& s);

  Tensor draw_batch();
  StepMetrics run_step();
  StepMetrics finish_step(const DiscriminatorNet::ForwardResult& real_pass, const Tensor& fake,
                          double rbm_recon_error);
  ValueTerms eval_terms();

  TrainConfig cfg_;
  DiscriminatorNet d_;
  GeneratorNet g_;
  RbmParams rbm_;
  AdamState d_opt_;
  AdamState g_opt_;
  MomentumState rbm_opt_;
  Rng rng_train_;
  Dataset train_;
  Dataset heldout_;
  Tensor eval_real_;
  std::int64_t step_ = 0;
  double last_d_loss_ = 0.0;
  double last_g_loss_ = 0.0;
};

// Sliding-window mean of the per-step ratio E[log D(x)] / E[log D(G(f))].
// A window is undefined when any of its steps has E[log D(G(f))] within eps
// of zero (D labeling fakes as real).
struct RatioSeries {
  std::vector<double> value;
  std::vector<std::uint8_t> defined;
};
RatioSeries convergence_ratio(const std::vector<StepMetrics>& stream, int window, double eps = 1e-12);

// Chain visualization: row per source image, columns are the original image
// followed by G decodings of the visible state after 1..max_steps Gibbs
// steps. Returned in row-major grid order (cols = max_steps + 1); the visible
// chain states are appended to *chain_states when given.
Tensor gibbs_sweep(const Tensor& real, const RbmParams& rbm, DiscriminatorNet& d, GeneratorNet& g,
                   BinarizeMode binarize, int max_steps, Rng rng, std::vector<Tensor>* chain_states = nullptr);

// Mean over chains/units of the normalized lag autocorrelation of recorded
// spin states. Zero-variance units contribute 1 (a frozen series equals its
// own shift); `all_constant` flags the degenerate every-unit-frozen case.
struct AutocorrResult {
  std::vector<double> corr;  // index ell-1 holds lag ell
  bool all_constant = false;
};
AutocorrResult feature_autocorrelation(const std::vector<Tensor>& chain_states, int max_lag);

struct ModeCoverage {
  int covered = 0;
  std::vector<std::int64_t> histogram;
  std::int64_t unassigned = 0;
};
// Assigns each 2-D sample to its nearest center when within radius; a center
// counts as covered when it holds at least 1% of the samples.
ModeCoverage mode_coverage(const Tensor& samples, const std::vector<std::pair<double, double>>& centers,
                           double radius);

// Mean per-pixel variance across the batch (population variance).
double sample_diversity(const Tensor& batch);

}  // namespace aan
