#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace aan {

// Deterministic random stream. Distributions are implemented by hand on top
// of mt19937_64 so that draws are bit-identical across standard library
// implementations; the engine state round-trips through text for checkpoints.
class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Derives an independent stream from a master seed, a purpose label and an
  // optional index (e.g. a step number). Stateless: same inputs, same stream.
  static Rng stream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

  std::uint64_t next_u64() { return engine_(); }
  std::uint64_t next_below(std::uint64_t n);

  double uniform();                     // [0, 1)
  double uniform(double lo, double hi); // [lo, hi)
  double normal(double mean, double stddev);
  bool bernoulli(double p) { return uniform() < p; }

  std::string save_state() const;
  void restore_state(const std::string& text);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace aan
