#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aan/tensor.hpp"

namespace aan {

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Versioned binary snapshot sufficient to resume a run bit-exactly: every
// model/optimizer tensor, the config text, the step counters, and the RNG
// stream position. Records carry individual CRC32 checksums.
struct Checkpoint {
  std::uint32_t version = 1;
  std::uint64_t step = 0;
  std::uint64_t d_opt_step = 0;
  std::uint64_t g_opt_step = 0;
  std::string config_text;
  std::string rng_state;
  std::vector<NamedTensor> tensors;

  const Tensor* find(const std::string& name) const;
  const Tensor& require(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);

}  // namespace aan
