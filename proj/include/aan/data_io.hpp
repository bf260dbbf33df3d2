#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "aan/metrics.hpp"
#include "aan/tensor.hpp"

namespace aan {

enum class DatasetKind { mnist, toy2d };
enum class DatasetSplit { train, heldout };

struct Dataset {
  Tensor samples;  // [N, C, H, W] or [N, 2], values in [-1, 1]
  std::vector<int> labels;
  DatasetKind kind = DatasetKind::toy2d;
  DatasetSplit split = DatasetSplit::train;

  int size() const { return samples.ndim() > 0 ? samples.dim(0) : 0; }
  std::vector<int> sample_shape() const;  // per-sample, no batch dim
  Tensor gather(const std::vector<std::int64_t>& indices) const;
};

// IDX ingestion: big-endian headers, magic 0x00000803 (images) / 0x00000801
// (labels); pixels mapped linearly from [0, 255] to [-1, 1].
Dataset load_mnist_idx(const std::string& image_path, const std::string& label_path);

// Ring mixture of `centers` Gaussians in [-1, 1]^2. radius and noise_std are
// in final units; points are clamped to the square.
Dataset make_toy2d(int n, int centers, double radius, double noise_std, std::uint64_t seed);
std::vector<std::pair<double, double>> toy2d_centers(int centers, double radius);

// Deterministic split: first (1 - frac) of the samples train, last frac held out.
std::pair<Dataset, Dataset> split_train_heldout(const Dataset& d, double heldout_frac = 0.1);

// 8-bit grayscale PGM (P5) grid of [N, 1, H, W] samples, [-1,1] -> [0,255],
// row-major tiling with 2px separators.
void write_image_grid(const Tensor& samples, int rows, int cols, const std::string& path);

// 2-column CSV of [N, 2] points.
void write_points_csv(const Tensor& points, const std::string& path);

// Single-writer CSV sink for StepMetrics. Opening a path that another live
// writer holds is an error; reopening a finished file appends without
// duplicating the header.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  ~MetricsWriter();
  MetricsWriter(const MetricsWriter&) = delete;
  MetricsWriter& operator=(const MetricsWriter&) = delete;

  void append(const StepMetrics& row);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::string registry_key_;
  std::ofstream out_;
};

std::vector<StepMetrics> read_metrics_csv(const std::string& path);

}  // namespace aan
