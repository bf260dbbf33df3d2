#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aan/rng.hpp"

namespace aan {

// Dense row-major 64-bit-float array with an explicit shape. The universal
// numeric currency of the library.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape_, double fill = 0.0);
  Tensor(std::vector<int> shape_, std::vector<double> values);

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const;
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  std::string shape_str() const;

  double& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }
};

std::int64_t shape_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

bool all_finite(const Tensor& t);

// Throw std::runtime_error naming `what` and the first offending index.
void require_finite(const Tensor& t, const char* what);
void require_shape(const Tensor& t, const std::vector<int>& shape, const char* what);

Tensor randn(const std::vector<int>& shape, double stddev, Rng& rng);

}  // namespace aan
