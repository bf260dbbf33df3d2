#include "aan/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace aan {

std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("Tensor shape dimensions must be positive, got " + shape_to_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<int> shape_, double fill)
    : shape(std::move(shape_)), data(static_cast<std::size_t>(shape_numel(shape)), fill) {}

Tensor::Tensor(std::vector<int> shape_, std::vector<double> values)
    : shape(std::move(shape_)), data(std::move(values)) {
  if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
    throw std::invalid_argument("Tensor: shape " + shape_to_string(shape) + " does not match " +
                                std::to_string(data.size()) + " values");
  }
}

int Tensor::dim(int i) const {
  if (i < 0 || i >= ndim()) {
    throw std::out_of_range("Tensor::dim: axis " + std::to_string(i) + " out of range for " + shape_str());
  }
  return shape[static_cast<std::size_t>(i)];
}

std::string Tensor::shape_str() const { return shape_to_string(shape); }

bool all_finite(const Tensor& t) {
  for (double v : t.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_finite(const Tensor& t, const char* what) {
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    if (!std::isfinite(t.data[i])) {
      throw std::runtime_error(std::string(what) + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

void require_shape(const Tensor& t, const std::vector<int>& shape, const char* what) {
  if (t.shape != shape) {
    throw std::invalid_argument(std::string(what) + ": expected shape " + shape_to_string(shape) + ", got " +
                                t.shape_str());
  }
}

Tensor randn(const std::vector<int>& shape, double stddev, Rng& rng) {
  Tensor t(shape);
  for (double& v : t.data) v = rng.normal(0.0, stddev);
  return t;
}

}  // namespace aan
