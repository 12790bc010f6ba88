#include "lidarnav/tensor.hpp"

#include <cmath>
#include <string>

#include "lidarnav/errors.hpp"

namespace lidarnav {

Tensor& Tensor::reshape(std::vector<int> shape) {
  std::size_t n = shape.empty() ? 0 : 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  if (n != data_.size())
    throw DataError("Tensor::reshape: element count mismatch (" +
                    std::to_string(data_.size()) + " vs " + std::to_string(n) + ")");
  shape_ = std::move(shape);
  return *this;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace lidarnav
