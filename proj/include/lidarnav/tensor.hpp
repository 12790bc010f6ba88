#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace lidarnav {

// Dense row-major tensor. Values are double in memory; all on-disk formats
// narrow to 32-bit floats.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape)
      : shape_(std::move(shape)), data_(count(shape_), 0.0) {}
  Tensor(std::vector<int> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {}

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  // Reinterpret in place; product of dims must match.
  Tensor& reshape(std::vector<int> shape);
  Tensor reshaped(std::vector<int> shape) const {
    Tensor t = *this;
    t.reshape(std::move(shape));
    return t;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;

 private:
  static std::size_t count(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return s.empty() ? 0 : n;
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace lidarnav
