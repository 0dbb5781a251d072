#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "aecf/errors.hpp"

namespace aecf {

// Dense row-major tensor of doubles, rank 1 to 3. Plain value type: copyable,
// movable, immutable by convention once handed to another component.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    check_shape();
    data_.assign(element_count(shape_), 0.0);
  }

  Tensor(std::vector<int> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    if (element_count(shape_) != data_.size()) {
      throw ConfigError("tensor data size " + std::to_string(data_.size()) +
                        " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static Tensor full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::size_t size() const { return data_.size(); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }
  const double* raw() const { return data_.data(); }
  double* raw() { return data_.data(); }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  // 2-D access (row-major).
  double at(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * shape_[1] + j];
  }
  double& at(int i, int j) {
    return data_[static_cast<std::size_t>(i) * shape_[1] + j];
  }

  bool is_scalar() const { return data_.size() == 1; }

  double scalar_value() const {
    if (!is_scalar()) {
      throw UsageError("expected scalar tensor, got shape " + shape_string(shape_));
    }
    return data_[0];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  double sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }
  double mean() const { return data_.empty() ? 0.0 : sum() / static_cast<double>(data_.size()); }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  static std::size_t element_count(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
  }

  static std::string shape_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) os << 'x';
      os << shape[i];
    }
    os << ')';
    return os.str();
  }

 private:
  void check_shape() const {
    if (shape_.empty() || shape_.size() > 3) {
      throw ConfigError("tensor rank must be 1..3, got shape " + shape_string(shape_));
    }
    for (int d : shape_) {
      if (d <= 0) throw ConfigError("tensor dimensions must be positive, got " + shape_string(shape_));
    }
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

// Throws NumericError naming the first non-finite element. Called at public
// operation boundaries; internal kernels assume finite inputs.
inline void ensure_finite(const Tensor& t, const std::string& what) {
  const auto& d = t.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i])) {
      throw NumericError(what + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

inline void ensure_same_shape(const Tensor& a, const Tensor& b, const std::string& what) {
  if (!a.same_shape(b)) {
    throw ConfigError(what + ": shape mismatch " + Tensor::shape_string(a.shape()) +
                      " vs " + Tensor::shape_string(b.shape()));
  }
}

}  // namespace aecf
