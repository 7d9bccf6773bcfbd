#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace attrib {

/// Dense n-dimensional array of doubles, row-major. The universal value
/// carrier for inputs, activations, parameters and attribution maps.
/// Construction rejects NaN/Inf and shape/size mismatches.
class Tensor {
 public:
  Tensor() = default;

  /// Zero-filled tensor of the given shape.
  explicit Tensor(std::vector<size_t> shape);

  /// Takes ownership of a flat buffer; validates length and finiteness.
  Tensor(std::vector<size_t> shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  const std::vector<size_t>& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }

  const std::vector<double>& values() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  /// Same data, new shape (sizes must agree).
  Tensor reshaped(std::vector<size_t> shape) const;

  double sum() const;
  double abs_max() const;
  /// Mean of squared entries.
  double second_moment() const;

  /// Re-checks the finiteness invariant after in-place mutation.
  void validate(const std::string& context) const;

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  std::vector<size_t> shape_;
  std::vector<double> data_;
};

size_t shape_size(const std::vector<size_t>& shape);
std::string shape_str(const std::vector<size_t>& shape);

}  // namespace attrib
