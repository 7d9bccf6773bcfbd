#include "attrib/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace attrib {

size_t shape_size(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const std::vector<size_t>& shape) {
  std::string s = "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Tensor::Tensor(std::vector<size_t> shape)
    : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Tensor::Tensor(std::vector<size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw std::invalid_argument("Tensor: data length " +
                                std::to_string(data_.size()) +
                                " does not match shape " + shape_str(shape_));
  }
  validate("Tensor construction");
}

Tensor Tensor::reshaped(std::vector<size_t> shape) const {
  if (shape_size(shape) != data_.size()) {
    throw std::invalid_argument("Tensor::reshaped: size mismatch " +
                                shape_str(shape_) + " -> " + shape_str(shape));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = data_;
  return t;
}

double Tensor::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

double Tensor::abs_max() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::fabs(v));
  return m;
}

double Tensor::second_moment() const {
  if (data_.empty()) return 0.0;
  double s = 0.0;
  for (double v : data_) s += v * v;
  return s / static_cast<double>(data_.size());
}

void Tensor::validate(const std::string& context) const {
  for (double v : data_) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(context + ": non-finite value in tensor");
    }
  }
}

}  // namespace attrib
