#include "porl/tensor.h"

#include <cmath>
#include <stdexcept>

namespace porl {

static std::size_t product(const std::vector<std::size_t>& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape_in) : shape(std::move(shape_in)) {
  data.assign(product(shape), 0.0);
}

Tensor::Tensor(std::size_t rows, std::size_t cols) : Tensor(std::vector<std::size_t>{rows, cols}) {}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> values) {
  if (product(shape) != values.size()) throw std::invalid_argument("tensor: shape/data length mismatch");
  Tensor t;
  t.shape = std::move(shape);
  t.data = std::move(values);
  return t;
}

Tensor Tensor::row(std::vector<double> values) {
  std::size_t n = values.size();
  return from({1, n}, std::move(values));
}

std::size_t Tensor::rows() const {
  if (shape.empty()) return 0;
  std::size_t n = 1;
  for (std::size_t i = 0; i + 1 < shape.size(); ++i) n *= shape[i];
  return n;
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor Tensor::row_slice(std::size_t r) const {
  Tensor out(1, cols());
  for (std::size_t c = 0; c < cols(); ++c) out.data[c] = at(r, c);
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

double l2_norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

}  // namespace porl
