#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace porl {

// Dense row-major array of doubles. Most code treats tensors as 2-D matrices
// (rows() x cols()); higher-rank shapes collapse leading dims into rows().
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape_in);
  Tensor(std::size_t rows, std::size_t cols);

  static Tensor from(std::vector<std::size_t> shape, std::vector<double> values);
  static Tensor row(std::vector<double> values);  // shape (1, n)

  std::size_t size() const { return data.size(); }
  std::size_t cols() const { return shape.empty() ? 0 : shape.back(); }
  std::size_t rows() const;

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  Tensor row_slice(std::size_t r) const;  // copy of row r, shape (1, cols)

  std::vector<std::size_t> shape;
  std::vector<double> data;
};

double dot(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& a);

}  // namespace porl
