#pragma once

#include <cstddef>
#include <vector>

#include "porl/tensor.h"

namespace porl {

// Reverse-mode autodiff over matrix ops. Values are computed eagerly as nodes
// are recorded; backward() replays the tape in reverse. Node handles are plain
// ints into the tape. The op set covers exactly what feed-forward + attention
// networks and the training losses need — nothing more.
class Graph {
 public:
  int input(Tensor v);             // leaf, no gradient tracked
  int param(const Tensor* p);      // leaf whose gradient is wanted; p must outlive the graph

  int matmul(int a, int b);        // (m,k) x (k,n)
  int transpose(int a);
  int add(int a, int b);           // same shape
  int sub(int a, int b);
  int mul(int a, int b);           // elementwise
  int add_row(int a, int v);       // v shape (1, n) broadcast over rows of a
  int scale(int a, double c);
  int relu(int a);
  int tanh_act(int a);
  int silu(int a);
  int softmax_rows(int a);
  int layer_norm_rows(int x, int gain, int bias);  // gain/bias shape (1, n)
  int concat_cols(int a, int b);
  int concat_rows(int a, int b);
  int slice_cols(int a, std::size_t lo, std::size_t hi);  // [lo, hi)
  int slice_rows(int a, std::size_t lo, std::size_t hi);
  int sum_all(int a);              // scalar, shape (1,1)
  int mean_all(int a);
  int sum_sq(int a);               // sum of squares
  int sum_abs(int a);              // L1; subgradient 0 at 0

  const Tensor& val(int id) const { return nodes_[id].val; }
  void backward(int root);         // root must be scalar
  const Tensor& grad(int id) const { return nodes_[id].grad; }

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    kInput, kParam, kMatMul, kTranspose, kAdd, kSub, kMul, kAddRow, kScale,
    kRelu, kTanh, kSilu, kSoftmaxRows, kLayerNorm, kConcatCols, kConcatRows,
    kSliceCols, kSliceRows, kSumAll, kMeanAll, kSumSq, kSumAbs
  };
  struct Node {
    Op op;
    int a = -1, b = -1, c = -1;
    std::size_t lo = 0, hi = 0;
    double scalar = 0.0;
    Tensor val;
    Tensor grad;
    std::vector<double> aux;  // op-specific cache (layer norm statistics)
  };
  int push(Node n);
  std::vector<Node> nodes_;
};

}  // namespace porl
