#include "porl/graph.h"

#include <cmath>
#include <stdexcept>

namespace porl {

int Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Graph::input(Tensor v) {
  Node n;
  n.op = Op::kInput;
  n.val = std::move(v);
  return push(std::move(n));
}

int Graph::param(const Tensor* p) {
  Node n;
  n.op = Op::kParam;
  n.val = *p;
  return push(std::move(n));
}

int Graph::matmul(int a, int b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (A.cols() != B.rows()) throw std::invalid_argument("matmul: inner dims differ");
  std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Node nd;
  nd.op = Op::kMatMul;
  nd.a = a;
  nd.b = b;
  nd.val = Tensor(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double av = A.data[i * k + p];
      if (av == 0.0) continue;
      const double* brow = &B.data[p * n];
      double* orow = &nd.val.data[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  return push(std::move(nd));
}

int Graph::transpose(int a) {
  const Tensor& A = nodes_[a].val;
  Node nd;
  nd.op = Op::kTranspose;
  nd.a = a;
  nd.val = Tensor(A.cols(), A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) nd.val.at(j, i) = A.at(i, j);
  return push(std::move(nd));
}

int Graph::add(int a, int b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (!A.same_shape(B)) throw std::invalid_argument("add: shape mismatch");
  Node nd;
  nd.op = Op::kAdd;
  nd.a = a;
  nd.b = b;
  nd.val = A;
  for (std::size_t i = 0; i < B.size(); ++i) nd.val.data[i] += B.data[i];
  return push(std::move(nd));
}

int Graph::sub(int a, int b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (!A.same_shape(B)) throw std::invalid_argument("sub: shape mismatch");
  Node nd;
  nd.op = Op::kSub;
  nd.a = a;
  nd.b = b;
  nd.val = A;
  for (std::size_t i = 0; i < B.size(); ++i) nd.val.data[i] -= B.data[i];
  return push(std::move(nd));
}

int Graph::mul(int a, int b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (!A.same_shape(B)) throw std::invalid_argument("mul: shape mismatch");
  Node nd;
  nd.op = Op::kMul;
  nd.a = a;
  nd.b = b;
  nd.val = A;
  for (std::size_t i = 0; i < B.size(); ++i) nd.val.data[i] *= B.data[i];
  return push(std::move(nd));
}

int Graph::add_row(int a, int v) {
  const Tensor& A = nodes_[a].val;
  const Tensor& V = nodes_[v].val;
  if (V.rows() != 1 || V.cols() != A.cols()) throw std::invalid_argument("add_row: bias shape");
  Node nd;
  nd.op = Op::kAddRow;
  nd.a = a;
  nd.b = v;
  nd.val = A;
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) nd.val.at(i, j) += V.data[j];
  return push(std::move(nd));
}

int Graph::scale(int a, double c) {
  Node nd;
  nd.op = Op::kScale;
  nd.a = a;
  nd.scalar = c;
  nd.val = nodes_[a].val;
  for (auto& x : nd.val.data) x *= c;
  return push(std::move(nd));
}

int Graph::relu(int a) {
  Node nd;
  nd.op = Op::kRelu;
  nd.a = a;
  nd.val = nodes_[a].val;
  for (auto& x : nd.val.data) x = x > 0.0 ? x : 0.0;
  return push(std::move(nd));
}

int Graph::tanh_act(int a) {
  Node nd;
  nd.op = Op::kTanh;
  nd.a = a;
  nd.val = nodes_[a].val;
  for (auto& x : nd.val.data) x = std::tanh(x);
  return push(std::move(nd));
}

int Graph::silu(int a) {
  Node nd;
  nd.op = Op::kSilu;
  nd.a = a;
  nd.val = nodes_[a].val;
  for (auto& x : nd.val.data) x = x / (1.0 + std::exp(-x));
  return push(std::move(nd));
}

int Graph::softmax_rows(int a) {
  Node nd;
  nd.op = Op::kSoftmaxRows;
  nd.a = a;
  nd.val = nodes_[a].val;
  std::size_t n = nd.val.cols();
  for (std::size_t i = 0; i < nd.val.rows(); ++i) {
    double* row = &nd.val.data[i * n];
    double mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      s += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= s;
  }
  return push(std::move(nd));
}

int Graph::layer_norm_rows(int x, int gain, int bias) {
  const Tensor& X = nodes_[x].val;
  const Tensor& G = nodes_[gain].val;
  const Tensor& B = nodes_[bias].val;
  std::size_t n = X.cols();
  if (G.cols() != n || B.cols() != n || G.rows() != 1 || B.rows() != 1)
    throw std::invalid_argument("layer_norm: gain/bias shape");
  constexpr double kEps = 1e-5;
  Node nd;
  nd.op = Op::kLayerNorm;
  nd.a = x;
  nd.b = gain;
  nd.c = bias;
  nd.val = Tensor(X.rows(), n);
  nd.aux.resize(2 * X.rows());  // per-row (mean, inv_std)
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double* row = &X.data[i * n];
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(n);
    double inv = 1.0 / std::sqrt(var + kEps);
    nd.aux[2 * i] = mean;
    nd.aux[2 * i + 1] = inv;
    for (std::size_t j = 0; j < n; ++j)
      nd.val.at(i, j) = (row[j] - mean) * inv * G.data[j] + B.data[j];
  }
  return push(std::move(nd));
}

int Graph::concat_cols(int a, int b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (A.rows() != B.rows()) throw std::invalid_argument("concat_cols: row mismatch");
  Node nd;
  nd.op = Op::kConcatCols;
  nd.a = a;
  nd.b = b;
  nd.val = Tensor(A.rows(), A.cols() + B.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) nd.val.at(i, j) = A.at(i, j);
    for (std::size_t j = 0; j < B.cols(); ++j) nd.val.at(i, A.cols() + j) = B.at(i, j);
  }
  return push(std::move(nd));
}

int Graph::concat_rows(int a, int b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (A.cols() != B.cols()) throw std::invalid_argument("concat_rows: col mismatch");
  Node nd;
  nd.op = Op::kConcatRows;
  nd.a = a;
  nd.b = b;
  nd.val = Tensor(A.rows() + B.rows(), A.cols());
  std::copy(A.data.begin(), A.data.end(), nd.val.data.begin());
  std::copy(B.data.begin(), B.data.end(), nd.val.data.begin() + static_cast<long>(A.size()));
  return push(std::move(nd));
}

int Graph::slice_cols(int a, std::size_t lo, std::size_t hi) {
  const Tensor& A = nodes_[a].val;
  if (lo >= hi || hi > A.cols()) throw std::invalid_argument("slice_cols: bad range");
  Node nd;
  nd.op = Op::kSliceCols;
  nd.a = a;
  nd.lo = lo;
  nd.hi = hi;
  nd.val = Tensor(A.rows(), hi - lo);
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = lo; j < hi; ++j) nd.val.at(i, j - lo) = A.at(i, j);
  return push(std::move(nd));
}

int Graph::slice_rows(int a, std::size_t lo, std::size_t hi) {
  const Tensor& A = nodes_[a].val;
  if (lo >= hi || hi > A.rows()) throw std::invalid_argument("slice_rows: bad range");
  Node nd;
  nd.op = Op::kSliceRows;
  nd.a = a;
  nd.lo = lo;
  nd.hi = hi;
  nd.val = Tensor(hi - lo, A.cols());
  std::copy(A.data.begin() + static_cast<long>(lo * A.cols()),
            A.data.begin() + static_cast<long>(hi * A.cols()), nd.val.data.begin());
  return push(std::move(nd));
}

int Graph::sum_all(int a) {
  Node nd;
  nd.op = Op::kSumAll;
  nd.a = a;
  double s = 0.0;
  for (double v : nodes_[a].val.data) s += v;
  nd.val = Tensor::from({1, 1}, {s});
  return push(std::move(nd));
}

int Graph::mean_all(int a) {
  Node nd;
  nd.op = Op::kMeanAll;
  nd.a = a;
  double s = 0.0;
  for (double v : nodes_[a].val.data) s += v;
  nd.scalar = 1.0 / static_cast<double>(nodes_[a].val.size());
  nd.val = Tensor::from({1, 1}, {s * nd.scalar});
  return push(std::move(nd));
}

int Graph::sum_sq(int a) {
  Node nd;
  nd.op = Op::kSumSq;
  nd.a = a;
  double s = 0.0;
  for (double v : nodes_[a].val.data) s += v * v;
  nd.val = Tensor::from({1, 1}, {s});
  return push(std::move(nd));
}

int Graph::sum_abs(int a) {
  Node nd;
  nd.op = Op::kSumAbs;
  nd.a = a;
  double s = 0.0;
  for (double v : nodes_[a].val.data) s += std::fabs(v);
  nd.val = Tensor::from({1, 1}, {s});
  return push(std::move(nd));
}

void Graph::backward(int root) {
  if (nodes_[root].val.size() != 1) throw std::invalid_argument("backward: root must be scalar");
  for (auto& n : nodes_) {
    n.grad = Tensor(n.val.shape);
  }
  nodes_[root].grad.data[0] = 1.0;

  for (int id = root; id >= 0; --id) {
    Node& n = nodes_[id];
    const Tensor& g = n.grad;
    bool dead = true;
    for (double v : g.data)
      if (v != 0.0) {
        dead = false;
        break;
      }
    if (dead) continue;
    switch (n.op) {
      case Op::kInput:
      case Op::kParam:
        break;
      case Op::kMatMul: {
        const Tensor& A = nodes_[n.a].val;
        const Tensor& B = nodes_[n.b].val;
        Tensor& ga = nodes_[n.a].grad;
        Tensor& gb = nodes_[n.b].grad;
        std::size_t m = A.rows(), k = A.cols(), c = B.cols();
        // dA = g . B^T ; dB = A^T . g
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < c; ++j) {
            double gv = g.data[i * c + j];
            if (gv == 0.0) continue;
            const double* brow = &B.data[0];
            for (std::size_t p = 0; p < k; ++p) ga.data[i * k + p] += gv * brow[p * c + j];
          }
        for (std::size_t p = 0; p < k; ++p)
          for (std::size_t i = 0; i < m; ++i) {
            double av = A.data[i * k + p];
            if (av == 0.0) continue;
            const double* grow = &g.data[i * c];
            double* brow = &gb.data[p * c];
            for (std::size_t j = 0; j < c; ++j) brow[j] += av * grow[j];
          }
        break;
      }
      case Op::kTranspose: {
        Tensor& ga = nodes_[n.a].grad;
        for (std::size_t i = 0; i < n.val.rows(); ++i)
          for (std::size_t j = 0; j < n.val.cols(); ++j) ga.at(j, i) += g.at(i, j);
        break;
      }
      case Op::kAdd: {
        Tensor& ga = nodes_[n.a].grad;
        Tensor& gb = nodes_[n.b].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data[i] += g.data[i];
          gb.data[i] += g.data[i];
        }
        break;
      }
      case Op::kSub: {
        Tensor& ga = nodes_[n.a].grad;
        Tensor& gb = nodes_[n.b].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data[i] += g.data[i];
          gb.data[i] -= g.data[i];
        }
        break;
      }
      case Op::kMul: {
        const Tensor& A = nodes_[n.a].val;
        const Tensor& B = nodes_[n.b].val;
        Tensor& ga = nodes_[n.a].grad;
        Tensor& gb = nodes_[n.b].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data[i] += g.data[i] * B.data[i];
          gb.data[i] += g.data[i] * A.data[i];
        }
        break;
      }
      case Op::kAddRow: {
        Tensor& ga = nodes_[n.a].grad;
        Tensor& gv = nodes_[n.b].grad;
        std::size_t c = n.val.cols();
        for (std::size_t i = 0; i < n.val.rows(); ++i)
          for (std::size_t j = 0; j < c; ++j) {
            ga.data[i * c + j] += g.data[i * c + j];
            gv.data[j] += g.data[i * c + j];
          }
        break;
      }
      case Op::kScale: {
        Tensor& ga = nodes_[n.a].grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * n.scalar;
        break;
      }
      case Op::kRelu: {
        const Tensor& X = nodes_[n.a].val;
        Tensor& ga = nodes_[n.a].grad;
        for (std::size_t i = 0; i < g.size(); ++i)
          if (X.data[i] > 0.0) ga.data[i] += g.data[i];
        break;
      }
      case Op::kTanh: {
        Tensor& ga = nodes_[n.a].grad;
        for (std::size_t i = 0; i < g.size(); ++i)
          ga.data[i] += g.data[i] * (1.0 - n.val.data[i] * n.val.data[i]);
        break;
      }
      case Op::kSilu: {
        const Tensor& X = nodes_[n.a].val;
        Tensor& ga = nodes_[n.a].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
          double s = 1.0 / (1.0 + std::exp(-X.data[i]));
          ga.data[i] += g.data[i] * (s + X.data[i] * s * (1.0 - s));
        }
        break;
      }
      case Op::kSoftmaxRows: {
        Tensor& ga = nodes_[n.a].grad;
        std::size_t c = n.val.cols();
        for (std::size_t i = 0; i < n.val.rows(); ++i) {
          const double* y = &n.val.data[i * c];
          const double* gr = &g.data[i * c];
          double dotv = 0.0;
          for (std::size_t j = 0; j < c; ++j) dotv += gr[j] * y[j];
          for (std::size_t j = 0; j < c; ++j) ga.data[i * c + j] += y[j] * (gr[j] - dotv);
        }
        break;
      }
      case Op::kLayerNorm: {
        const Tensor& X = nodes_[n.a].val;
        const Tensor& G = nodes_[n.b].val;
        Tensor& gx = nodes_[n.a].grad;
        Tensor& gg = nodes_[n.b].grad;
        Tensor& gb = nodes_[n.c].grad;
        std::size_t c = n.val.cols();
        double inv_n = 1.0 / static_cast<double>(c);
        for (std::size_t i = 0; i < n.val.rows(); ++i) {
          double mean = n.aux[2 * i];
          double inv = n.aux[2 * i + 1];
          const double* xr = &X.data[i * c];
          const double* gr = &g.data[i * c];
          double sum_gy = 0.0, sum_gyx = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            double xhat = (xr[j] - mean) * inv;
            double gy = gr[j] * G.data[j];
            gg.data[j] += gr[j] * xhat;
            gb.data[j] += gr[j];
            sum_gy += gy;
            sum_gyx += gy * xhat;
          }
          for (std::size_t j = 0; j < c; ++j) {
            double xhat = (xr[j] - mean) * inv;
            double gy = gr[j] * G.data[j];
            gx.data[i * c + j] += inv * (gy - inv_n * sum_gy - xhat * inv_n * sum_gyx);
          }
        }
        break;
      }
      case Op::kConcatCols: {
        Tensor& ga = nodes_[n.a].grad;
        Tensor& gb = nodes_[n.b].grad;
        std::size_t ca = ga.cols(), cb = gb.cols();
        for (std::size_t i = 0; i < n.val.rows(); ++i) {
          for (std::size_t j = 0; j < ca; ++j) ga.at(i, j) += g.at(i, j);
          for (std::size_t j = 0; j < cb; ++j) gb.at(i, j) += g.at(i, ca + j);
        }
        break;
      }
      case Op::kConcatRows: {
        Tensor& ga = nodes_[n.a].grad;
        Tensor& gb = nodes_[n.b].grad;
        for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] += g.data[i];
        for (std::size_t i = 0; i < gb.size(); ++i) gb.data[i] += g.data[ga.size() + i];
        break;
      }
      case Op::kSliceCols: {
        Tensor& ga = nodes_[n.a].grad;
        for (std::size_t i = 0; i < n.val.rows(); ++i)
          for (std::size_t j = 0; j < n.val.cols(); ++j) ga.at(i, n.lo + j) += g.at(i, j);
        break;
      }
      case Op::kSliceRows: {
        Tensor& ga = nodes_[n.a].grad;
        std::size_t c = n.val.cols();
        for (std::size_t i = 0; i < n.val.rows(); ++i)
          for (std::size_t j = 0; j < c; ++j) ga.data[(n.lo + i) * c + j] += g.data[i * c + j];
        break;
      }
      case Op::kSumAll: {
        Tensor& ga = nodes_[n.a].grad;
        for (auto& v : ga.data) v += g.data[0];
        break;
      }
      case Op::kMeanAll: {
        Tensor& ga = nodes_[n.a].grad;
        for (auto& v : ga.data) v += g.data[0] * n.scalar;
        break;
      }
      case Op::kSumSq: {
        const Tensor& X = nodes_[n.a].val;
        Tensor& ga = nodes_[n.a].grad;
        for (std::size_t i = 0; i < X.size(); ++i) ga.data[i] += g.data[0] * 2.0 * X.data[i];
        break;
      }
      case Op::kSumAbs: {
        const Tensor& X = nodes_[n.a].val;
        Tensor& ga = nodes_[n.a].grad;
        for (std::size_t i = 0; i < X.size(); ++i) {
          if (X.data[i] > 0.0)
            ga.data[i] += g.data[0];
          else if (X.data[i] < 0.0)
            ga.data[i] -= g.data[0];
        }
        break;
      }
    }
  }
}

}  // namespace porl
