#include "porl/dataset.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace porl {

void TransitionDataset::validate() const {
  if (state_dim == 0 || action_dim == 0)
    throw std::invalid_argument("dataset: state and action dims must be positive");
  if (rows.size() != 0 && rows.cols() != width())
    throw std::invalid_argument("dataset: row width does not match dims");
  if (!rows.all_finite()) throw std::invalid_argument("dataset: non-finite values");
  for (const auto& dc : discrete) {
    if (dc.cardinality < 2) throw std::invalid_argument("dataset: discrete cardinality < 2");
    if (dc.column >= width()) throw std::invalid_argument("dataset: discrete column out of range");
    for (std::size_t r = 0; r < rows.rows(); ++r) {
      double v = rows.at(r, dc.column);
      if (v != std::floor(v) || v < 0 || v >= double(dc.cardinality))
        throw std::invalid_argument("dataset: invalid category index");
    }
  }
}

NormStats compute_stats(const Tensor& rows) {
  if (rows.rows() < 2) throw std::invalid_argument("stats need at least two rows");
  const double kFloor = 1e-8;
  std::size_t n = rows.rows(), w = rows.cols();
  NormStats st;
  st.mean.assign(w, 0.0);
  st.stdev.assign(w, 0.0);
  st.constant.assign(w, false);
  for (std::size_t c = 0; c < w; ++c) {
    double m = 0;
    for (std::size_t r = 0; r < n; ++r) m += rows.at(r, c);
    m /= double(n);
    double v = 0;
    for (std::size_t r = 0; r < n; ++r) {
      double d = rows.at(r, c) - m;
      v += d * d;
    }
    v /= double(n);  // population convention
    double s = std::sqrt(v);
    st.mean[c] = m;
    if (s < kFloor) {
      st.stdev[c] = kFloor;
      st.constant[c] = true;
    } else {
      st.stdev[c] = s;
    }
  }
  return st;
}

Tensor normalize_rows(const Tensor& rows, const NormStats& st) {
  if (rows.cols() != st.mean.size()) throw std::invalid_argument("normalize: stats width mismatch");
  Tensor out = rows;
  for (std::size_t r = 0; r < rows.rows(); ++r)
    for (std::size_t c = 0; c < rows.cols(); ++c)
      out.at(r, c) = (rows.at(r, c) - st.mean[c]) / st.stdev[c];
  return out;
}

Tensor denormalize_rows(const Tensor& rows, const NormStats& st) {
  if (rows.cols() != st.mean.size())
    throw std::invalid_argument("denormalize: stats width mismatch");
  Tensor out = rows;
  for (std::size_t r = 0; r < rows.rows(); ++r)
    for (std::size_t c = 0; c < rows.cols(); ++c)
      out.at(r, c) = rows.at(r, c) * st.stdev[c] + st.mean[c];
  return out;
}

NormStats normalize(TransitionDataset& ds) {
  NormStats st = compute_stats(ds.rows);
  ds.rows = normalize_rows(ds.rows, st);
  return st;
}

void denormalize(TransitionDataset& ds, const NormStats& st) {
  ds.rows = denormalize_rows(ds.rows, st);
}

namespace {

std::vector<const DiscreteColumn*> by_column(const std::vector<DiscreteColumn>& discrete,
                                             std::size_t width) {
  std::vector<const DiscreteColumn*> map(width, nullptr);
  for (const auto& dc : discrete) {
    if (dc.cardinality < 2) throw std::invalid_argument("encode: discrete cardinality < 2");
    if (dc.column >= width) throw std::invalid_argument("encode: discrete column out of range");
    if (map[dc.column]) throw std::invalid_argument("encode: duplicate discrete column");
    map[dc.column] = &dc;
  }
  return map;
}

}  // namespace

std::size_t encoded_width(const std::vector<DiscreteColumn>& discrete, std::size_t width) {
  std::size_t w = width;
  for (const auto& dc : discrete) w += dc.cardinality - 1;
  (void)by_column(discrete, width);  // validation
  return w;
}

Tensor one_hot_encode(const Tensor& rows, const std::vector<DiscreteColumn>& discrete,
                      std::size_t width) {
  if (rows.size() != 0 && rows.cols() != width)
    throw std::invalid_argument("encode: row width mismatch");
  auto map = by_column(discrete, width);
  Tensor out(rows.rows(), encoded_width(discrete, width));
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    std::size_t o = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (map[c]) {
        double v = rows.at(r, c);
        if (v != std::floor(v) || v < 0 || v >= double(map[c]->cardinality))
          throw std::invalid_argument("encode: invalid category index");
        out.at(r, o + std::size_t(v)) = 1.0;
        o += map[c]->cardinality;
      } else {
        out.at(r, o++) = rows.at(r, c);
      }
    }
  }
  return out;
}

Tensor argmax_decode(const Tensor& rows, const std::vector<DiscreteColumn>& discrete,
                     std::size_t width) {
  auto map = by_column(discrete, width);
  std::size_t enc_w = encoded_width(discrete, width);
  if (rows.size() != 0 && rows.cols() != enc_w)
    throw std::invalid_argument("decode: encoded width mismatch");
  Tensor out(rows.rows(), width);
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    std::size_t o = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (map[c]) {
        std::size_t best = 0;
        double best_v = rows.at(r, o);
        for (std::size_t k = 1; k < map[c]->cardinality; ++k)
          if (rows.at(r, o + k) > best_v) {
            best_v = rows.at(r, o + k);
            best = k;
          }
        out.at(r, c) = double(best);
        o += map[c]->cardinality;
      } else {
        out.at(r, c) = rows.at(r, o++);
      }
    }
  }
  return out;
}

}  // namespace porl
