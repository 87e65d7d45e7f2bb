#pragma once

#include <cstddef>
#include <vector>

#include "porl/tensor.h"

namespace porl {

// A column holding category indices 0..cardinality-1 before encoding.
struct DiscreteColumn {
  std::size_t column = 0;
  std::size_t cardinality = 0;
};

// Flat transition table. Row layout: [s | a | r | s' | d?] with widths
// (state_dim, action_dim, 1, state_dim, 0 or 1).
struct TransitionDataset {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  bool has_terminal = true;
  Tensor rows;
  std::vector<DiscreteColumn> discrete;

  std::size_t count() const { return rows.rows(); }
  std::size_t width() const {
    return 2 * state_dim + action_dim + 1 + (has_terminal ? 1 : 0);
  }
  std::size_t state_off() const { return 0; }
  std::size_t action_off() const { return state_dim; }
  std::size_t reward_off() const { return state_dim + action_dim; }
  std::size_t next_state_off() const { return state_dim + action_dim + 1; }
  std::size_t terminal_off() const { return 2 * state_dim + action_dim + 1; }
  void validate() const;  // shape consistency + discrete category ranges
};

// Per-column standardization statistics (population convention: divide by N).
// Columns whose std hit the floor are flagged as constant.
struct NormStats {
  std::vector<double> mean, stdev;
  std::vector<bool> constant;
};

NormStats compute_stats(const Tensor& rows);              // needs >= 2 rows
Tensor normalize_rows(const Tensor& rows, const NormStats& st);
Tensor denormalize_rows(const Tensor& rows, const NormStats& st);

// Convenience pair for whole datasets (stats over every column).
NormStats normalize(TransitionDataset& ds);
void denormalize(TransitionDataset& ds, const NormStats& st);

// Each discrete column of cardinality m becomes m indicator columns, in
// place in the row layout; continuous columns pass through.
Tensor one_hot_encode(const Tensor& rows, const std::vector<DiscreteColumn>& discrete,
                      std::size_t width);
// Inverse: each indicator block collapses to the index of its maximum.
Tensor argmax_decode(const Tensor& rows, const std::vector<DiscreteColumn>& discrete,
                     std::size_t width);
// Width of a row after encoding.
std::size_t encoded_width(const std::vector<DiscreteColumn>& discrete, std::size_t width);

}  // namespace porl
