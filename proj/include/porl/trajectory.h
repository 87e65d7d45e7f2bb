#pragma once

#include <cstddef>
#include <vector>

#include "porl/tensor.h"

namespace porl {

// Ordered transitions of one episode. Each row is [s | a | r | s' | d] with
// widths (state_dim, action_dim, 1, state_dim, 1). A terminal step (d = 1)
// has a zero next state and can only be the last row.
struct Trajectory {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  Tensor steps;

  std::size_t length() const { return steps.rows(); }
  std::size_t width() const { return 2 * state_dim + action_dim + 2; }
  void validate() const;
};

// H consecutive transitions of a trajectory, zero-padded at the tail. The
// link transition is the step immediately before the fragment (all zeros for
// the first fragment); it conditions the denoiser so fragments can be
// stitched back together.
struct Fragment {
  Tensor steps;             // H x width, zero-padded
  std::vector<bool> valid;  // H flags; padding rows are false
  Tensor link;              // 1 x width
  std::size_t index = 0;    // position within the parent trajectory
  std::size_t parent = 0;   // trajectory id

  std::size_t real_length() const;
};

// Splits into ceil(length / H) fragments. Throws on an empty trajectory or
// H = 0.
std::vector<Fragment> fragment(const Trajectory& traj, std::size_t H, std::size_t parent_id = 0);

// Concatenates the real (unpadded) rows of consecutive fragments back into a
// trajectory.
Trajectory stitch(const std::vector<Fragment>& fragments, std::size_t state_dim,
                  std::size_t action_dim);

}  // namespace porl
