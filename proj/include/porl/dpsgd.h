#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "porl/diffusion.h"
#include "porl/net.h"
#include "porl/rng.h"

namespace porl {

enum class ClipLevel { kTransition, kTrajectory };

struct DpSgdConfig {
  double clip = 1.0;   // per-unit L2 bound C
  double sigma = 0.0;  // noise multiplier (0 = no noise)
  double q = 1.0;      // Poisson sampling ratio
  double lr = 3e-4;
  ClipLevel level = ClipLevel::kTransition;
  void validate() const;
};

struct SampledBatch {
  std::vector<std::size_t> indices;  // ascending, no duplicates
};

// min(1, C / ||g||_2) * g over the flattened parameters. Gradients already
// within the bound are returned unchanged (bit-identical).
ParamSet clip_to_norm(const ParamSet& g, double C);

// Each index enters independently with probability q.
SampledBatch poisson_sample(std::size_t n, double q, SeededRng& rng);

// Diagnostics from one private step.
struct DpStepInfo {
  bool skipped = false;                 // empty Poisson batch: no update made
  std::size_t batch_size = 0;
  std::vector<double> unit_norms;       // post-clip norm of each unit's contribution
  std::vector<double> clipped_sum;      // pre-noise sum of clipped gradients (flat)
};

// Gradient of one unit's loss at the current parameters. The rng passed in is
// derived from the step seed and the unit's DATASET index, so a unit's draws
// are stable across neighboring datasets that agree on that index.
using UnitGradFn = std::function<ParamSet(std::size_t index, SeededRng& rng)>;

// One generic DP-SGD step over n_units units:
//   batch ~ Poisson(q); for i in batch: g_i = clip(unit_grad(i), C);
//   params -= lr/max(1,|batch|) * (sum_i g_i + C * sigma * N(0, I)).
// Stream layout: step_rng.child(0) drives sampling, step_rng.child2(1, index)
// the unit losses, step_rng.child(2) the single noise draw.
DpStepInfo dp_step(ParamSet& params, std::size_t n_units, const UnitGradFn& unit_grad,
                   const DpSgdConfig& cfg, SeededRng& step_rng);

// Transition-level step: units are dataset rows, loss is the (unconditional)
// denoising objective on that row.
DpStepInfo dp_step_transition(Denoiser& model, const NoiseSchedule& sched, const Tensor& dataset,
                              const DpSgdConfig& cfg, SeededRng& step_rng);

// All fragment gradients of one trajectory, evaluated at current params.
using FragmentGradsFn =
    std::function<std::vector<ParamSet>(std::size_t traj_index, SeededRng& rng)>;

// Trajectory-level step: a unit is a whole trajectory; its contribution is the
// MEAN gradient over its fragments, clipped once, so the per-trajectory
// sensitivity is C regardless of trajectory length.
DpStepInfo dp_step_trajectory(ParamSet& params, std::size_t n_trajectories,
                              const FragmentGradsFn& fragment_grads, const DpSgdConfig& cfg,
                              SeededRng& step_rng);

}  // namespace porl
