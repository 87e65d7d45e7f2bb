#include "porl/dpsgd.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace porl {

void DpSgdConfig::validate() const {
  if (!(clip > 0.0)) throw std::invalid_argument("clip norm must be positive");
  if (sigma < 0.0) throw std::invalid_argument("noise multiplier must be non-negative");
  if (!(q > 0.0) || q > 1.0) throw std::invalid_argument("sampling ratio must be in (0, 1]");
  if (lr < 0.0) throw std::invalid_argument("learning rate must be non-negative");
}

ParamSet clip_to_norm(const ParamSet& g, double C) {
  if (!(C > 0.0)) throw std::invalid_argument("clip norm must be positive");
  double norm = ps_norm(g);
  if (norm <= C) return g;
  ParamSet out = g;
  ps_scale(out, C / norm);
  return out;
}

SampledBatch poisson_sample(std::size_t n, double q, SeededRng& rng) {
  if (!(q > 0.0) || q > 1.0) throw std::invalid_argument("sampling ratio must be in (0, 1]");
  SampledBatch b;
  for (std::size_t i = 0; i < n; ++i)
    if (rng.uniform() < q) b.indices.push_back(i);
  return b;
}

DpStepInfo dp_step(ParamSet& params, std::size_t n_units, const UnitGradFn& unit_grad,
                   const DpSgdConfig& cfg, SeededRng& step_rng) {
  cfg.validate();
  if (n_units == 0) throw std::invalid_argument("dp step: empty training set");

  SeededRng sample_rng = step_rng.child(0);
  SampledBatch batch = poisson_sample(n_units, cfg.q, sample_rng);
  DpStepInfo info;
  info.batch_size = batch.indices.size();
  if (batch.indices.empty()) {
    info.skipped = true;  // the step still counts toward the privacy budget
    return info;
  }

  ParamSet sum = zeros_like(params);
  for (std::size_t idx : batch.indices) {
    SeededRng unit_rng = step_rng.child2(1, idx);
    ParamSet clipped = clip_to_norm(unit_grad(idx, unit_rng), cfg.clip);
    info.unit_norms.push_back(ps_norm(clipped));
    ps_axpy(sum, 1.0, clipped);
  }
  info.clipped_sum = sum.flatten();

  if (cfg.sigma > 0.0) {
    SeededRng noise_rng = step_rng.child(2);
    ps_add_gaussian(sum, noise_rng, cfg.clip * cfg.sigma);
  }
  double scale = -cfg.lr / std::max<double>(1.0, double(info.batch_size));
  ps_axpy(params, scale, sum);
  return info;
}

DpStepInfo dp_step_transition(Denoiser& model, const NoiseSchedule& sched, const Tensor& dataset,
                              const DpSgdConfig& cfg, SeededRng& step_rng) {
  UnitGradFn fn = [&](std::size_t index, SeededRng& rng) {
    return diffusion_example_grad(model, sched, dataset.row_slice(index), rng).grads;
  };
  return dp_step(model.params, dataset.rows(), fn, cfg, step_rng);
}

DpStepInfo dp_step_trajectory(ParamSet& params, std::size_t n_trajectories,
                              const FragmentGradsFn& fragment_grads, const DpSgdConfig& cfg,
                              SeededRng& step_rng) {
  UnitGradFn fn = [&](std::size_t index, SeededRng& rng) {
    std::vector<ParamSet> frags = fragment_grads(index, rng);
    if (frags.empty()) throw std::invalid_argument("dp step: trajectory with zero fragments");
    ParamSet mean = zeros_like(params);
    for (const ParamSet& g : frags) ps_axpy(mean, 1.0, g);
    ps_scale(mean, 1.0 / double(frags.size()));
    return mean;
  };
  return dp_step(params, n_trajectories, fn, cfg, step_rng);
}

}  // namespace porl
