#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "porl/net.h"
#include "porl/rng.h"
#include "porl/tensor.h"

namespace porl {

// Linear-beta noise schedule. Vectors are indexed by step t in [0, T]; index 0
// carries the t=0 conventions (beta 0, alpha 1, alpha_bar 1, sigma 0).
struct NoiseSchedule {
  std::size_t T = 0;
  std::vector<double> beta, alpha, alpha_bar, sigma;
};

NoiseSchedule make_schedule(std::size_t T, double beta_min, double beta_max);

// MLP noise predictor. The network input is the row [x_t | time features |
// condition]; time enters through fixed (untrained) random Fourier features
// of the normalized step t/T.
struct Denoiser {
  NetworkSpec net;
  ParamSet params;     // trainable
  Tensor rff_freqs;    // (1, time_dim/2) frequencies, fixed at construction
  std::size_t data_dim = 0;
  std::size_t cond_dim = 0;
  std::size_t time_dim = 16;

  Tensor time_embedding(double t_norm) const;  // (1, time_dim)
  // Rows [x | embed(t/T) | cond]; cond may be null when cond_dim == 0, else
  // one row per x row or a single broadcast row.
  Tensor assemble(const Tensor& x, std::size_t t, std::size_t T, const Tensor* cond) const;
  Tensor predict(const Tensor& x_t, std::size_t t, const NoiseSchedule& sched,
                 const Tensor* cond = nullptr) const;
};

Denoiser make_denoiser(std::size_t data_dim, std::size_t cond_dim,
                       std::vector<std::size_t> hidden, std::size_t time_dim, SeededRng rng,
                       const std::string& activation = "silu");

// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) e;  t = 0 returns x0.
Tensor noise_data(const Tensor& x0, std::size_t t, const Tensor& e, const NoiseSchedule& sched);

struct LossEval {
  double value = 0.0;
  ParamSet grads;
};

// Loss and parameter gradient for ONE example row: draws t uniform in [1, T]
// and e ~ N(0, I) from `rng` (t first, then e), corrupts the row, and scores
// the prediction with squared error (default) or absolute error (l1). The rng
// is consumed directly so callers control per-example stream identity.
LossEval diffusion_example_grad(const Denoiser& d, const NoiseSchedule& sched,
                                const Tensor& x0_row, SeededRng& rng,
                                const Tensor* cond_row = nullptr, bool l1 = false);

// Batch mean of the per-example squared-error losses; row i draws from
// rng.child(i). grads = mean of per-example grads (summed, then scaled once).
LossEval diffusion_loss(const Denoiser& d, const NoiseSchedule& sched, const Tensor& batch,
                        SeededRng& rng);

// Batch mean of per-example absolute-error losses with one condition row per
// example.
LossEval conditional_loss(const Denoiser& d, const NoiseSchedule& sched, const Tensor& batch,
                          const Tensor& conditions, SeededRng& rng);

// One ancestral-sampling step t -> t-1. The posterior mean uses
// (1-alpha_t)/sqrt(1-alpha_bar_t) by default; paper_literal_mean selects the
// (1-alpha_t)/sqrt(1-beta_t) variant. No noise is added at t = 1.
Tensor sample_step(const Tensor& x_t, std::size_t t, const Denoiser& d,
                   const NoiseSchedule& sched, SeededRng& rng, const Tensor* cond = nullptr,
                   bool paper_literal_mean = false);

// n independent samples, each denoised from a fresh Gaussian over t = T..1.
// Item i consumes only rng.child(i), so results are independent of execution
// order; conditions may have one row (broadcast) or n rows.
Tensor sample(const Denoiser& d, const NoiseSchedule& sched, std::size_t n, SeededRng rng,
              const Tensor* conditions = nullptr, bool paper_literal_mean = false);

}  // namespace porl
