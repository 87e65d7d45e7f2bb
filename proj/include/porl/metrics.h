#pragma once

#include <cstddef>
#include <vector>

#include "porl/rng.h"
#include "porl/tensor.h"
#include "porl/trajectory.h"

namespace porl {

// Exact two-sample Kolmogorov-Smirnov distance (sup ECDF difference).
double ks_distance(std::vector<double> a, std::vector<double> b);

// 1 - mean per-column KS distance; 1.0 means identical marginals.
double marginal_fidelity(const Tensor& real, const Tensor& synth);

// Pearson correlation; either input constant (or empty) gives 0.
double pearson(const std::vector<double>& x, const std::vector<double>& y);
// Spearman = Pearson on average ranks.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

// 1 - mean over column pairs of |rho_real - rho_synth| / 2. rank_mode switches
// the correlation from Pearson to Spearman.
double correlation_fidelity(const Tensor& real, const Tensor& synth, bool rank_mode = false);

struct FidelityReport {
  double marginal = 0.0;
  double correlation = 0.0;
  bool has_trajscore = false;
  double trajscore = 0.0;
};

struct TrajScoreConfig {
  std::size_t max_len = 32;    // trajectories padded/truncated to this many steps
  std::size_t embed_dim = 16;
  std::size_t hidden = 64;
  std::size_t epochs = 200;
  double lr = 1e-3;
};

// Trains an MLP autoencoder on the flattened real trajectories, embeds both
// sets with its encoder, and returns the mean over synthetic trajectories of
// the maximum cosine similarity to any real embedding.
double trajscore(const std::vector<Trajectory>& real, const std::vector<Trajectory>& synth,
                 const TrajScoreConfig& cfg, SeededRng rng);

struct MiaReport {
  std::vector<double> fpr_levels;
  std::vector<double> tpr;
};

// Loss-threshold membership inference: predict "member" when the loss is at
// most the threshold. For each requested false-positive rate the achievable
// ROC staircase is linearly interpolated between operating points.
MiaReport mia_tpr_at_fpr(const std::vector<double>& member_losses,
                         const std::vector<double>& non_member_losses,
                         const std::vector<double>& fpr_levels);

}  // namespace porl
