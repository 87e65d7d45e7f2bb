#pragma once

#include <cstddef>
#include <vector>

#include "porl/dataset.h"
#include "porl/diffusion.h"
#include "porl/net.h"
#include "porl/privorl_n.h"
#include "porl/rng.h"
#include "porl/trajectory.h"

namespace porl {

// Transformer noise predictor over trajectory fragments. A fragment row
// [s | a | r | s' | d] is split into its five components; each component of
// each step becomes one token, alongside one time token and five condition
// tokens from the link transition, 5*H + 6 tokens in total:
//   [time | cond s,a,r,s',d | s_0..s_{H-1} | a_0.. | r_0.. | s'_0.. | d_0..]
// The H is not baked into the weights (all token MLPs are shared), so one
// model serves any horizon; cfg.horizon is the training default.
struct TrajDenoiserConfig {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::size_t horizon = 16;      // fragment length H
  std::size_t token_dim = 32;    // embedding width k
  std::size_t layers = 3;        // attention blocks
  std::size_t heads = 4;
  std::size_t embed_hidden = 32;  // hidden width of the small MLPs
  std::size_t time_dim = 16;      // sinusoidal time-feature width (even)

  std::size_t width() const { return 2 * state_dim + action_dim + 2; }
  std::size_t tokens_for(std::size_t H) const { return 5 * H + 6; }
  void validate() const;
};

struct TransformerDenoiser {
  TrajDenoiserConfig cfg;
  ParamSet params;  // embedding MLPs, condition/time MLPs, attention, decoders
};

TransformerDenoiser make_traj_denoiser(const TrajDenoiserConfig& cfg, SeededRng rng);

// Fixed sinusoidal code: dim 2j holds sin(pos / 10000^(2j/dim)), dim 2j+1 the
// matching cosine. Shared by the positional code and the time features.
Tensor sinusoid_embedding(std::size_t pos, std::size_t dim);

// Token sequence (5H+6, k) for a noisy fragment at diffusion step t of T,
// conditioned on the link transition (1, width). No positions yet.
Tensor embed_inputs(const TransformerDenoiser& den, const Tensor& noisy_frag, std::size_t t,
                    std::size_t T, const Tensor& link);

// Adds the positional code for row index i to token i.
Tensor add_positional(const Tensor& seq);

// Runs the attention stack over a positioned token sequence and decodes the
// component-token outputs into a fragment-shaped (H, width) noise prediction.
Tensor transformer_denoise(const TransformerDenoiser& den, const Tensor& seq);

// Convenience end-to-end forward: embed -> positions -> denoise.
Tensor traj_predict(const TransformerDenoiser& den, const Tensor& noisy_frag, std::size_t t,
                    std::size_t T, const Tensor& link);

// Loss and parameter gradient for one fragment: t and the noise target are
// drawn from `rng` (t first), the loss is the absolute error of the noise
// prediction restricted to the fragment's valid rows, conditioned on its
// link.
LossEval traj_example_grad(const TransformerDenoiser& den, const NoiseSchedule& sched,
                           const Fragment& frag, SeededRng& rng);

// Mean loss/grads over a fragment batch; fragment i draws from rng.child(i).
LossEval traj_batch_loss(const TransformerDenoiser& den, const NoiseSchedule& sched,
                         const std::vector<Fragment>& batch, SeededRng& rng);

// Ancestral sampling of one (H, width) fragment under a link condition.
Tensor sample_fragment(const TransformerDenoiser& den, const NoiseSchedule& sched,
                       std::size_t H, const Tensor& link, SeededRng rng,
                       bool paper_literal_mean = false);

// Pre-training on public fragments, mirroring the transition pipeline: per
// batch, synthesize fresh fragments (zero link), score them on the flattened
// steps, update the novelty predictor, swap in the most novel, then one Adam
// step on the masked conditional loss.
void pretrain_j(TransformerDenoiser& den, const NoiseSchedule& sched,
                const std::vector<Fragment>& public_fragments, RndPair& rnd,
                const PipelineConfig& cfg, SeededRng rng);

// Private fine-tuning where one unit is a whole trajectory: its gradient is
// the mean over its fragments, clipped once. q = batch / #trajectories.
FinetuneReport finetune_j(TransformerDenoiser& den, const NoiseSchedule& sched,
                          const std::vector<Trajectory>& sensitive, const NormStats& stats,
                          const PipelineConfig& cfg, SeededRng rng);

// One synthesized trajectory in data space plus the model-space conditions
// used for each fragment (conditions[0] is all zeros).
struct SynthesizedTrajectory {
  Trajectory traj;
  std::vector<Tensor> conditions;
};

// Chains fragments: the first is sampled under a zero condition, each next
// under the normalized image of the previously emitted transition. Every
// generated row is decoded to data space (denormalize, threshold d at 0.5,
// zero the next state on terminal); generation stops at the first terminal
// or when max_len rows have been emitted.
SynthesizedTrajectory synthesize_trajectory(const TransformerDenoiser& den,
                                            const NoiseSchedule& sched, const NormStats& stats,
                                            std::size_t H, std::size_t max_len, SeededRng rng,
                                            bool paper_literal_mean = false);

// Shared helpers for trajectory datasets. Normalization happens per fragment
// AFTER splitting (trajectory invariants hold only in data space): real rows
// and non-zero links are standardized, padding rows and the first fragment's
// zero link stay exactly zero.
Tensor trajectory_rows(const std::vector<Trajectory>& ts);  // all rows stacked
Fragment normalize_fragment(const Fragment& f, const NormStats& st);
// fragment() + normalize_fragment over a whole set; parent ids = position.
std::vector<Fragment> fragment_and_normalize(const std::vector<Trajectory>& ts, std::size_t H,
                                             const NormStats& st);

}  // namespace porl
