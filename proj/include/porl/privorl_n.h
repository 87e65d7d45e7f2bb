#pragma once

#include <cstddef>
#include <cstdint>

#include "porl/accountant.h"
#include "porl/curiosity.h"
#include "porl/dataset.h"
#include "porl/diffusion.h"
#include "porl/dpsgd.h"
#include "porl/rng.h"

namespace porl {

// Knobs shared by the transition- and trajectory-level pipelines:
// curiosity-driven pre-training on public data, privately fine-tuning on
// sensitive data, then sampling a synthetic dataset.
struct PipelineConfig {
  std::size_t pretrain_epochs = 10;
  std::size_t finetune_epochs = 5;
  double curiosity_rate = 0.3;  // fraction of each batch replaced by novel samples
  std::size_t batch = 128;
  double epsilon = 10.0;  // privacy target; +inf disables noise
  double delta = 1e-6;
  std::uint64_t seed = 0;

  double clip = 1.0;           // per-unit gradient bound in the private phase
  double pretrain_lr = 1e-3;   // Adam, non-private phase
  double dp_lr = 3e-4;         // SGD step size inside the private update
  double predictor_lr = 1e-3;  // novelty-predictor updates during pre-training
  double sigma_override = -1.0;  // >= 0 bypasses calibration (diagnostics)
  // Default: normalization stats come from the public set. Computing them on
  // the sensitive set leaks two moments per column and is opt-in.
  bool stats_from_sensitive = false;

  void validate() const;
};

// Training-space view of a dataset: one-hot encoded, then standardized.
struct EncodedView {
  Tensor rows;
  NormStats stats;  // per encoded column
};

// Encodes discrete columns and standardizes; pass `shared` to reuse stats
// computed elsewhere (the usual public-set convention).
EncodedView encode_and_normalize(const TransitionDataset& ds, const NormStats* shared = nullptr);

// Width of the model space for a dataset schema.
std::size_t model_width(const TransitionDataset& schema);

// Pre-training loop: per batch, sample real rows, synthesize as many fresh
// rows, score their novelty, update the novelty predictor, swap the most
// novel synthetic rows into the batch, and take one denoising-loss Adam step.
// curiosity_rate = 0 is exactly plain diffusion pre-training.
void pretrain(Denoiser& den, const NoiseSchedule& sched, const TransitionDataset& public_set,
              const NormStats& stats, RndPair& rnd, const PipelineConfig& cfg, SeededRng rng);

struct FinetuneReport {
  SgmParams sgm;           // q, sigma and the number of executed private steps
  PrivacyParams achieved;  // accountant's final guarantee (never above target)
  std::size_t skipped_steps = 0;  // empty Poisson batches
};

// Private fine-tuning with per-transition clipping. sigma comes from the
// accountant (q = batch/N, steps = round(epochs/q)) unless overridden.
FinetuneReport finetune(Denoiser& den, const NoiseSchedule& sched,
                        const TransitionDataset& sensitive, const NormStats& stats,
                        const PipelineConfig& cfg, SeededRng rng);

// Samples n rows, maps them back to data space (denormalize + argmax on
// discrete blocks), and returns them under the schema of `schema`.
TransitionDataset synthesize_transitions(const Denoiser& den, const NoiseSchedule& sched,
                                         const NormStats& stats, const TransitionDataset& schema,
                                         std::size_t n, SeededRng rng);

}  // namespace porl
