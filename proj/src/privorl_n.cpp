#include "porl/privorl_n.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace porl {

void PipelineConfig::validate() const {
  if (batch == 0) throw std::invalid_argument("pipeline: batch must be >= 1");
  if (curiosity_rate < 0.0 || curiosity_rate > 1.0)
    throw std::invalid_argument("pipeline: curiosity rate outside [0, 1]");
  if (epsilon <= 0.0) throw std::invalid_argument("pipeline: epsilon must be positive");
  if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("pipeline: delta outside (0, 1)");
  if (clip <= 0.0) throw std::invalid_argument("pipeline: clip must be positive");
  if (pretrain_lr < 0.0 || dp_lr < 0.0 || predictor_lr < 0.0)
    throw std::invalid_argument("pipeline: learning rates must be non-negative");
}

std::size_t model_width(const TransitionDataset& schema) {
  return encoded_width(schema.discrete, schema.width());
}

EncodedView encode_and_normalize(const TransitionDataset& ds, const NormStats* shared) {
  ds.validate();
  EncodedView out;
  Tensor enc = one_hot_encode(ds.rows, ds.discrete, ds.width());
  out.stats = shared ? *shared : compute_stats(enc);
  out.rows = normalize_rows(enc, out.stats);
  return out;
}

void pretrain(Denoiser& den, const NoiseSchedule& sched, const TransitionDataset& public_set,
              const NormStats& stats, RndPair& rnd, const PipelineConfig& cfg, SeededRng rng) {
  cfg.validate();
  if (public_set.count() == 0) throw std::invalid_argument("pretrain: empty public set");
  const EncodedView view = encode_and_normalize(public_set, &stats);
  if (den.data_dim != view.rows.cols())
    throw std::invalid_argument("pretrain: denoiser width does not match the encoded data");

  const std::size_t n = view.rows.rows();
  const std::size_t B = cfg.batch;
  const std::size_t steps_per_epoch = (n + B - 1) / B;
  const std::size_t swaps = static_cast<std::size_t>(cfg.curiosity_rate * double(B));

  Adam opt;
  opt.lr = cfg.pretrain_lr;
  for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    for (std::size_t bi = 0; bi < steps_per_epoch; ++bi) {
      SeededRng r = rng.child2(epoch, bi);
      SeededRng pick = r.child(0);
      Tensor batch(B, view.rows.cols());
      for (std::size_t i = 0; i < B; ++i) {
        const std::size_t row = pick.uniform_index(n);
        for (std::size_t c = 0; c < view.rows.cols(); ++c) batch.at(i, c) = view.rows.at(row, c);
      }
      if (swaps > 0) {
        // Fresh synthetic rows at the current parameters, scored before the
        // predictor sees them, most novel swapped into the batch.
        const Tensor synth = sample(den, sched, B, r.child(1));
        const std::vector<double> scores = curiosity_scores(rnd, synth);
        update_predictor(rnd, synth, cfg.predictor_lr);
        SeededRng place = r.child(2);
        batch = curious_replace(batch, synth, scores, cfg.curiosity_rate, place);
      }
      SeededRng grad_rng = r.child(3);
      const LossEval le = diffusion_loss(den, sched, batch, grad_rng);
      opt.step(den.params, le.grads);
    }
  }
}

FinetuneReport finetune(Denoiser& den, const NoiseSchedule& sched,
                        const TransitionDataset& sensitive, const NormStats& stats,
                        const PipelineConfig& cfg, SeededRng rng) {
  cfg.validate();
  if (sensitive.count() == 0) throw std::invalid_argument("finetune: empty sensitive set");
  const EncodedView view = encode_and_normalize(sensitive, &stats);
  if (den.data_dim != view.rows.cols())
    throw std::invalid_argument("finetune: denoiser width does not match the encoded data");

  FinetuneReport report;
  const std::size_t n = view.rows.rows();
  const double q = std::min(1.0, double(cfg.batch) / double(n));
  const std::size_t steps =
      static_cast<std::size_t>(std::llround(double(cfg.finetune_epochs) / q));
  double sigma;
  if (cfg.sigma_override >= 0.0) {
    sigma = cfg.sigma_override;
  } else if (std::isinf(cfg.epsilon)) {
    sigma = 0.0;  // explicit no-privacy mode
  } else {
    sigma = calibrate_sigma(q, steps, cfg.epsilon, cfg.delta);
  }
  report.sgm = SgmParams{q, sigma, static_cast<std::int64_t>(steps)};

  DpSgdConfig dcfg;
  dcfg.clip = cfg.clip;
  dcfg.sigma = sigma;
  dcfg.q = q;
  dcfg.lr = cfg.dp_lr;
  dcfg.level = ClipLevel::kTransition;
  for (std::size_t s = 0; s < steps; ++s) {
    SeededRng step_rng = rng.child(s);
    const DpStepInfo info = dp_step_transition(den, sched, view.rows, dcfg, step_rng);
    if (info.skipped) ++report.skipped_steps;
  }

  if (sigma > 0.0 && steps > 0) {
    const RdpCurve curve = compose(sgm_curve(q, sigma, dense_orders()), steps);
    report.achieved = to_dp(curve, cfg.delta);
  } else {
    report.achieved.epsilon = steps == 0 ? 0.0 : std::numeric_limits<double>::infinity();
    report.achieved.delta = cfg.delta;
    report.achieved.order = 0.0;
  }
  return report;
}

TransitionDataset synthesize_transitions(const Denoiser& den, const NoiseSchedule& sched,
                                         const NormStats& stats, const TransitionDataset& schema,
                                         std::size_t n, SeededRng rng) {
  schema.validate();
  if (den.data_dim != model_width(schema))
    throw std::invalid_argument("synthesize: denoiser width does not match the schema");
  Tensor x = sample(den, sched, n, std::move(rng));
  x = denormalize_rows(x, stats);
  TransitionDataset out;
  out.state_dim = schema.state_dim;
  out.action_dim = schema.action_dim;
  out.has_terminal = schema.has_terminal;
  out.discrete = schema.discrete;
  out.rows = argmax_decode(x, schema.discrete, schema.width());
  out.validate();
  return out;
}

}  // namespace porl
