#include "porl/privorl_j.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace porl {

namespace {

// Row widths of the five components [s | a | r | s' | d] of one transition.
std::vector<std::size_t> component_widths(const TrajDenoiserConfig& cfg) {
  return {cfg.state_dim, cfg.action_dim, 1, cfg.state_dim, 1};
}

void init_mlp2(ParamSet& ps, const std::string& prefix, std::size_t in, std::size_t hid,
               std::size_t out, SeededRng rng) {
  init_linear_named(ps, prefix + ".w0", prefix + ".b0", in, hid, rng);
  init_linear_named(ps, prefix + ".w1", prefix + ".b1", hid, out, rng);
}

// Two-layer silu MLP under `prefix`, applied to node x inside g.
int apply_mlp2(Graph& g, const ParamSet& ps, const std::vector<int>& pnodes,
               const std::string& prefix, int x) {
  int h = g.silu(apply_linear(g, ps, pnodes, prefix + ".w0", prefix + ".b0", x));
  return apply_linear(g, ps, pnodes, prefix + ".w1", prefix + ".b1", h);
}

void check_link(const TrajDenoiserConfig& cfg, const Tensor& link, const char* where) {
  if (link.rows() != 1 || link.cols() != cfg.width())
    throw std::invalid_argument(std::string(where) + ": link must be one transition row");
}

// Token matrix (5H+6, k) for an (H, width) fragment node, before positions.
int build_tokens(Graph& g, const TransformerDenoiser& den, const std::vector<int>& pnodes,
                 int frag_node, std::size_t t, const Tensor& link) {
  const TrajDenoiserConfig& cfg = den.cfg;
  const std::vector<std::size_t> widths = component_widths(cfg);
  int seq = apply_mlp2(g, den.params, pnodes, "time",
                       g.input(sinusoid_embedding(t, cfg.time_dim)));
  std::size_t off = 0;
  for (std::size_t j = 0; j < 5; ++j) {
    // Condition token j: the link's component through the shared component
    // embedding, then the condition head that marks it as conditioning.
    Tensor piece(1, widths[j]);
    for (std::size_t c = 0; c < widths[j]; ++c) piece.at(0, c) = link.at(0, off + c);
    int emb = apply_mlp2(g, den.params, pnodes, "comp" + std::to_string(j), g.input(piece));
    seq = g.concat_rows(seq, apply_mlp2(g, den.params, pnodes, "cond", emb));
    off += widths[j];
  }
  off = 0;
  for (std::size_t j = 0; j < 5; ++j) {
    // Content tokens, grouped per component: H rows of component j at once.
    int cols = g.slice_cols(frag_node, off, off + widths[j]);
    seq = g.concat_rows(seq, apply_mlp2(g, den.params, pnodes, "comp" + std::to_string(j), cols));
    off += widths[j];
  }
  return seq;
}

// Attention over a positioned sequence, then per-component decoding of the
// 5H content tokens back into an (H, width) prediction.
int build_denoise(Graph& g, const TransformerDenoiser& den, const std::vector<int>& pnodes,
                  int seq_node, std::size_t H) {
  const TrajDenoiserConfig& cfg = den.cfg;
  int att = apply_attention_stack(g, den.params, pnodes, "attn", seq_node, cfg.layers, cfg.heads);
  int out = -1;
  for (std::size_t j = 0; j < 5; ++j) {
    int block = g.slice_rows(att, 6 + j * H, 6 + (j + 1) * H);
    int dec = apply_mlp2(g, den.params, pnodes, "dec" + std::to_string(j), block);
    out = j == 0 ? dec : g.concat_cols(out, dec);
  }
  return out;
}

Tensor positional_code(std::size_t n, std::size_t dim) {
  Tensor pe(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor row = sinusoid_embedding(i, dim);
    for (std::size_t c = 0; c < dim; ++c) pe.at(i, c) = row.at(0, c);
  }
  return pe;
}

}  // namespace

void TrajDenoiserConfig::validate() const {
  if (state_dim == 0 || action_dim == 0)
    throw std::invalid_argument("trajectory denoiser: state/action dims must be positive");
  if (horizon == 0) throw std::invalid_argument("trajectory denoiser: horizon must be >= 1");
  if (heads == 0 || token_dim == 0 || token_dim % heads != 0)
    throw std::invalid_argument("trajectory denoiser: token_dim must be a multiple of heads");
  if (token_dim % 2 != 0)
    throw std::invalid_argument("trajectory denoiser: token_dim must be even (positional code)");
  if (embed_hidden == 0)
    throw std::invalid_argument("trajectory denoiser: embed_hidden must be positive");
  if (time_dim == 0 || time_dim % 2 != 0)
    throw std::invalid_argument("trajectory denoiser: time_dim must be positive and even");
}

TransformerDenoiser make_traj_denoiser(const TrajDenoiserConfig& cfg, SeededRng rng) {
  cfg.validate();
  TransformerDenoiser den;
  den.cfg = cfg;
  const std::vector<std::size_t> widths = component_widths(cfg);
  init_mlp2(den.params, "time", cfg.time_dim, cfg.embed_hidden, cfg.token_dim, rng.child(0));
  for (std::size_t j = 0; j < 5; ++j)
    init_mlp2(den.params, "comp" + std::to_string(j), widths[j], cfg.embed_hidden, cfg.token_dim,
              rng.child(1 + j));
  init_mlp2(den.params, "cond", cfg.token_dim, cfg.embed_hidden, cfg.token_dim, rng.child(6));
  SeededRng attn_rng = rng.child(7);
  init_attention_stack(den.params, "attn", cfg.token_dim, cfg.layers, cfg.heads, attn_rng);
  for (std::size_t j = 0; j < 5; ++j)
    init_mlp2(den.params, "dec" + std::to_string(j), cfg.token_dim, cfg.embed_hidden, widths[j],
              rng.child(8 + j));
  return den;
}

Tensor sinusoid_embedding(std::size_t pos, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0)
    throw std::invalid_argument("sinusoid embedding: dim must be positive and even");
  Tensor out(1, dim);
  for (std::size_t j = 0; 2 * j < dim; ++j) {
    const double angle = double(pos) / std::pow(10000.0, double(2 * j) / double(dim));
    out.at(0, 2 * j) = std::sin(angle);
    out.at(0, 2 * j + 1) = std::cos(angle);
  }
  return out;
}

Tensor embed_inputs(const TransformerDenoiser& den, const Tensor& noisy_frag, std::size_t t,
                    std::size_t T, const Tensor& link) {
  const TrajDenoiserConfig& cfg = den.cfg;
  if (noisy_frag.rows() == 0 || noisy_frag.cols() != cfg.width())
    throw std::invalid_argument("embed_inputs: fragment width mismatch");
  if (t > T) throw std::invalid_argument("embed_inputs: step outside the schedule");
  check_link(cfg, link, "embed_inputs");
  Graph g;
  const std::vector<int> pnodes = register_params(g, den.params);
  const int tok = build_tokens(g, den, pnodes, g.input(noisy_frag), t, link);
  return g.val(tok);
}

Tensor add_positional(const Tensor& seq) {
  if (seq.rows() == 0 || seq.cols() == 0 || seq.cols() % 2 != 0)
    throw std::invalid_argument("add_positional: token width must be positive and even");
  Tensor out = seq;
  for (std::size_t i = 0; i < seq.rows(); ++i) {
    const Tensor pe = sinusoid_embedding(i, seq.cols());
    for (std::size_t c = 0; c < seq.cols(); ++c) out.at(i, c) += pe.at(0, c);
  }
  return out;
}

Tensor transformer_denoise(const TransformerDenoiser& den, const Tensor& seq) {
  const TrajDenoiserConfig& cfg = den.cfg;
  if (seq.cols() != cfg.token_dim)
    throw std::invalid_argument("transformer_denoise: token width mismatch");
  if (seq.rows() < 11 || (seq.rows() - 6) % 5 != 0)
    throw std::invalid_argument("transformer_denoise: token count is not 5H + 6");
  const std::size_t H = (seq.rows() - 6) / 5;
  Graph g;
  const std::vector<int> pnodes = register_params(g, den.params);
  const int out = build_denoise(g, den, pnodes, g.input(seq), H);
  return g.val(out);
}

Tensor traj_predict(const TransformerDenoiser& den, const Tensor& noisy_frag, std::size_t t,
                    std::size_t T, const Tensor& link) {
  return transformer_denoise(den, add_positional(embed_inputs(den, noisy_frag, t, T, link)));
}

LossEval traj_example_grad(const TransformerDenoiser& den, const NoiseSchedule& sched,
                           const Fragment& frag, SeededRng& rng) {
  const TrajDenoiserConfig& cfg = den.cfg;
  const std::size_t H = frag.steps.rows();
  const std::size_t W = cfg.width();
  if (H == 0 || frag.steps.cols() != W)
    throw std::invalid_argument("traj_example_grad: fragment width mismatch");
  if (frag.valid.size() != H)
    throw std::invalid_argument("traj_example_grad: valid mask does not match the fragment");
  check_link(cfg, frag.link, "traj_example_grad");

  const std::size_t t = rng.uniform_index(sched.T) + 1;
  Tensor e = gaussian(rng, {H, W}, 1.0);
  const Tensor x_t = noise_data(frag.steps, t, e, sched);

  Graph g;
  const std::vector<int> pnodes = register_params(g, den.params);
  const int tok = build_tokens(g, den, pnodes, g.input(x_t), t, frag.link);
  const int pos = g.add(tok, g.input(positional_code(cfg.tokens_for(H), cfg.token_dim)));
  const int pred = build_denoise(g, den, pnodes, pos, H);

  Tensor mask(H, W);
  for (std::size_t h = 0; h < H; ++h)
    if (frag.valid[h])
      for (std::size_t c = 0; c < W; ++c) mask.at(h, c) = 1.0;
  const int loss = g.sum_abs(g.mul(g.sub(pred, g.input(e)), g.input(mask)));
  g.backward(loss);

  LossEval out;
  out.value = g.val(loss).at(0, 0);
  out.grads = collect_grads(g, den.params, pnodes);
  return out;
}

LossEval traj_batch_loss(const TransformerDenoiser& den, const NoiseSchedule& sched,
                         const std::vector<Fragment>& batch, SeededRng& rng) {
  if (batch.empty()) throw std::invalid_argument("trajectory loss: empty batch");
  LossEval acc;
  acc.grads = zeros_like(den.params);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    SeededRng ri = rng.child(i);
    const LossEval ev = traj_example_grad(den, sched, batch[i], ri);
    acc.value += ev.value;
    ps_axpy(acc.grads, 1.0, ev.grads);
  }
  const double inv = 1.0 / double(batch.size());
  acc.value *= inv;
  ps_scale(acc.grads, inv);
  return acc;
}

Tensor sample_fragment(const TransformerDenoiser& den, const NoiseSchedule& sched, std::size_t H,
                       const Tensor& link, SeededRng rng, bool paper_literal_mean) {
  if (H == 0) throw std::invalid_argument("sample_fragment: H must be >= 1");
  check_link(den.cfg, link, "sample_fragment");
  const std::size_t W = den.cfg.width();
  Tensor x = gaussian(rng, {H, W}, 1.0);
  for (std::size_t t = sched.T; t >= 1; --t) {
    const Tensor pred = traj_predict(den, x, t, sched.T, link);
    const double denom = paper_literal_mean ? std::sqrt(1.0 - sched.beta[t])
                                            : std::sqrt(1.0 - sched.alpha_bar[t]);
    const double coeff = (1.0 - sched.alpha[t]) / denom;
    const double inv_sqrt_a = 1.0 / std::sqrt(sched.alpha[t]);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = inv_sqrt_a * (x[i] - coeff * pred[i]);
    if (t > 1) {
      const double s = sched.sigma[t];
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += s * rng.normal();
    }
  }
  return x;
}

void pretrain_j(TransformerDenoiser& den, const NoiseSchedule& sched,
                const std::vector<Fragment>& public_fragments, RndPair& rnd,
                const PipelineConfig& cfg, SeededRng rng) {
  cfg.validate();
  if (public_fragments.empty()) throw std::invalid_argument("pretrain: empty fragment pool");
  const std::size_t W = den.cfg.width();
  const std::size_t H = public_fragments[0].steps.rows();
  for (const Fragment& f : public_fragments)
    if (f.steps.rows() != H || f.steps.cols() != W || f.valid.size() != H)
      throw std::invalid_argument("pretrain: fragments must share one horizon and width");

  const std::size_t n = public_fragments.size();
  const std::size_t B = cfg.batch;
  const std::size_t steps_per_epoch = (n + B - 1) / B;
  const std::size_t swaps = static_cast<std::size_t>(cfg.curiosity_rate * double(B));
  const Tensor zero_link(1, W);

  Adam opt;
  opt.lr = cfg.pretrain_lr;
  for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    for (std::size_t bi = 0; bi < steps_per_epoch; ++bi) {
      SeededRng r = rng.child2(epoch, bi);
      SeededRng pick = r.child(0);
      std::vector<Fragment> batch;
      batch.reserve(B);
      for (std::size_t i = 0; i < B; ++i) batch.push_back(public_fragments[pick.uniform_index(n)]);
      if (swaps > 0) {
        // Fresh unconditioned fragments at the current parameters; novelty is
        // scored on the flattened steps, most novel swapped into the batch.
        SeededRng synth_rng = r.child(1);
        std::vector<Fragment> synth(B);
        Tensor flat(B, H * W);
        for (std::size_t i = 0; i < B; ++i) {
          Tensor s = sample_fragment(den, sched, H, zero_link, synth_rng.child(i));
          for (std::size_t c = 0; c < H * W; ++c) flat.at(i, c) = s[c];
          synth[i].steps = std::move(s);
          synth[i].valid.assign(H, true);
          synth[i].link = zero_link;
        }
        const std::vector<double> scores = curiosity_scores(rnd, flat);
        update_predictor(rnd, flat, cfg.predictor_lr);
        SeededRng place = r.child(2);
        const ReplacePlan plan = plan_replacement(scores, B, cfg.curiosity_rate, place);
        for (std::size_t k = 0; k < plan.synth_rows.size(); ++k)
          batch[plan.positions[k]] = synth[plan.synth_rows[k]];
      }
      SeededRng grad_rng = r.child(3);
      const LossEval le = traj_batch_loss(den, sched, batch, grad_rng);
      opt.step(den.params, le.grads);
    }
  }
}

FinetuneReport finetune_j(TransformerDenoiser& den, const NoiseSchedule& sched,
                          const std::vector<Trajectory>& sensitive, const NormStats& stats,
                          const PipelineConfig& cfg, SeededRng rng) {
  cfg.validate();
  if (sensitive.empty()) throw std::invalid_argument("finetune: empty sensitive set");
  const std::size_t W = den.cfg.width();
  const std::size_t H = den.cfg.horizon;
  // Fragments are fixed across steps; only the per-step noise targets vary.
  std::vector<std::vector<Fragment>> frags(sensitive.size());
  for (std::size_t i = 0; i < sensitive.size(); ++i) {
    if (sensitive[i].width() != W)
      throw std::invalid_argument("finetune: trajectory width does not match the denoiser");
    for (const Fragment& f : fragment(sensitive[i], H, i))
      frags[i].push_back(normalize_fragment(f, stats));
  }

  FinetuneReport report;
  const std::size_t n = sensitive.size();
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
  dcfg.level = ClipLevel::kTrajectory;
  const FragmentGradsFn unit_grads = [&](std::size_t idx, SeededRng& unit_rng) {
    std::vector<ParamSet> out;
    out.reserve(frags[idx].size());
    for (std::size_t f = 0; f < frags[idx].size(); ++f) {
      SeededRng fr = unit_rng.child(f);
      out.push_back(traj_example_grad(den, sched, frags[idx][f], fr).grads);
    }
    return out;
  };
  for (std::size_t s = 0; s < steps; ++s) {
    SeededRng step_rng = rng.child(s);
    const DpStepInfo info = dp_step_trajectory(den.params, n, unit_grads, dcfg, step_rng);
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

SynthesizedTrajectory synthesize_trajectory(const TransformerDenoiser& den,
                                            const NoiseSchedule& sched, const NormStats& stats,
                                            std::size_t H, std::size_t max_len, SeededRng rng,
                                            bool paper_literal_mean) {
  if (H == 0) throw std::invalid_argument("synthesize: H must be >= 1");
  if (max_len < H) throw std::invalid_argument("synthesize: max_len must be >= H");
  const TrajDenoiserConfig& cfg = den.cfg;
  const std::size_t W = cfg.width();
  const std::size_t next_off = cfg.state_dim + cfg.action_dim + 1;
  const std::size_t d_col = W - 1;

  SynthesizedTrajectory out;
  out.traj.state_dim = cfg.state_dim;
  out.traj.action_dim = cfg.action_dim;
  std::vector<Tensor> emitted;  // decoded rows, each (1, W)
  Tensor cond(1, W);            // all-zero condition for the first fragment
  out.conditions.push_back(cond);
  bool terminal = false;
  for (std::size_t f = 0; !terminal && emitted.size() < max_len; ++f) {
    const Tensor frag = sample_fragment(den, sched, H, cond, rng.child(f), paper_literal_mean);
    for (std::size_t h = 0; h < H && !terminal && emitted.size() < max_len; ++h) {
      Tensor row = denormalize_rows(frag.row_slice(h), stats);
      const bool done = row.at(0, d_col) >= 0.5;
      row.at(0, d_col) = done ? 1.0 : 0.0;
      if (done) {
        for (std::size_t c = 0; c < cfg.state_dim; ++c) row.at(0, next_off + c) = 0.0;
        terminal = true;
      }
      emitted.push_back(std::move(row));
    }
    if (!terminal && emitted.size() < max_len) {
      // Next fragment continues from the transition just emitted, seen the
      // same way training links are: in normalized model space.
      cond = normalize_rows(emitted.back(), stats);
      out.conditions.push_back(cond);
    }
  }

  out.traj.steps = Tensor(emitted.size(), W);
  for (std::size_t i = 0; i < emitted.size(); ++i)
    for (std::size_t c = 0; c < W; ++c) out.traj.steps.at(i, c) = emitted[i].at(0, c);
  out.traj.validate();
  return out;
}

Tensor trajectory_rows(const std::vector<Trajectory>& ts) {
  if (ts.empty()) throw std::invalid_argument("trajectory_rows: empty set");
  const std::size_t W = ts[0].width();
  std::size_t total = 0;
  for (const Trajectory& t : ts) {
    if (t.width() != W || t.steps.cols() != W)
      throw std::invalid_argument("trajectory_rows: width mismatch");
    total += t.length();
  }
  Tensor out(total, W);
  std::size_t r = 0;
  for (const Trajectory& t : ts)
    for (std::size_t i = 0; i < t.length(); ++i, ++r)
      for (std::size_t c = 0; c < W; ++c) out.at(r, c) = t.steps.at(i, c);
  return out;
}

Fragment normalize_fragment(const Fragment& f, const NormStats& st) {
  Fragment out = f;
  const Tensor norm = normalize_rows(f.steps, st);
  for (std::size_t h = 0; h < f.steps.rows(); ++h)
    if (f.valid[h])
      for (std::size_t c = 0; c < f.steps.cols(); ++c) out.steps.at(h, c) = norm.at(h, c);
  // The first fragment's link is the all-zero "no predecessor" marker, which
  // must survive normalization unchanged.
  if (f.index > 0) out.link = normalize_rows(f.link, st);
  return out;
}

std::vector<Fragment> fragment_and_normalize(const std::vector<Trajectory>& ts, std::size_t H,
                                             const NormStats& st) {
  std::vector<Fragment> out;
  for (std::size_t i = 0; i < ts.size(); ++i)
    for (const Fragment& f : fragment(ts[i], H, i)) out.push_back(normalize_fragment(f, st));
  return out;
}

}  // namespace porl
