#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "porl/env.h"
#include "porl/io.h"
#include "porl/metrics.h"
#include "porl/privorl_j.h"
#include "porl/privorl_n.h"

namespace porl {

// ---------------------------------------------------------------------------
// A full run: pretrain on public data, privately finetune on sensitive data,
// synthesize a dataset, evaluate it. Everything is driven by a flat config
// map plus a seed, so a (config, seed) pair pins every output byte.
// ---------------------------------------------------------------------------

struct EvalConfig {
  std::size_t episodes = 50;       // environment rollouts per policy evaluation
  std::size_t ref_episodes = 200;  // rollouts behind the random/expert anchors
  BcConfig bc;                     // behavioural-cloning probe settings
};

struct RunConfig {
  std::string mode = "transition";  // "transition" | "trajectory"
  PipelineConfig pipe;
  std::uint64_t seed = 0;

  // Diffusion schedule.
  std::size_t T = 50;
  double beta_min = 1e-4;
  double beta_max = 0.2;

  // Transition-level model.
  std::vector<std::size_t> hidden{64, 64};
  std::size_t time_dim = 16;

  // Trajectory-level model.
  std::size_t horizon = 16;
  std::size_t token_dim = 32;
  std::size_t layers = 3;
  std::size_t heads = 4;
  std::size_t embed_hidden = 32;
  std::size_t traj_time_dim = 16;
  std::size_t max_len = 0;  // episode cap during synthesis; 0 -> 4 * horizon

  std::size_t synth_count = 0;  // 0 -> match the training-set size
  bool paper_literal_mean = false;

  // Novelty-predictor pair.
  std::size_t rnd_out = 8;
  std::size_t rnd_width = 16;

  std::optional<GridWorldSpec> env;  // enables return-based evaluation
  EvalConfig eval;

  void validate() const;
};

// Builds a RunConfig from flat keys ("mode", "epochs", "epsilon", "env.width",
// ...). Unknown keys are rejected so typos fail loudly.
RunConfig config_from_map(const ConfigMap& cfg);

// ---------------------------------------------------------------------------
// Checkpoint packing. The arch map carries the model kind, its shape, the
// data schema, and the training-set size, so a checkpoint alone is enough to
// rebuild the model and synthesize from it.
// ---------------------------------------------------------------------------

Checkpoint make_checkpoint(const Denoiser& den, const TransitionDataset& schema,
                           const NoiseSchedule& sched, const NormStats& stats,
                           std::size_t train_count);
Checkpoint make_checkpoint(const TransformerDenoiser& den, const NoiseSchedule& sched,
                           const NormStats& stats, std::size_t train_count);

struct LoadedModel {
  std::string kind;  // "transition" | "trajectory"
  Denoiser den;                // valid when kind == "transition"
  TransitionDataset schema;    // data-space schema (no rows), transition kind
  TransformerDenoiser traj;    // valid when kind == "trajectory"
  NoiseSchedule sched;
  NormStats stats;
  std::size_t train_count = 0;
};

LoadedModel model_from_checkpoint(const Checkpoint& ckpt);

// ---------------------------------------------------------------------------
// Stages. Each loads what it needs from files, derives its randomness from
// the run seed (stage k uses SeededRng(seed).child(k)), and writes its
// artifact atomically, so running stages one at a time reproduces a full
// pipeline run byte for byte. Failures are rethrown tagged with the stage.
// ---------------------------------------------------------------------------

struct RunPaths {
  std::string public_path;     // pretraining dataset
  std::string sensitive_path;  // private dataset
  std::string ckpt_in;         // model to continue from
  std::string ckpt_out;        // where to write the trained model
  std::string out_path;        // synthetic dataset
  std::string report_path;     // metrics report
};

void stage_pretrain(const RunConfig& cfg, const std::string& public_path,
                    const std::string& ckpt_out);

FinetuneReport stage_finetune(const RunConfig& cfg, const std::string& sensitive_path,
                              const std::string& ckpt_in, const std::string& ckpt_out);

DatasetFile stage_synthesize(const RunConfig& cfg, const std::string& ckpt_in,
                             const std::string& out_path);

struct EvalOutputs {
  FidelityReport fidelity;
  std::optional<ReturnStats> returns;  // set when an environment is configured
};

EvalOutputs stage_evaluate(const RunConfig& cfg, const DatasetFile& real,
                           const DatasetFile& synth);

struct PipelineResult {
  Report report;
  FinetuneReport privacy;
  EvalOutputs eval;
  std::size_t synth_count = 0;
};

// The full chain. `raw` is echoed into the report; cfg = config_from_map(raw).
PipelineResult run_pipeline(const ConfigMap& raw, const RunPaths& paths);

// ---------------------------------------------------------------------------
// Helpers behind the remaining CLI verbs.
// ---------------------------------------------------------------------------

struct CalibrationSummary {
  double q = 0.0;
  std::int64_t steps = 0;
  double sigma = 0.0;
  PrivacyParams achieved;  // guarantee actually met at that sigma
  bool no_noise = false;   // target was +inf: sigma = 0, no guarantee claimed
};

// Noise calibration for a subsampled-Gaussian schedule. Infinite eps returns
// sigma = 0; an unreachable target propagates calibrate_sigma's bracket error.
CalibrationSummary run_calibration(double q, std::int64_t steps, double eps_target, double delta);

// Rolls episodes in a gridworld with a scripted policy ("expert" | "random")
// and packs them as a dataset file in the requested mode.
DatasetFile collect_dataset(const GridWorldSpec& spec, const std::string& policy,
                            std::size_t episodes, const std::string& mode, std::uint64_t seed);

}  // namespace porl
