#include "porl/pipeline.h"

#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

namespace porl {

namespace {

// Stage randomness: one child of SeededRng(seed) per stage, so running the
// stages separately reproduces a full pipeline run byte for byte.
constexpr std::size_t kInitChild = 0;
constexpr std::size_t kPretrainChild = 1;
constexpr std::size_t kFinetuneChild = 2;
constexpr std::size_t kSynthChild = 3;
constexpr std::size_t kEvalChild = 4;
constexpr std::size_t kRndChild = 5;

template <typename Fn>
auto tagged(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string(stage) + " stage: " + e.what());
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find(sep, start);
    if (end == std::string::npos) end = s.size();
    out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

GridPos parse_pos(const std::string& key, const std::string& v) {
  const auto parts = split(v, ',');
  try {
    if (parts.size() != 2) throw std::invalid_argument("");
    std::size_t ux = 0, uy = 0;
    const int x = std::stoi(parts[0], &ux);
    const int y = std::stoi(parts[1], &uy);
    if (ux != parts[0].size() || uy != parts[1].size()) throw std::invalid_argument("");
    return GridPos{x, y};
  } catch (const std::logic_error&) {
    throw std::invalid_argument("config: key '" + key + "' holds '" + v + "', expected \"x,y\"");
  }
}

std::string encode_discrete(const std::vector<DiscreteColumn>& ds) {
  std::string out;
  for (const auto& dc : ds) {
    if (!out.empty()) out += ';';
    out += std::to_string(dc.column) + ":" + std::to_string(dc.cardinality);
  }
  return out;
}

std::vector<DiscreteColumn> decode_discrete(const std::string& v) {
  std::vector<DiscreteColumn> out;
  if (v.empty()) return out;
  for (const std::string& piece : split(v, ';')) {
    const auto kv = split(piece, ':');
    if (kv.size() != 2)
      throw std::runtime_error("checkpoint: malformed discrete descriptor '" + piece + "'");
    out.push_back({std::size_t(std::stoull(kv[0])), std::size_t(std::stoull(kv[1]))});
  }
  return out;
}

std::size_t arch_count(const ConfigMap& arch, const std::string& key) {
  if (!arch.count(key)) throw std::runtime_error("checkpoint: arch lacks '" + key + "'");
  return config_count(arch, key, 0);
}

// Trainable tensors from a checkpoint must fit the freshly built network.
void adopt_params(ParamSet& into, const ParamSet& from, const char* what) {
  if (!into.same_layout(from))
    throw std::runtime_error(std::string("checkpoint: stored parameters do not fit the ") + what +
                             " architecture they describe");
  into = from;
}

TransitionDataset bare_schema(const TransitionDataset& ds) {
  TransitionDataset schema = ds;
  schema.rows = Tensor(0, ds.width());
  return schema;
}

DatasetFile load_mode_checked(const std::string& path, const std::string& mode,
                              const char* role) {
  DatasetFile f = load_dataset(path);
  const std::string have = f.mode == DatasetMode::kTransition ? "transition" : "trajectory";
  if (have != mode)
    throw std::runtime_error(std::string(role) + " dataset " + path + " holds " + have +
                             "s but the run mode is " + mode);
  return f;
}

// Flattened [s|a|r|s'|d] rows of a trajectory file, for BC probes and
// row-level fidelity.
TransitionDataset stitched_transitions(const DatasetFile& f) {
  TransitionDataset ds;
  ds.state_dim = f.state_dim;
  ds.action_dim = f.action_dim;
  ds.has_terminal = true;
  ds.rows = trajectory_rows(f.trajectories);
  ds.validate();
  return ds;
}

Tensor data_rows(const DatasetFile& f) {
  return f.mode == DatasetMode::kTransition ? f.transitions.rows
                                            : trajectory_rows(f.trajectories);
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "mode", "seed",
      // optimization + privacy
      "pretrain_epochs", "finetune_epochs", "curiosity_rate", "batch", "epsilon", "delta",
      "clip", "pretrain_lr", "dp_lr", "predictor_lr", "sigma_override", "stats_from_sensitive",
      // diffusion schedule
      "T", "beta_min", "beta_max",
      // transition model
      "hidden", "time_dim",
      // trajectory model
      "horizon", "token_dim", "layers", "heads", "embed_hidden", "traj_time_dim", "max_len",
      // synthesis
      "synth_count", "paper_literal_mean",
      // novelty predictor
      "rnd_out", "rnd_width",
      // environment + evaluation
      "env", "env.width", "env.height", "env.start", "env.goal", "env.walls", "env.max_steps",
      "env.step_reward", "env.goal_reward", "eval.episodes", "eval.ref_episodes",
      "eval.bc_epochs", "eval.bc_batch", "eval.bc_lr", "eval.bc_hidden"};
  return keys;
}

}  // namespace

void RunConfig::validate() const {
  if (mode != "transition" && mode != "trajectory")
    throw std::invalid_argument("mode must be 'transition' or 'trajectory'");
  pipe.validate();
  if (T < 1) throw std::invalid_argument("diffusion needs at least one step");
  if (!(beta_min > 0.0) || !(beta_max < 1.0) || !(beta_min <= beta_max))
    throw std::invalid_argument("beta range must satisfy 0 < beta_min <= beta_max < 1");
  if (hidden.empty()) throw std::invalid_argument("the transition model needs hidden layers");
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  if (max_len != 0 && max_len < horizon)
    throw std::invalid_argument("max_len must be 0 or at least the horizon");
  if (rnd_out < 1 || rnd_width < 1)
    throw std::invalid_argument("novelty predictor dims must be positive");
  if (eval.episodes < 1 || eval.ref_episodes < 1)
    throw std::invalid_argument("evaluation needs at least one episode");
  if (env) env->validate();
}

RunConfig config_from_map(const ConfigMap& cfg) {
  for (const auto& [k, v] : cfg) {
    (void)v;
    if (!known_keys().count(k)) throw std::invalid_argument("config: unknown key '" + k + "'");
  }
  RunConfig rc;
  rc.mode = config_get(cfg, "mode", rc.mode);
  rc.seed = config_count(cfg, "seed", 0);

  rc.pipe.pretrain_epochs = config_count(cfg, "pretrain_epochs", rc.pipe.pretrain_epochs);
  rc.pipe.finetune_epochs = config_count(cfg, "finetune_epochs", rc.pipe.finetune_epochs);
  rc.pipe.curiosity_rate = config_num(cfg, "curiosity_rate", rc.pipe.curiosity_rate);
  rc.pipe.batch = config_count(cfg, "batch", rc.pipe.batch);
  rc.pipe.epsilon = config_num(cfg, "epsilon", rc.pipe.epsilon);
  rc.pipe.delta = config_num(cfg, "delta", rc.pipe.delta);
  rc.pipe.clip = config_num(cfg, "clip", rc.pipe.clip);
  rc.pipe.pretrain_lr = config_num(cfg, "pretrain_lr", rc.pipe.pretrain_lr);
  rc.pipe.dp_lr = config_num(cfg, "dp_lr", rc.pipe.dp_lr);
  rc.pipe.predictor_lr = config_num(cfg, "predictor_lr", rc.pipe.predictor_lr);
  rc.pipe.sigma_override = config_num(cfg, "sigma_override", rc.pipe.sigma_override);
  rc.pipe.stats_from_sensitive =
      config_flag(cfg, "stats_from_sensitive", rc.pipe.stats_from_sensitive);
  rc.pipe.seed = rc.seed;

  rc.T = config_count(cfg, "T", rc.T);
  rc.beta_min = config_num(cfg, "beta_min", rc.beta_min);
  rc.beta_max = config_num(cfg, "beta_max", rc.beta_max);

  rc.hidden = config_sizes(cfg, "hidden", rc.hidden);
  rc.time_dim = config_count(cfg, "time_dim", rc.time_dim);

  rc.horizon = config_count(cfg, "horizon", rc.horizon);
  rc.token_dim = config_count(cfg, "token_dim", rc.token_dim);
  rc.layers = config_count(cfg, "layers", rc.layers);
  rc.heads = config_count(cfg, "heads", rc.heads);
  rc.embed_hidden = config_count(cfg, "embed_hidden", rc.embed_hidden);
  rc.traj_time_dim = config_count(cfg, "traj_time_dim", rc.traj_time_dim);
  rc.max_len = config_count(cfg, "max_len", rc.max_len);

  rc.synth_count = config_count(cfg, "synth_count", rc.synth_count);
  rc.paper_literal_mean = config_flag(cfg, "paper_literal_mean", rc.paper_literal_mean);

  rc.rnd_out = config_count(cfg, "rnd_out", rc.rnd_out);
  rc.rnd_width = config_count(cfg, "rnd_width", rc.rnd_width);

  const std::string env_kind = config_get(cfg, "env", "");
  if (!env_kind.empty()) {
    if (env_kind != "grid")
      throw std::invalid_argument("config: unknown environment '" + env_kind + "'");
    GridWorldSpec spec;
    spec.width = config_count(cfg, "env.width", spec.width);
    spec.height = config_count(cfg, "env.height", spec.height);
    spec.start = parse_pos("env.start", config_get(cfg, "env.start", "0,0"));
    spec.goal = parse_pos("env.goal", config_get(
                                          cfg, "env.goal",
                                          std::to_string(spec.width - 1) + "," +
                                              std::to_string(spec.height - 1)));
    const std::string walls = config_get(cfg, "env.walls", "");
    if (!walls.empty())
      for (const std::string& w : split(walls, ';')) spec.walls.push_back(parse_pos("env.walls", w));
    spec.max_steps = config_count(cfg, "env.max_steps", spec.max_steps);
    spec.step_reward = config_num(cfg, "env.step_reward", spec.step_reward);
    spec.goal_reward = config_num(cfg, "env.goal_reward", spec.goal_reward);
    rc.env = spec;
  } else {
    for (const auto& [k, v] : cfg) {
      (void)v;
      if (k.rfind("env.", 0) == 0)
        throw std::invalid_argument("config: '" + k + "' given but 'env' is not set");
    }
  }

  rc.eval.episodes = config_count(cfg, "eval.episodes", rc.eval.episodes);
  rc.eval.ref_episodes = config_count(cfg, "eval.ref_episodes", rc.eval.ref_episodes);
  rc.eval.bc.epochs = config_count(cfg, "eval.bc_epochs", rc.eval.bc.epochs);
  rc.eval.bc.batch = config_count(cfg, "eval.bc_batch", rc.eval.bc.batch);
  rc.eval.bc.lr = config_num(cfg, "eval.bc_lr", rc.eval.bc.lr);
  rc.eval.bc.hidden = config_sizes(cfg, "eval.bc_hidden", rc.eval.bc.hidden);

  rc.validate();
  return rc;
}

// ---------------------------------------------------------------------------
// checkpoint packing
// ---------------------------------------------------------------------------

Checkpoint make_checkpoint(const Denoiser& den, const TransitionDataset& schema,
                           const NoiseSchedule& sched, const NormStats& stats,
                           std::size_t train_count) {
  Checkpoint ck;
  ck.arch["kind"] = "transition";
  ck.arch["data_dim"] = std::to_string(den.data_dim);
  ck.arch["cond_dim"] = std::to_string(den.cond_dim);
  ck.arch["time_dim"] = std::to_string(den.time_dim);
  ck.arch["activation"] = den.net.activation;
  std::string hidden;
  for (std::size_t h : den.net.hidden) hidden += (hidden.empty() ? "" : ",") + std::to_string(h);
  ck.arch["hidden"] = hidden;
  ck.arch["state_dim"] = std::to_string(schema.state_dim);
  ck.arch["action_dim"] = std::to_string(schema.action_dim);
  ck.arch["has_terminal"] = schema.has_terminal ? "true" : "false";
  ck.arch["discrete"] = encode_discrete(schema.discrete);
  ck.arch["train_count"] = std::to_string(train_count);
  ck.schedule = sched;
  ck.stats = stats;
  ck.params = den.params;
  ck.extras.add("rff_freqs", den.rff_freqs.shape) = den.rff_freqs;
  return ck;
}

Checkpoint make_checkpoint(const TransformerDenoiser& den, const NoiseSchedule& sched,
                           const NormStats& stats, std::size_t train_count) {
  Checkpoint ck;
  ck.arch["kind"] = "trajectory";
  ck.arch["state_dim"] = std::to_string(den.cfg.state_dim);
  ck.arch["action_dim"] = std::to_string(den.cfg.action_dim);
  ck.arch["horizon"] = std::to_string(den.cfg.horizon);
  ck.arch["token_dim"] = std::to_string(den.cfg.token_dim);
  ck.arch["layers"] = std::to_string(den.cfg.layers);
  ck.arch["heads"] = std::to_string(den.cfg.heads);
  ck.arch["embed_hidden"] = std::to_string(den.cfg.embed_hidden);
  ck.arch["time_dim"] = std::to_string(den.cfg.time_dim);
  ck.arch["train_count"] = std::to_string(train_count);
  ck.schedule = sched;
  ck.stats = stats;
  ck.params = den.params;
  return ck;
}

LoadedModel model_from_checkpoint(const Checkpoint& ckpt) {
  LoadedModel m;
  m.kind = config_get(ckpt.arch, "kind", "");
  m.sched = ckpt.schedule;
  m.stats = ckpt.stats;
  m.train_count = arch_count(ckpt.arch, "train_count");
  if (m.kind == "transition") {
    m.schema.state_dim = arch_count(ckpt.arch, "state_dim");
    m.schema.action_dim = arch_count(ckpt.arch, "action_dim");
    m.schema.has_terminal = config_flag(ckpt.arch, "has_terminal", true);
    m.schema.discrete = decode_discrete(config_get(ckpt.arch, "discrete", ""));
    m.schema.rows = Tensor(0, m.schema.width());
    m.den = make_denoiser(arch_count(ckpt.arch, "data_dim"), arch_count(ckpt.arch, "cond_dim"),
                          config_sizes(ckpt.arch, "hidden", {}),
                          arch_count(ckpt.arch, "time_dim"), SeededRng(0),
                          config_get(ckpt.arch, "activation", "silu"));
    adopt_params(m.den.params, ckpt.params, "transition model");
    const Tensor* freqs = ckpt.extras.find("rff_freqs");
    if (!freqs || freqs->shape != m.den.rff_freqs.shape)
      throw std::runtime_error("checkpoint: missing or misshapen time-feature frequencies");
    m.den.rff_freqs = *freqs;
  } else if (m.kind == "trajectory") {
    TrajDenoiserConfig tc;
    tc.state_dim = arch_count(ckpt.arch, "state_dim");
    tc.action_dim = arch_count(ckpt.arch, "action_dim");
    tc.horizon = arch_count(ckpt.arch, "horizon");
    tc.token_dim = arch_count(ckpt.arch, "token_dim");
    tc.layers = arch_count(ckpt.arch, "layers");
    tc.heads = arch_count(ckpt.arch, "heads");
    tc.embed_hidden = arch_count(ckpt.arch, "embed_hidden");
    tc.time_dim = arch_count(ckpt.arch, "time_dim");
    m.traj = make_traj_denoiser(tc, SeededRng(0));
    adopt_params(m.traj.params, ckpt.params, "trajectory model");
  } else {
    throw std::runtime_error("checkpoint: unknown model kind '" + m.kind + "'");
  }
  return m;
}

// ---------------------------------------------------------------------------
// stages
// ---------------------------------------------------------------------------

void stage_pretrain(const RunConfig& cfg, const std::string& public_path,
                    const std::string& ckpt_out) {
  tagged("pretrain", [&] {
    const DatasetFile pub = load_mode_checked(public_path, cfg.mode, "public");
    SeededRng root(cfg.seed);
    const NoiseSchedule sched = make_schedule(cfg.T, cfg.beta_min, cfg.beta_max);
    if (cfg.mode == "transition") {
      const TransitionDataset& ds = pub.transitions;
      const EncodedView view = encode_and_normalize(ds);
      Denoiser den = make_denoiser(model_width(ds), 0, cfg.hidden, cfg.time_dim,
                                   root.child(kInitChild));
      RndPair rnd =
          make_rnd_pair(model_width(ds), cfg.rnd_out, cfg.rnd_width, root.child(kRndChild));
      pretrain(den, sched, ds, view.stats, rnd, cfg.pipe, root.child(kPretrainChild));
      save_checkpoint(ckpt_out,
                      make_checkpoint(den, bare_schema(ds), sched, view.stats, ds.count()));
    } else {
      const std::vector<Trajectory>& ts = pub.trajectories;
      const NormStats stats = compute_stats(trajectory_rows(ts));
      TrajDenoiserConfig tc;
      tc.state_dim = pub.state_dim;
      tc.action_dim = pub.action_dim;
      tc.horizon = cfg.horizon;
      tc.token_dim = cfg.token_dim;
      tc.layers = cfg.layers;
      tc.heads = cfg.heads;
      tc.embed_hidden = cfg.embed_hidden;
      tc.time_dim = cfg.traj_time_dim;
      TransformerDenoiser den = make_traj_denoiser(tc, root.child(kInitChild));
      const std::vector<Fragment> frags = fragment_and_normalize(ts, cfg.horizon, stats);
      RndPair rnd = make_rnd_pair(cfg.horizon * tc.width(), cfg.rnd_out, cfg.rnd_width,
                                  root.child(kRndChild));
      pretrain_j(den, sched, frags, rnd, cfg.pipe, root.child(kPretrainChild));
      save_checkpoint(ckpt_out, make_checkpoint(den, sched, stats, ts.size()));
    }
    return 0;
  });
}

FinetuneReport stage_finetune(const RunConfig& cfg, const std::string& sensitive_path,
                              const std::string& ckpt_in, const std::string& ckpt_out) {
  return tagged("finetune", [&] {
    LoadedModel m = model_from_checkpoint(load_checkpoint(ckpt_in));
    if (m.kind != cfg.mode)
      throw std::runtime_error("checkpoint holds a " + m.kind + " model but the run mode is " +
                               cfg.mode);
    const DatasetFile sens = load_mode_checked(sensitive_path, cfg.mode, "sensitive");
    SeededRng root(cfg.seed);
    FinetuneReport rep;
    if (cfg.mode == "transition") {
      const TransitionDataset& ds = sens.transitions;
      if (ds.state_dim != m.schema.state_dim || ds.action_dim != m.schema.action_dim ||
          ds.has_terminal != m.schema.has_terminal ||
          encode_discrete(ds.discrete) != encode_discrete(m.schema.discrete))
        throw std::runtime_error("sensitive dataset schema does not match the checkpoint");
      const NormStats st =
          cfg.pipe.stats_from_sensitive ? encode_and_normalize(ds).stats : m.stats;
      rep = finetune(m.den, m.sched, ds, st, cfg.pipe, root.child(kFinetuneChild));
      save_checkpoint(ckpt_out, make_checkpoint(m.den, m.schema, m.sched, st, ds.count()));
    } else {
      if (sens.state_dim != m.traj.cfg.state_dim || sens.action_dim != m.traj.cfg.action_dim)
        throw std::runtime_error("sensitive dataset dims do not match the checkpoint");
      const NormStats st = cfg.pipe.stats_from_sensitive
                               ? compute_stats(trajectory_rows(sens.trajectories))
                               : m.stats;
      rep = finetune_j(m.traj, m.sched, sens.trajectories, st, cfg.pipe,
                       root.child(kFinetuneChild));
      save_checkpoint(ckpt_out, make_checkpoint(m.traj, m.sched, st, sens.trajectories.size()));
    }
    return rep;
  });
}

DatasetFile stage_synthesize(const RunConfig& cfg, const std::string& ckpt_in,
                             const std::string& out_path) {
  return tagged("synthesize", [&] {
    const LoadedModel m = model_from_checkpoint(load_checkpoint(ckpt_in));
    if (m.kind != cfg.mode)
      throw std::runtime_error("checkpoint holds a " + m.kind + " model but the run mode is " +
                               cfg.mode);
    const std::size_t count = cfg.synth_count ? cfg.synth_count : m.train_count;
    if (count == 0)
      throw std::runtime_error("nothing to synthesize: set synth_count or finetune first");
    SeededRng root(cfg.seed);
    SeededRng synth_rng = root.child(kSynthChild);
    DatasetFile out;
    if (cfg.mode == "transition") {
      out = make_dataset_file(
          synthesize_transitions(m.den, m.sched, m.stats, m.schema, count, synth_rng));
    } else {
      const std::size_t max_len = cfg.max_len ? cfg.max_len : 4 * cfg.horizon;
      std::vector<Trajectory> ts;
      ts.reserve(count);
      for (std::size_t i = 0; i < count; ++i)
        ts.push_back(synthesize_trajectory(m.traj, m.sched, m.stats, cfg.horizon, max_len,
                                           synth_rng.child(i), cfg.paper_literal_mean)
                         .traj);
      out = make_dataset_file(std::move(ts));
    }
    save_dataset(out_path, out);
    return out;
  });
}

EvalOutputs stage_evaluate(const RunConfig& cfg, const DatasetFile& real,
                           const DatasetFile& synth) {
  return tagged("evaluate", [&] {
    const DatasetMode want =
        cfg.mode == "transition" ? DatasetMode::kTransition : DatasetMode::kTrajectory;
    if (real.mode != want || synth.mode != want)
      throw std::runtime_error("evaluation datasets do not match the run mode");
    SeededRng root(cfg.seed);
    SeededRng erng = root.child(kEvalChild);
    EvalOutputs out;
    out.fidelity.marginal = marginal_fidelity(data_rows(real), data_rows(synth));
    out.fidelity.correlation = correlation_fidelity(data_rows(real), data_rows(synth));
    if (cfg.mode == "trajectory") {
      out.fidelity.has_trajscore = true;
      out.fidelity.trajscore =
          trajscore(real.trajectories, synth.trajectories, TrajScoreConfig{}, erng.child(4));
    }
    if (cfg.env) {
      const GridWorldSpec& spec = *cfg.env;
      const double random_ref =
          evaluate_policy(spec, make_random_policy(), cfg.eval.ref_episodes, erng.child(0))
              .mean_return;
      const double expert_ref =
          evaluate_policy(spec, make_expert_policy(spec), cfg.eval.ref_episodes, erng.child(1))
              .mean_return;
      const TransitionDataset bc_data = cfg.mode == "transition"
                                            ? synth.transitions
                                            : stitched_transitions(synth);
      const BcPolicy bc = train_bc(bc_data, cfg.eval.bc, erng.child(2));
      out.returns = evaluate(spec, make_bc_policy(bc), cfg.eval.episodes, random_ref, expert_ref,
                             erng.child(3));
    }
    return out;
  });
}

PipelineResult run_pipeline(const ConfigMap& raw, const RunPaths& paths) {
  const RunConfig cfg = config_from_map(raw);
  if (paths.ckpt_out.empty() || paths.out_path.empty())
    throw std::invalid_argument("pipeline needs checkpoint and output paths");

  PipelineResult res;
  stage_pretrain(cfg, paths.public_path, paths.ckpt_out);
  res.privacy = stage_finetune(cfg, paths.sensitive_path, paths.ckpt_out, paths.ckpt_out);
  const DatasetFile synth = stage_synthesize(cfg, paths.ckpt_out, paths.out_path);
  const DatasetFile real = load_mode_checked(paths.sensitive_path, cfg.mode, "sensitive");
  res.eval = stage_evaluate(cfg, real, synth);
  res.synth_count = cfg.mode == "transition" ? synth.transitions.count()
                                             : synth.trajectories.size();

  Report& rep = res.report;
  rep.add("task", "pipeline");
  rep.add("mode", cfg.mode);
  rep.add_count("seed", cfg.seed);
  for (const auto& [k, v] : raw) rep.add("config." + k, v);
  rep.add_count("data.real_count", cfg.mode == "transition" ? real.transitions.count()
                                                            : real.trajectories.size());
  rep.add_count("data.synth_count", res.synth_count);

  rep.add_num("privacy.q", res.privacy.sgm.q);
  rep.add_num("privacy.sigma", res.privacy.sgm.sigma);
  rep.add_count("privacy.steps", std::size_t(res.privacy.sgm.steps));
  rep.add_count("privacy.skipped_steps", res.privacy.skipped_steps);
  std::string orders;
  for (double a : dense_orders()) orders += (orders.empty() ? "" : ",") + format_num(a);
  rep.add("privacy.orders", orders);
  rep.add_num("privacy.epsilon", res.privacy.achieved.epsilon);
  rep.add_num("privacy.delta", res.privacy.achieved.delta);
  rep.add_num("privacy.order", res.privacy.achieved.order);

  rep.add_num("fidelity.marginal", res.eval.fidelity.marginal);
  rep.add_num("fidelity.correlation", res.eval.fidelity.correlation);
  if (res.eval.fidelity.has_trajscore) rep.add_num("fidelity.trajscore", res.eval.fidelity.trajscore);
  if (res.eval.returns) {
    rep.add_num("returns.raw", res.eval.returns->raw);
    rep.add_num("returns.random_ref", res.eval.returns->random_ref);
    rep.add_num("returns.expert_ref", res.eval.returns->expert_ref);
    rep.add_num("returns.normalized", res.eval.returns->normalized);
  }
  if (!paths.report_path.empty()) rep.save(paths.report_path);
  return res;
}

// ---------------------------------------------------------------------------
// calibration + collection
// ---------------------------------------------------------------------------

CalibrationSummary run_calibration(double q, std::int64_t steps, double eps_target,
                                   double delta) {
  if (!(delta > 0.0) || !(delta < 1.0))
    throw std::invalid_argument("delta must lie strictly between 0 and 1");
  CalibrationSummary s;
  s.q = q;
  s.steps = steps;
  if (std::isinf(eps_target) && eps_target > 0) {
    s.no_noise = true;
    s.sigma = 0.0;
    s.achieved.epsilon = eps_target;
    s.achieved.delta = delta;
    return s;
  }
  s.sigma = calibrate_sigma(q, steps, eps_target, delta);
  s.achieved = to_dp(compose(sgm_curve(q, s.sigma), steps), delta);
  return s;
}

DatasetFile collect_dataset(const GridWorldSpec& spec, const std::string& policy,
                            std::size_t episodes, const std::string& mode, std::uint64_t seed) {
  spec.validate();
  Policy pol;
  if (policy == "expert")
    pol = make_expert_policy(spec);
  else if (policy == "random")
    pol = make_random_policy();
  else
    throw std::invalid_argument("policy must be 'expert' or 'random', not '" + policy + "'");
  CollectResult cr = collect(spec, pol, episodes, SeededRng(seed));
  if (mode == "transition") return make_dataset_file(std::move(cr.transitions));
  if (mode == "trajectory") return make_dataset_file(std::move(cr.trajectories));
  throw std::invalid_argument("mode must be 'transition' or 'trajectory', not '" + mode + "'");
}

}  // namespace porl
