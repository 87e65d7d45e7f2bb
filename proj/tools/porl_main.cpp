// porl: synthesize offline-RL datasets under differential privacy.
//
// Subcommands cover the full workflow: calibrate a noise schedule, collect
// demonstration data from the built-in gridworld, pretrain on public data,
// privately finetune on sensitive data, synthesize a dataset, evaluate it,
// or run the whole pipeline in one go.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdint>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "porl/pipeline.h"

using namespace porl;

namespace {

// Flags shared across subcommands. Only flags the user actually passed
// override the config file, so defaults never mask configured values.
struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string mode = "transition";
  std::string epsilon = "10";  // parsed with stod so "inf" works everywhere
  double delta = 1e-6;
  double curiosity = 0.3;
  std::size_t horizon = 16;
  std::uint64_t seed = 0;
  bool literal = false;

  CLI::Option *o_mode = nullptr, *o_eps = nullptr, *o_delta = nullptr, *o_cur = nullptr,
              *o_hor = nullptr, *o_seed = nullptr, *o_lit = nullptr;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config_path, "flat `key = value` config file");
    sub->add_option("--set", sets, "config override, key=value (repeatable)")
        ->type_name("KEY=VALUE");
    o_mode = sub->add_option("--mode", mode, "transition | trajectory");
    o_eps = sub->add_option("--epsilon", epsilon, "privacy budget (inf disables noise)");
    o_delta = sub->add_option("--delta", delta, "privacy slack, in (0, 1)");
    o_cur = sub->add_option("--curiosity-rate", curiosity,
                            "fraction of each pretraining batch replaced by novel samples");
    o_hor = sub->add_option("--horizon", horizon, "fragment length for trajectory models");
    o_seed = sub->add_option("--seed", seed, "run seed; fixes every output byte");
    o_lit = sub->add_flag("--paper-literal-mean", literal,
                          "use the literal sqrt(1-beta_t) posterior-mean denominator");
  }

  ConfigMap config() const {
    ConfigMap cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    apply_overrides(cfg, sets);
    if (o_mode->count()) cfg["mode"] = mode;
    if (o_eps->count()) cfg["epsilon"] = epsilon;
    if (o_delta->count()) cfg["delta"] = format_num(delta);
    if (o_cur->count()) cfg["curiosity_rate"] = format_num(curiosity);
    if (o_hor->count()) cfg["horizon"] = std::to_string(horizon);
    if (o_seed->count()) cfg["seed"] = std::to_string(seed);
    if (o_lit->count()) cfg["paper_literal_mean"] = "true";
    return cfg;
  }
};

double parse_epsilon(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::logic_error&) {
    throw std::invalid_argument("epsilon '" + s + "' is not a number");
  }
}

Report privacy_report(const FinetuneReport& rep) {
  Report out;
  out.add_num("privacy.q", rep.sgm.q);
  out.add_num("privacy.sigma", rep.sgm.sigma);
  out.add_count("privacy.steps", std::size_t(rep.sgm.steps));
  out.add_count("privacy.skipped_steps", rep.skipped_steps);
  std::string orders;
  for (double a : dense_orders()) orders += (orders.empty() ? "" : ",") + format_num(a);
  out.add("privacy.orders", orders);
  out.add_num("privacy.epsilon", rep.achieved.epsilon);
  out.add_num("privacy.delta", rep.achieved.delta);
  out.add_num("privacy.order", rep.achieved.order);
  return out;
}

Report fidelity_report(const EvalOutputs& ev) {
  Report out;
  out.add_num("fidelity.marginal", ev.fidelity.marginal);
  out.add_num("fidelity.correlation", ev.fidelity.correlation);
  if (ev.fidelity.has_trajscore) out.add_num("fidelity.trajscore", ev.fidelity.trajscore);
  if (ev.returns) {
    out.add_num("returns.raw", ev.returns->raw);
    out.add_num("returns.random_ref", ev.returns->random_ref);
    out.add_num("returns.expert_ref", ev.returns->expert_ref);
    out.add_num("returns.normalized", ev.returns->normalized);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentially private offline-RL dataset synthesis"};
  app.require_subcommand(1);

  // --- calibrate ---
  auto* cal = app.add_subcommand("calibrate", "noise multiplier for a subsampled-Gaussian run");
  double cal_q = 0.0;
  std::int64_t cal_steps = 0;
  std::string cal_eps = "10";
  double cal_delta = 1e-6;
  cal->add_option("--q", cal_q, "Poisson sampling ratio")->required();
  cal->add_option("--steps", cal_steps, "number of private steps")->required();
  cal->add_option("--epsilon", cal_eps, "privacy budget (inf disables noise)")->required();
  cal->add_option("--delta", cal_delta, "privacy slack, in (0, 1)")->required();

  // --- collect ---
  auto* col = app.add_subcommand("collect", "roll gridworld episodes into a dataset file");
  Common col_c;
  col_c.attach(col);
  std::string col_out, col_policy = "expert";
  std::size_t col_episodes = 100;
  col->add_option("--out", col_out, "dataset file to write")->required();
  col->add_option("--policy", col_policy, "expert | random");
  col->add_option("--episodes", col_episodes, "episodes to roll");

  // --- pretrain ---
  auto* pre = app.add_subcommand("pretrain", "curiosity-driven pretraining on public data");
  Common pre_c;
  pre_c.attach(pre);
  std::string pre_public, pre_ckpt;
  pre->add_option("--public", pre_public, "public dataset file")->required();
  pre->add_option("--ckpt", pre_ckpt, "checkpoint to write")->required();

  // --- finetune ---
  auto* fin = app.add_subcommand("finetune", "private finetuning on sensitive data");
  Common fin_c;
  fin_c.attach(fin);
  std::string fin_sensitive, fin_ckpt, fin_ckpt_out, fin_report;
  fin->add_option("--sensitive", fin_sensitive, "sensitive dataset file")->required();
  fin->add_option("--ckpt", fin_ckpt, "checkpoint to start from")->required();
  fin->add_option("--ckpt-out", fin_ckpt_out, "checkpoint to write (default: --ckpt)");
  fin->add_option("--report", fin_report, "write the privacy ledger here");

  // --- synthesize ---
  auto* syn = app.add_subcommand("synthesize", "sample a synthetic dataset from a checkpoint");
  Common syn_c;
  syn_c.attach(syn);
  std::string syn_ckpt, syn_out;
  std::size_t syn_count = 0;
  syn->add_option("--ckpt", syn_ckpt, "trained checkpoint")->required();
  syn->add_option("--out", syn_out, "dataset file to write")->required();
  syn->add_option("--count", syn_count, "rows or episodes (default: training-set size)");

  // --- evaluate ---
  auto* ev = app.add_subcommand("evaluate", "fidelity (and returns) of a synthetic dataset");
  Common ev_c;
  ev_c.attach(ev);
  std::string ev_real, ev_synth, ev_report;
  ev->add_option("--sensitive", ev_real, "real dataset the synthetic one imitates")->required();
  ev->add_option("--synthetic", ev_synth, "synthetic dataset file")->required();
  ev->add_option("--report", ev_report, "write the metrics here");

  // --- pipeline ---
  auto* pip = app.add_subcommand("pipeline", "pretrain, finetune, synthesize, evaluate");
  Common pip_c;
  pip_c.attach(pip);
  RunPaths pip_paths;
  pip->add_option("--public", pip_paths.public_path, "public dataset file")->required();
  pip->add_option("--sensitive", pip_paths.sensitive_path, "sensitive dataset file")->required();
  pip->add_option("--ckpt", pip_paths.ckpt_out, "checkpoint to write")->required();
  pip->add_option("--out", pip_paths.out_path, "synthetic dataset to write")->required();
  pip->add_option("--report", pip_paths.report_path, "write the run report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*cal) {
      if (!(cal_delta > 0.0) || !(cal_delta < 1.0))
        throw std::invalid_argument("delta must lie strictly between 0 and 1");
      const CalibrationSummary s =
          run_calibration(cal_q, cal_steps, parse_epsilon(cal_eps), cal_delta);
      std::cout << "q = " << format_num(s.q) << "\n";
      std::cout << "steps = " << s.steps << "\n";
      std::cout << "sigma = " << format_num(s.sigma) << "\n";
      if (s.no_noise) {
        std::cout << "no differential privacy: the epsilon target is infinite\n";
      } else {
        std::cout << "achieved epsilon = " << format_num(s.achieved.epsilon) << "\n";
        std::cout << "delta = " << format_num(s.achieved.delta) << "\n";
        std::cout << "order = " << format_num(s.achieved.order) << "\n";
      }
    } else if (*col) {
      const RunConfig cfg = config_from_map(col_c.config());
      const GridWorldSpec spec = cfg.env ? *cfg.env : GridWorldSpec{};
      const DatasetFile out =
          collect_dataset(spec, col_policy, col_episodes, cfg.mode, cfg.seed);
      save_dataset(col_out, out);
      const std::size_t n = out.mode == DatasetMode::kTransition ? out.transitions.count()
                                                                 : out.trajectories.size();
      std::cout << "wrote " << n << (out.mode == DatasetMode::kTransition ? " transitions to "
                                                                          : " trajectories to ")
                << col_out << "\n";
    } else if (*pre) {
      const RunConfig cfg = config_from_map(pre_c.config());
      stage_pretrain(cfg, pre_public, pre_ckpt);
      std::cout << "wrote checkpoint " << pre_ckpt << "\n";
    } else if (*fin) {
      const RunConfig cfg = config_from_map(fin_c.config());
      const std::string out_ckpt = fin_ckpt_out.empty() ? fin_ckpt : fin_ckpt_out;
      const FinetuneReport rep = stage_finetune(cfg, fin_sensitive, fin_ckpt, out_ckpt);
      const Report ledger = privacy_report(rep);
      std::cout << ledger.text();
      if (!fin_report.empty()) ledger.save(fin_report);
      std::cout << "wrote checkpoint " << out_ckpt << "\n";
    } else if (*syn) {
      ConfigMap raw = syn_c.config();
      if (syn->count("--count")) raw["synth_count"] = std::to_string(syn_count);
      const RunConfig cfg = config_from_map(raw);
      const DatasetFile out = stage_synthesize(cfg, syn_ckpt, syn_out);
      const std::size_t n = out.mode == DatasetMode::kTransition ? out.transitions.count()
                                                                 : out.trajectories.size();
      std::cout << "wrote " << n << (out.mode == DatasetMode::kTransition ? " transitions to "
                                                                          : " trajectories to ")
                << syn_out << "\n";
    } else if (*ev) {
      const RunConfig cfg = config_from_map(ev_c.config());
      const EvalOutputs out =
          stage_evaluate(cfg, load_dataset(ev_real), load_dataset(ev_synth));
      const Report rep = fidelity_report(out);
      std::cout << rep.text();
      if (!ev_report.empty()) rep.save(ev_report);
    } else if (*pip) {
      const PipelineResult res = run_pipeline(pip_c.config(), pip_paths);
      std::cout << res.report.text();
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
