#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "porl/dataset.h"
#include "porl/diffusion.h"
#include "porl/io.h"
#include "porl/net.h"
#include "porl/rng.h"
#include "porl/trajectory.h"

using namespace porl;

namespace {

std::string tmp_path(const std::string& name) {
  static const std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() / "porl_io_tests";
    std::filesystem::create_directories(d);
    return d;
  }();
  return (dir / name).string();
}

TransitionDataset small_dataset(std::size_t n) {
  TransitionDataset ds;
  ds.state_dim = 2;
  ds.action_dim = 1;
  ds.has_terminal = true;
  ds.discrete = {{2, 3}};  // action column holds categories 0..2
  ds.rows = Tensor(n, ds.width());
  SeededRng rng(41);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < ds.width(); ++c)
      ds.rows.at(r, c) = std::round(rng.normal() * 64.0) / 64.0;  // exact in float32
    ds.rows.at(r, 2) = double(r % 3);
    ds.rows.at(r, 6) = r + 1 == n ? 1.0 : 0.0;
  }
  ds.validate();
  return ds;
}

Trajectory small_chain(std::size_t len, double phase) {
  Trajectory t;
  t.state_dim = 1;
  t.action_dim = 1;
  t.steps = Tensor(len, t.width());
  for (std::size_t i = 0; i < len; ++i) {
    const bool last = i + 1 == len;
    t.steps.at(i, 0) = (double(i) + phase) * 0.25;
    t.steps.at(i, 1) = 0.5;
    t.steps.at(i, 2) = 0.125;
    t.steps.at(i, 3) = last ? 0.0 : (double(i) + 1.0 + phase) * 0.25;
    t.steps.at(i, 4) = last ? 1.0 : 0.0;
  }
  t.validate();
  return t;
}

// Flip one thing about a saved file and expect the loader to reject it.
template <typename Fn>
void expect_load_failure(const std::string& src, const std::string& dst, Fn mutate,
                         bool trajectory_file = false) {
  std::string bytes = read_file(src);
  mutate(bytes);
  atomic_write_file(dst, bytes);
  CHECK_THROWS_AS(load_dataset(dst), std::runtime_error);
  (void)trajectory_file;
}

}  // namespace

TEST_CASE("transition dataset files round trip exactly") {
  TransitionDataset ds = small_dataset(200);
  const std::string path = tmp_path("transitions.porl");
  save_dataset(path, make_dataset_file(ds));

  DatasetFile back = load_dataset(path);
  CHECK(back.mode == DatasetMode::kTransition);
  CHECK(back.state_dim == 2);
  CHECK(back.action_dim == 1);
  const TransitionDataset& out = back.transitions;
  CHECK(out.state_dim == ds.state_dim);
  CHECK(out.action_dim == ds.action_dim);
  CHECK(out.has_terminal == ds.has_terminal);
  REQUIRE(out.discrete.size() == 1);
  CHECK(out.discrete[0].column == 2);
  CHECK(out.discrete[0].cardinality == 3);
  REQUIRE(out.count() == ds.count());
  CHECK(out.rows.data == ds.rows.data);  // values chosen exactly representable in float32

  // Values that are not float32-representable come back rounded to float32.
  TransitionDataset odd = small_dataset(4);
  odd.discrete.clear();
  odd.rows.at(0, 0) = 0.1;
  save_dataset(path, make_dataset_file(odd));
  DatasetFile rounded = load_dataset(path);
  CHECK(rounded.transitions.rows.at(0, 0) == double(float(0.1)));
  CHECK(rounded.transitions.rows.at(0, 0) != 0.1);
}

TEST_CASE("an empty dataset keeps its schema through a round trip") {
  TransitionDataset ds;
  ds.state_dim = 3;
  ds.action_dim = 2;
  ds.has_terminal = false;
  ds.rows = Tensor(0, ds.width());
  const std::string path = tmp_path("empty.porl");
  save_dataset(path, make_dataset_file(ds));
  DatasetFile back = load_dataset(path);
  CHECK(back.transitions.count() == 0);
  CHECK(back.transitions.state_dim == 3);
  CHECK(back.transitions.action_dim == 2);
  CHECK(back.transitions.has_terminal == false);
  CHECK(back.transitions.width() == 9);
}

TEST_CASE("trajectory dataset files round trip exactly") {
  std::vector<Trajectory> ts = {small_chain(5, 0.0), small_chain(9, 1.0), small_chain(1, 2.0)};
  const std::string path = tmp_path("trajectories.porl");
  save_dataset(path, make_dataset_file(ts));

  DatasetFile back = load_dataset(path);
  CHECK(back.mode == DatasetMode::kTrajectory);
  REQUIRE(back.trajectories.size() == 3);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    CHECK(back.trajectories[i].state_dim == 1);
    CHECK(back.trajectories[i].action_dim == 1);
    REQUIRE(back.trajectories[i].length() == ts[i].length());
    CHECK(back.trajectories[i].steps.data == ts[i].steps.data);
    back.trajectories[i].validate();
  }

  CHECK_THROWS_AS(make_dataset_file(std::vector<Trajectory>{}), std::invalid_argument);
}

TEST_CASE("the dataset loader rejects damaged files") {
  const std::string good = tmp_path("good.porl");
  save_dataset(good, make_dataset_file(small_dataset(16)));
  const std::string bad = tmp_path("bad.porl");

  expect_load_failure(good, bad, [](std::string& b) { b[0] = 'X'; });          // magic
  expect_load_failure(good, bad, [](std::string& b) { b[5] = char(9); });      // version
  expect_load_failure(good, bad, [](std::string& b) { b.resize(b.size() / 2); });  // truncated
  expect_load_failure(good, bad, [](std::string& b) { b.resize(b.size() - 1); });  // short tail
  expect_load_failure(good, bad, [](std::string& b) { b.push_back('\0'); });   // trailing bytes
  expect_load_failure(good, bad, [](std::string& b) { b.clear(); });           // empty file

  CHECK_THROWS_AS(load_dataset(tmp_path("does_not_exist.porl")), std::runtime_error);

  // A checkpoint is not a dataset and vice versa.
  Checkpoint ck;
  ck.schedule = make_schedule(4, 1e-4, 0.2);
  const std::string ckpt = tmp_path("cross.ckpt");
  save_checkpoint(ckpt, ck);
  CHECK_THROWS_AS(load_dataset(ckpt), std::runtime_error);
  CHECK_THROWS_AS(load_checkpoint(good), std::runtime_error);
}

TEST_CASE("checkpoints restore every bit") {
  SeededRng rng(7);
  Checkpoint ck;
  ck.arch = {{"kind", "denoiser"}, {"hidden", "64,64"}, {"data_dim", "4"}};
  ck.schedule = make_schedule(37, 1e-4, 0.17);
  Tensor sample = gaussian(rng, {32, 5}, 1.0);
  ck.stats = compute_stats(sample);
  ck.params.add("layer.w", {7, 3}) = gaussian(rng, {7, 3}, 0.3);
  ck.params.add("layer.b", {1, 3}) = gaussian(rng, {1, 3}, 0.3);
  ck.params.add("head.w", {3, 2}) = gaussian(rng, {3, 2}, 0.3);
  ck.extras.add("freqs", {1, 8}) = gaussian(rng, {1, 8}, 11.0);

  const std::string path = tmp_path("model.ckpt");
  save_checkpoint(path, ck);
  Checkpoint back = load_checkpoint(path);

  CHECK(back.arch == ck.arch);
  CHECK(back.schedule.T == ck.schedule.T);
  CHECK(back.schedule.beta == ck.schedule.beta);
  CHECK(back.schedule.alpha == ck.schedule.alpha);
  CHECK(back.schedule.alpha_bar == ck.schedule.alpha_bar);
  CHECK(back.schedule.sigma == ck.schedule.sigma);
  CHECK(back.stats.mean == ck.stats.mean);
  CHECK(back.stats.stdev == ck.stats.stdev);
  CHECK(back.stats.constant == ck.stats.constant);
  REQUIRE(back.params.same_layout(ck.params));
  CHECK(back.params.flatten() == ck.params.flatten());  // exact doubles, not approximate
  REQUIRE(back.extras.same_layout(ck.extras));
  CHECK(back.extras.flatten() == ck.extras.flatten());
  // Parameter order is part of the layout and must survive the trip.
  for (std::size_t i = 0; i < ck.params.items.size(); ++i)
    CHECK(back.params.items[i].first == ck.params.items[i].first);

  // Saving twice produces identical bytes.
  const std::string again = tmp_path("model2.ckpt");
  save_checkpoint(again, ck);
  CHECK(read_file(path) == read_file(again));
}

TEST_CASE("config files parse into key-value maps") {
  const std::string text =
      "# training setup\n"
      "epochs = 40\n"
      "  lr=3e-4   # trailing comment\n"
      "hidden = 64,64\n"
      "mode = trajectory\n"
      "paper_literal_mean = true\n"
      "epsilon = inf\n"
      "\n";
  ConfigMap cfg = parse_config_text(text);
  CHECK(cfg.size() == 6);
  CHECK(config_count(cfg, "epochs", 0) == 40);
  CHECK(config_num(cfg, "lr", 0.0) == doctest::Approx(3e-4));
  CHECK(config_get(cfg, "mode", "transition") == "trajectory");
  CHECK(config_flag(cfg, "paper_literal_mean", false) == true);
  CHECK(std::isinf(config_num(cfg, "epsilon", 1.0)));
  CHECK(config_sizes(cfg, "hidden", {8}) == std::vector<std::size_t>{64, 64});

  // Fallbacks when a key is absent.
  CHECK(config_count(cfg, "missing", 7) == 7);
  CHECK(config_num(cfg, "missing", 2.5) == 2.5);
  CHECK(config_get(cfg, "missing", "x") == "x");
  CHECK(config_flag(cfg, "missing", true) == true);
  CHECK(config_sizes(cfg, "missing", {32}) == std::vector<std::size_t>{32});

  // Conversion failures name the key.
  cfg["epochs"] = "forty";
  try {
    config_count(cfg, "epochs", 0);
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("epochs") != std::string::npos);
  }
  cfg["lr"] = "fast";
  CHECK_THROWS_AS(config_num(cfg, "lr", 0.0), std::invalid_argument);
  cfg["paper_literal_mean"] = "maybe";
  CHECK_THROWS_AS(config_flag(cfg, "paper_literal_mean", false), std::invalid_argument);
  cfg["hidden"] = "64,,64";
  CHECK_THROWS_AS(config_sizes(cfg, "hidden", {}), std::invalid_argument);

  CHECK_THROWS_AS(parse_config_text("no equals sign here\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("= orphan value\n"), std::invalid_argument);
  CHECK(parse_config_text("").empty());
}

TEST_CASE("command-line overrides replace config values") {
  ConfigMap cfg = parse_config_text("epochs = 40\nlr = 3e-4\n");
  apply_overrides(cfg, {"epochs=80", "seed=123"});
  CHECK(config_count(cfg, "epochs", 0) == 80);
  CHECK(config_count(cfg, "seed", 0) == 123);
  CHECK(config_num(cfg, "lr", 0.0) == doctest::Approx(3e-4));
  CHECK_THROWS_AS(apply_overrides(cfg, {"notanassignment"}), std::invalid_argument);
  CHECK_THROWS_AS(apply_overrides(cfg, {"=5"}), std::invalid_argument);
}

TEST_CASE("numbers format to the shortest exact decimal") {
  const double values[] = {0.0,    0.5,   0.1,  1.0 / 3.0, 3e-4,   1e-17,
                           -2.25,  1e300, 1e-300, 123456789.123456, 2.0 / 64.0};
  for (double v : values) {
    const std::string s = format_num(v);
    CHECK(std::stod(s) == v);             // round-trips exactly
    CHECK(format_num(v) == s);            // deterministic
  }
  CHECK(format_num(0.5) == "0.5");
  CHECK(format_num(0.0) == "0");
  CHECK(format_num(2.0) == "2");
  CHECK(format_num(0.1) == "0.1");  // shortest form, not 0.1000000000000000055...
}

TEST_CASE("reports keep insertion order and deterministic bytes") {
  Report rep;
  rep.add("task", "synthesize");
  rep.add_num("fidelity.marginal", 0.875);
  rep.add_count("rows", 1024);
  rep.add_num("privacy.epsilon", 9.97423);
  CHECK(rep.text() ==
        "task = synthesize\n"
        "fidelity.marginal = 0.875\n"
        "rows = 1024\n"
        "privacy.epsilon = 9.97423\n");

  const std::string path = tmp_path("report.txt");
  rep.save(path);
  CHECK(read_file(path) == rep.text());

  Report rep2;
  rep2.add("task", "synthesize");
  rep2.add_num("fidelity.marginal", 0.875);
  rep2.add_count("rows", 1024);
  rep2.add_num("privacy.epsilon", 9.97423);
  CHECK(rep2.text() == rep.text());
}

TEST_CASE("csv files carry a header plus formatted rows") {
  const std::string path = tmp_path("curve.csv");
  write_csv(path, {"step", "loss"}, {{0, 1.5}, {1, 0.75}, {2, 0.5}});
  CHECK(read_file(path) ==
        "step,loss\n"
        "0,1.5\n"
        "1,0.75\n"
        "2,0.5\n");
  CHECK_THROWS_AS(write_csv(path, {"a", "b"}, {{1.0}}), std::invalid_argument);
}

TEST_CASE("atomic writes land complete and leave no temporary behind") {
  const std::string path = tmp_path("atomic.bin");
  std::string payload = "first";
  atomic_write_file(path, payload);
  CHECK(read_file(path) == payload);
  // Overwrite an existing file.
  payload.assign(1 << 16, 'z');
  payload[100] = '\0';  // binary-safe
  atomic_write_file(path, payload);
  CHECK(read_file(path) == payload);
  CHECK(!std::filesystem::exists(path + ".tmp"));
  CHECK_THROWS_AS(read_file(tmp_path("missing_file")), std::runtime_error);
}
