#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "porl/dataset.h"
#include "porl/net.h"
#include "porl/rng.h"
#include "porl/trajectory.h"

namespace porl {

struct GridPos {
  int x = 0;
  int y = 0;
  bool operator==(const GridPos& o) const { return x == o.x && y == o.y; }
};

// Deterministic gridworld. Observations are the cell centre in [0,1]^2,
// actions live in [-1,1]^2: each axis with |a| >= 0.5 attempts a one-cell
// move in its sign direction, blocked independently by walls and bounds.
// Reaching the goal ends the episode; running out the step budget does not
// count as terminal.
struct GridWorldSpec {
  std::size_t width = 5;
  std::size_t height = 5;
  GridPos start{0, 0};
  GridPos goal{4, 4};
  std::vector<GridPos> walls;
  std::size_t max_steps = 50;
  double step_reward = 0.0;
  double goal_reward = 1.0;
  void validate() const;  // bounds, start/goal free and distinct, goal reachable
};

class GridWorld {
 public:
  explicit GridWorld(GridWorldSpec spec);

  struct StepResult {
    std::vector<double> obs;  // observation after the move
    double reward = 0.0;
    bool done = false;
  };

  std::vector<double> reset();
  StepResult step(const std::vector<double>& action);
  std::vector<double> observe(GridPos p) const;
  bool blocked(GridPos p) const;  // wall or out of bounds
  GridPos position() const { return pos_; }
  const GridWorldSpec& spec() const { return spec_; }

 private:
  GridWorldSpec spec_;
  std::vector<char> wall_mask_;
  GridPos pos_;
  std::size_t steps_taken_ = 0;
  bool done_ = false;
};

// BFS distance from every free cell to the goal (SIZE_MAX when unreachable).
std::vector<std::size_t> goal_distances(const GridWorldSpec& spec);

using Policy = std::function<std::vector<double>(const std::vector<double>& obs, SeededRng& rng)>;

// Descends the BFS distance field one axis per step; the sub-threshold noise
// never changes which cell the action selects.
Policy make_expert_policy(const GridWorldSpec& spec);
Policy make_random_policy();

struct CollectResult {
  std::vector<Trajectory> trajectories;
  TransitionDataset transitions;  // every step of every episode, [s|a|r|s'|d]
};

CollectResult collect(const GridWorldSpec& spec, const Policy& policy, std::size_t episodes,
                      SeededRng rng);

struct BcConfig {
  std::vector<std::size_t> hidden{64, 64};
  std::size_t epochs = 200;
  std::size_t batch = 64;
  double lr = 1e-3;
};

struct BcPolicy {
  NetworkSpec spec;
  ParamSet params;
  std::vector<double> loss_curve;  // mean squared action error per epoch
};

// Behavioural cloning: squared-error regression from state to action.
BcPolicy train_bc(const TransitionDataset& data, const BcConfig& cfg, SeededRng rng);
Policy make_bc_policy(const BcPolicy& bc);  // output clamped to [-1,1]

struct EvalResult {
  double mean_return = 0.0;
  double success_rate = 0.0;
};

EvalResult evaluate_policy(const GridWorldSpec& spec, const Policy& policy, std::size_t episodes,
                           SeededRng rng);

// 100 * (raw - random) / (expert - random); anchors must differ.
double normalized_score(double raw, double random_ref, double expert_ref);

struct ReturnStats {
  double raw = 0.0;         // mean cumulative return
  double random_ref = 0.0;  // random-policy baseline
  double expert_ref = 0.0;  // scripted-expert baseline
  double normalized = 0.0;  // 100 * (raw - random) / (expert - random)
};

ReturnStats evaluate(const GridWorldSpec& spec, const Policy& policy, std::size_t episodes,
                     double random_ref, double expert_ref, SeededRng rng);

}  // namespace porl
