#include "porl/env.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>

namespace porl {

namespace {

bool in_bounds(const GridWorldSpec& s, GridPos p) {
  return p.x >= 0 && p.y >= 0 && p.x < static_cast<int>(s.width) &&
         p.y < static_cast<int>(s.height);
}

std::size_t cell_index(const GridWorldSpec& s, GridPos p) {
  return static_cast<std::size_t>(p.y) * s.width + static_cast<std::size_t>(p.x);
}

std::vector<char> build_wall_mask(const GridWorldSpec& s) {
  std::vector<char> mask(s.width * s.height, 0);
  for (const GridPos& w : s.walls) {
    if (!in_bounds(s, w)) throw std::invalid_argument("gridworld: wall outside the grid");
    mask[cell_index(s, w)] = 1;
  }
  return mask;
}

}  // namespace

void GridWorldSpec::validate() const {
  if (width == 0 || height == 0) throw std::invalid_argument("gridworld: empty grid");
  if (max_steps == 0) throw std::invalid_argument("gridworld: max_steps must be positive");
  if (!in_bounds(*this, start) || !in_bounds(*this, goal))
    throw std::invalid_argument("gridworld: start/goal outside the grid");
  if (start == goal) throw std::invalid_argument("gridworld: start equals goal");
  const auto mask = build_wall_mask(*this);
  if (mask[cell_index(*this, start)] || mask[cell_index(*this, goal)])
    throw std::invalid_argument("gridworld: start/goal inside a wall");
  if (goal_distances(*this)[cell_index(*this, start)] == std::numeric_limits<std::size_t>::max())
    throw std::invalid_argument("gridworld: goal unreachable from start");
}

std::vector<std::size_t> goal_distances(const GridWorldSpec& spec) {
  const auto mask = build_wall_mask(spec);
  std::vector<std::size_t> dist(spec.width * spec.height, std::numeric_limits<std::size_t>::max());
  std::deque<GridPos> queue;
  dist[cell_index(spec, spec.goal)] = 0;
  queue.push_back(spec.goal);
  const int dx[4] = {1, -1, 0, 0};
  const int dy[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    const GridPos p = queue.front();
    queue.pop_front();
    const std::size_t d = dist[cell_index(spec, p)];
    for (int k = 0; k < 4; ++k) {
      const GridPos q{p.x + dx[k], p.y + dy[k]};
      if (!in_bounds(spec, q) || mask[cell_index(spec, q)]) continue;
      if (dist[cell_index(spec, q)] <= d + 1) continue;
      dist[cell_index(spec, q)] = d + 1;
      queue.push_back(q);
    }
  }
  return dist;
}

GridWorld::GridWorld(GridWorldSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  wall_mask_ = build_wall_mask(spec_);
  pos_ = spec_.start;
}

std::vector<double> GridWorld::observe(GridPos p) const {
  return {(static_cast<double>(p.x) + 0.5) / static_cast<double>(spec_.width),
          (static_cast<double>(p.y) + 0.5) / static_cast<double>(spec_.height)};
}

bool GridWorld::blocked(GridPos p) const {
  return !in_bounds(spec_, p) || wall_mask_[cell_index(spec_, p)] != 0;
}

std::vector<double> GridWorld::reset() {
  pos_ = spec_.start;
  steps_taken_ = 0;
  done_ = false;
  return observe(pos_);
}

GridWorld::StepResult GridWorld::step(const std::vector<double>& action) {
  if (action.size() != 2) throw std::invalid_argument("gridworld: action must have two axes");
  if (done_) throw std::logic_error("gridworld: step after episode end");
  GridPos next = pos_;
  // Axes move independently: each is thresholded and blocked on its own.
  if (std::abs(action[0]) >= 0.5) {
    const GridPos cand{next.x + (action[0] > 0 ? 1 : -1), next.y};
    if (!blocked(cand)) next = cand;
  }
  if (std::abs(action[1]) >= 0.5) {
    const GridPos cand{next.x, next.y + (action[1] > 0 ? 1 : -1)};
    if (!blocked(cand)) next = cand;
  }
  pos_ = next;
  ++steps_taken_;
  StepResult r;
  r.obs = observe(pos_);
  if (pos_ == spec_.goal) {
    r.reward = spec_.goal_reward;
    r.done = true;
    done_ = true;
  } else {
    r.reward = spec_.step_reward;
    r.done = false;
  }
  return r;
}

Policy make_expert_policy(const GridWorldSpec& spec) {
  spec.validate();
  const auto dist = goal_distances(spec);
  const auto mask = build_wall_mask(spec);
  return [spec, dist, mask](const std::vector<double>& obs, SeededRng& rng) {
    if (obs.size() != 2) throw std::invalid_argument("expert policy: bad observation");
    const GridPos here{static_cast<int>(std::floor(obs[0] * static_cast<double>(spec.width))),
                       static_cast<int>(std::floor(obs[1] * static_cast<double>(spec.height)))};
    const std::size_t d_here = dist[cell_index(spec, here)];
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    int pick = -1;
    for (int k = 0; k < 4; ++k) {
      const GridPos q{here.x + dx[k], here.y + dy[k]};
      if (!in_bounds(spec, q) || mask[cell_index(spec, q)]) continue;
      if (dist[cell_index(spec, q)] < d_here) {
        pick = k;
        break;
      }
    }
    // Noise stays below the 0.5 threshold on the idle axis and keeps the
    // moving axis above it, so the selected cell never changes.
    std::vector<double> a(2, 0.0);
    a[0] = (rng.uniform() - 0.5) * 0.4;
    a[1] = (rng.uniform() - 0.5) * 0.4;
    if (pick >= 0) {
      const int axis = (dy[pick] == 0) ? 0 : 1;
      const int sign = (axis == 0 ? dx[pick] : dy[pick]);
      a[axis] = sign * 0.8 + a[axis] * 0.5;  // magnitude in [0.7, 0.9]
    }
    return a;
  };
}

Policy make_random_policy() {
  return [](const std::vector<double>& obs, SeededRng& rng) {
    (void)obs;
    return std::vector<double>{rng.uniform() * 2.0 - 1.0, rng.uniform() * 2.0 - 1.0};
  };
}

CollectResult collect(const GridWorldSpec& spec, const Policy& policy, std::size_t episodes,
                      SeededRng rng) {
  if (episodes == 0) throw std::invalid_argument("collect: need at least one episode");
  GridWorld env(spec);
  CollectResult out;
  out.transitions.state_dim = 2;
  out.transitions.action_dim = 2;
  out.transitions.has_terminal = true;
  std::vector<double> flat_rows;
  std::size_t n_rows = 0;
  const std::size_t w = 2 * 2 + 2 + 2;  // [s|a|r|s'|d]
  for (std::size_t e = 0; e < episodes; ++e) {
    SeededRng ep_rng = rng.child(e);
    std::vector<double> obs = env.reset();
    std::vector<double> ep_rows;
    std::size_t ep_len = 0;
    for (std::size_t t = 0; t < spec.max_steps; ++t) {
      const std::vector<double> a = policy(obs, ep_rng);
      const auto res = env.step(a);
      // Terminal rows store a zeroed next state.
      const std::vector<double> next =
          res.done ? std::vector<double>{0.0, 0.0} : res.obs;
      ep_rows.insert(ep_rows.end(), obs.begin(), obs.end());
      ep_rows.insert(ep_rows.end(), a.begin(), a.end());
      ep_rows.push_back(res.reward);
      ep_rows.insert(ep_rows.end(), next.begin(), next.end());
      ep_rows.push_back(res.done ? 1.0 : 0.0);
      ++ep_len;
      obs = res.obs;
      if (res.done) break;
    }
    flat_rows.insert(flat_rows.end(), ep_rows.begin(), ep_rows.end());
    n_rows += ep_len;
    Trajectory traj;
    traj.state_dim = 2;
    traj.action_dim = 2;
    traj.steps = Tensor::from({ep_len, w}, std::move(ep_rows));
    traj.validate();
    out.trajectories.push_back(std::move(traj));
  }
  out.transitions.rows = Tensor::from({n_rows, w}, std::move(flat_rows));
  out.transitions.validate();
  return out;
}

BcPolicy train_bc(const TransitionDataset& data, const BcConfig& cfg, SeededRng rng) {
  data.validate();
  if (data.count() == 0) throw std::invalid_argument("train_bc: empty dataset");
  if (cfg.batch == 0) throw std::invalid_argument("train_bc: batch must be positive");
  const std::size_t n = data.count();
  const std::size_t s = data.state_dim, a = data.action_dim;

  BcPolicy bc;
  bc.spec.input_dim = s;
  bc.spec.output_dim = a;
  bc.spec.hidden = cfg.hidden;
  bc.params = init_params(bc.spec, rng.child(1));

  Adam opt;
  opt.lr = cfg.lr;
  SeededRng batch_rng = rng.child(2);
  const std::size_t steps_per_epoch = (n + cfg.batch - 1) / cfg.batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    SeededRng er = batch_rng.child(epoch);
    double epoch_loss = 0.0;
    for (std::size_t bi = 0; bi < steps_per_epoch; ++bi) {
      SeededRng br = er.child(bi);
      const std::size_t bsz = std::min(cfg.batch, n);
      const bool full = bsz == n;  // batch >= dataset: exact full-batch sweep
      std::vector<double> xs(bsz * s), ys(bsz * a);
      for (std::size_t i = 0; i < bsz; ++i) {
        const std::size_t r = full ? i : br.uniform_index(n);
        for (std::size_t c = 0; c < s; ++c) xs[i * s + c] = data.rows.at(r, c);
        for (std::size_t c = 0; c < a; ++c) ys[i * a + c] = data.rows.at(r, s + c);
      }
      const Tensor x = Tensor::from({bsz, s}, std::move(xs));
      const Tensor y = Tensor::from({bsz, a}, std::move(ys));
      Graph g;
      const int xn = g.input(x);
      const int yn = g.input(y);
      std::vector<int> pnodes;
      const int pred = apply_network(g, bc.spec, bc.params, xn, pnodes);
      const int loss = g.scale(g.sum_sq(g.sub(pred, yn)), 1.0 / static_cast<double>(bsz));
      g.backward(loss);
      epoch_loss += g.val(loss).data[0];
      opt.step(bc.params, collect_grads(g, bc.params, pnodes));
    }
    bc.loss_curve.push_back(epoch_loss / static_cast<double>(steps_per_epoch));
  }
  return bc;
}

Policy make_bc_policy(const BcPolicy& bc) {
  return [spec = bc.spec, params = bc.params](const std::vector<double>& obs, SeededRng& rng) {
    (void)rng;
    std::vector<double> in = obs;
    const Tensor out = forward(spec, params, Tensor::row(std::move(in)));
    std::vector<double> a = out.data;
    for (double& v : a) v = std::clamp(v, -1.0, 1.0);
    return a;
  };
}

EvalResult evaluate_policy(const GridWorldSpec& spec, const Policy& policy, std::size_t episodes,
                           SeededRng rng) {
  if (episodes == 0) throw std::invalid_argument("evaluate_policy: need at least one episode");
  GridWorld env(spec);
  EvalResult res;
  for (std::size_t e = 0; e < episodes; ++e) {
    SeededRng ep_rng = rng.child(e);
    std::vector<double> obs = env.reset();
    double ret = 0.0;
    bool reached = false;
    for (std::size_t t = 0; t < spec.max_steps; ++t) {
      const auto step = env.step(policy(obs, ep_rng));
      ret += step.reward;
      obs = step.obs;
      if (step.done) {
        reached = true;
        break;
      }
    }
    res.mean_return += ret;
    res.success_rate += reached ? 1.0 : 0.0;
  }
  res.mean_return /= static_cast<double>(episodes);
  res.success_rate /= static_cast<double>(episodes);
  return res;
}

double normalized_score(double raw, double random_ref, double expert_ref) {
  if (expert_ref == random_ref)
    throw std::invalid_argument("normalized_score: expert and random anchors coincide");
  return 100.0 * (raw - random_ref) / (expert_ref - random_ref);
}

ReturnStats evaluate(const GridWorldSpec& spec, const Policy& policy, std::size_t episodes,
                     double random_ref, double expert_ref, SeededRng rng) {
  ReturnStats out;
  out.raw = evaluate_policy(spec, policy, episodes, std::move(rng)).mean_return;
  out.random_ref = random_ref;
  out.expert_ref = expert_ref;
  out.normalized = normalized_score(out.raw, random_ref, expert_ref);
  return out;
}

}  // namespace porl
