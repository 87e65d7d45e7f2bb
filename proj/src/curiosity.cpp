#include "porl/curiosity.h"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "porl/graph.h"

namespace porl {

void CuriosityConfig::validate() const {
  if (rate < 0.0 || rate > 1.0) throw std::invalid_argument("curiosity rate must be in [0, 1]");
  if (predictor_lr < 0.0) throw std::invalid_argument("predictor learning rate must be >= 0");
}

RndPair make_rnd_pair(std::size_t input_dim, std::size_t out_dim, std::size_t width,
                      SeededRng rng) {
  RndPair p;
  p.target_net = NetworkSpec{input_dim, out_dim, {width, width, width, width}, "relu", false, {}};
  p.predictor_net = NetworkSpec{input_dim, out_dim, {width, width}, "relu", false, {}};
  p.target_params = init_params(p.target_net, rng.child(1));
  p.predictor_params = init_params(p.predictor_net, rng.child(2));
  return p;
}

std::vector<double> curiosity_scores(const RndPair& pair, const Tensor& batch) {
  Tensor want = forward(pair.target_net, pair.target_params, batch);
  Tensor got = forward(pair.predictor_net, pair.predictor_params, batch);
  std::vector<double> scores(batch.rows(), 0.0);
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < want.cols(); ++c) {
      double d = got.at(r, c) - want.at(r, c);
      s += d * d;
    }
    scores[r] = s;
  }
  return scores;
}

double curiosity_score(const RndPair& pair, const Tensor& x_row) {
  if (x_row.rows() != 1) throw std::invalid_argument("curiosity_score expects a single row");
  return curiosity_scores(pair, x_row)[0];
}

void update_predictor(RndPair& pair, const Tensor& batch, double lr) {
  if (batch.rows() == 0) throw std::invalid_argument("update_predictor: empty batch");
  Tensor want = forward(pair.target_net, pair.target_params, batch);
  Graph g;
  int in = g.input(batch);
  std::vector<int> pnodes;
  int pred = apply_network(g, pair.predictor_net, pair.predictor_params, in, pnodes);
  int loss = g.scale(g.sum_sq(g.sub(pred, g.input(want))), 1.0 / double(batch.rows()));
  g.backward(loss);
  ParamSet grads = collect_grads(g, pair.predictor_params, pnodes);
  ps_axpy(pair.predictor_params, -lr, grads);
}

ReplacePlan plan_replacement(const std::vector<double>& scores, std::size_t batch_rows, double p,
                             SeededRng& rng) {
  if (scores.size() != batch_rows)
    throw std::invalid_argument("replacement: scores/batch length mismatch");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("replacement: rate must be in [0, 1]");
  std::size_t m = static_cast<std::size_t>(p * double(batch_rows));
  m = std::min(m, batch_rows);

  ReplacePlan plan;
  if (m == 0) return plan;

  // Highest score first; equal scores keep their batch order.
  std::vector<std::size_t> order(batch_rows);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  plan.synth_rows.assign(order.begin(), order.begin() + m);

  // m distinct positions, uniform over the batch (partial Fisher-Yates).
  std::vector<std::size_t> pos(batch_rows);
  std::iota(pos.begin(), pos.end(), 0);
  for (std::size_t k = 0; k < m; ++k) {
    std::size_t j = k + rng.uniform_index(batch_rows - k);
    std::swap(pos[k], pos[j]);
  }
  plan.positions.assign(pos.begin(), pos.begin() + m);
  return plan;
}

Tensor curious_replace(const Tensor& real, const Tensor& synth, const std::vector<double>& scores,
                       double p, SeededRng& rng) {
  if (real.rows() != synth.rows() || real.cols() != synth.cols())
    throw std::invalid_argument("replacement: real/synthetic batch shape mismatch");
  ReplacePlan plan = plan_replacement(scores, real.rows(), p, rng);
  Tensor out = real;
  for (std::size_t k = 0; k < plan.synth_rows.size(); ++k) {
    std::size_t src = plan.synth_rows[k], dst = plan.positions[k];
    for (std::size_t c = 0; c < real.cols(); ++c) out.at(dst, c) = synth.at(src, c);
  }
  return out;
}

}  // namespace porl
