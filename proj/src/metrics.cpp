#include "porl/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>

#include "porl/graph.h"
#include "porl/net.h"

namespace porl {

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double sup = 0.0;
  while (i < a.size() && j < b.size()) {
    // Advance both ECDFs past the next value, then compare; once either
    // sample is exhausted the gap can only shrink, so the loop may stop.
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    sup = std::max(sup, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return sup;
}

namespace {

std::vector<double> column_of(const Tensor& t, std::size_t c) {
  std::vector<double> out(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) out[r] = t.at(r, c);
  return out;
}

// Average ranks (1-based), ties share the mean of their rank range.
std::vector<double> average_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double shared = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double marginal_fidelity(const Tensor& real, const Tensor& synth) {
  if (real.cols() != synth.cols())
    throw std::invalid_argument("marginal_fidelity: column count mismatch");
  if (real.rows() == 0 || synth.rows() == 0)
    throw std::invalid_argument("marginal_fidelity: empty dataset");
  if (real.cols() == 0) return 1.0;
  double total = 0.0;
  for (std::size_t c = 0; c < real.cols(); ++c)
    total += ks_distance(column_of(real, c), column_of(synth, c));
  return 1.0 - total / static_cast<double>(real.cols());
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n == 0) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  // A constant column carries no correlation signal; report zero rather than
  // propagating a 0/0.
  if (sxx <= 1e-24 || syy <= 1e-24) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  return pearson(average_ranks(x), average_ranks(y));
}

double correlation_fidelity(const Tensor& real, const Tensor& synth, bool rank_mode) {
  if (real.cols() != synth.cols())
    throw std::invalid_argument("correlation_fidelity: column count mismatch");
  if (real.rows() == 0 || synth.rows() == 0)
    throw std::invalid_argument("correlation_fidelity: empty dataset");
  const std::size_t d = real.cols();
  if (d < 2) return 1.0;  // no pairs to disagree on
  std::vector<std::vector<double>> rc(d), sc(d);
  for (std::size_t c = 0; c < d; ++c) {
    rc[c] = column_of(real, c);
    sc[c] = column_of(synth, c);
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const double rr = rank_mode ? spearman(rc[i], rc[j]) : pearson(rc[i], rc[j]);
      const double rs = rank_mode ? spearman(sc[i], sc[j]) : pearson(sc[i], sc[j]);
      total += std::abs(rr - rs) / 2.0;  // correlations differ by at most 2
      ++pairs;
    }
  }
  return 1.0 - total / static_cast<double>(pairs);
}

namespace {

// Pads/truncates a trajectory to cfg.max_len steps and flattens it row-major.
std::vector<double> flatten_trajectory(const Trajectory& t, std::size_t max_len) {
  const std::size_t w = t.width();
  std::vector<double> flat(max_len * w, 0.0);
  const std::size_t keep = std::min(max_len, t.steps.rows());
  for (std::size_t r = 0; r < keep; ++r)
    for (std::size_t c = 0; c < w; ++c) flat[r * w + c] = t.steps.at(r, c);
  return flat;
}

Tensor flatten_set(const std::vector<Trajectory>& ts, std::size_t max_len, std::size_t w) {
  Tensor out = Tensor::from({ts.size(), max_len * w}, std::vector<double>(ts.size() * max_len * w, 0.0));
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i].width() != w) throw std::invalid_argument("trajscore: trajectory width mismatch");
    const auto flat = flatten_trajectory(ts[i], max_len);
    for (std::size_t c = 0; c < flat.size(); ++c) out.at(i, c) = flat[c];
  }
  return out;
}

double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu <= 0.0 || nv <= 0.0) return 0.0;
  return dot / std::sqrt(nu * nv);
}

}  // namespace

double trajscore(const std::vector<Trajectory>& real, const std::vector<Trajectory>& synth,
                 const TrajScoreConfig& cfg, SeededRng rng) {
  if (real.empty() || synth.empty()) throw std::invalid_argument("trajscore: empty trajectory set");
  if (cfg.max_len == 0 || cfg.embed_dim == 0 || cfg.hidden == 0)
    throw std::invalid_argument("trajscore: config dimensions must be positive");
  const std::size_t w = real.front().width();
  const Tensor real_flat = flatten_set(real, cfg.max_len, w);
  const Tensor synth_flat = flatten_set(synth, cfg.max_len, w);
  const std::size_t flat_dim = cfg.max_len * w;

  NetworkSpec enc;
  enc.input_dim = flat_dim;
  enc.output_dim = cfg.embed_dim;
  enc.hidden = {cfg.hidden};
  NetworkSpec dec;
  dec.input_dim = cfg.embed_dim;
  dec.output_dim = flat_dim;
  dec.hidden = {cfg.hidden};
  ParamSet enc_p = init_params(enc, rng.child(1));
  ParamSet dec_p = init_params(dec, rng.child(2));

  Adam enc_opt, dec_opt;
  enc_opt.lr = dec_opt.lr = cfg.lr;
  const double inv_n = 1.0 / static_cast<double>(real_flat.rows());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Graph g;
    const int x = g.input(real_flat);
    std::vector<int> enc_nodes, dec_nodes;
    const int z = apply_network(g, enc, enc_p, x, enc_nodes);
    const int xhat = apply_network(g, dec, dec_p, z, dec_nodes);
    const int loss = g.scale(g.sum_sq(g.sub(xhat, x)), inv_n);
    g.backward(loss);
    enc_opt.step(enc_p, collect_grads(g, enc_p, enc_nodes));
    dec_opt.step(dec_p, collect_grads(g, dec_p, dec_nodes));
  }

  const Tensor real_emb = forward(enc, enc_p, real_flat);
  const Tensor synth_emb = forward(enc, enc_p, synth_flat);
  double total = 0.0;
  for (std::size_t s = 0; s < synth_emb.rows(); ++s) {
    std::vector<double> u = synth_emb.row_slice(s).data;
    double best = -1.0;
    for (std::size_t r = 0; r < real_emb.rows(); ++r)
      best = std::max(best, cosine(u, real_emb.row_slice(r).data));
    total += best;
  }
  return total / static_cast<double>(synth_emb.rows());
}

MiaReport mia_tpr_at_fpr(const std::vector<double>& member_losses,
                         const std::vector<double>& non_member_losses,
                         const std::vector<double>& fpr_levels) {
  if (member_losses.empty() || non_member_losses.empty())
    throw std::invalid_argument("mia_tpr_at_fpr: empty loss set");
  std::vector<double> mem = member_losses, non = non_member_losses;
  std::sort(mem.begin(), mem.end());
  std::sort(non.begin(), non.end());
  const double nm = static_cast<double>(mem.size());
  const double nn = static_cast<double>(non.size());

  // Operating points of the "member iff loss <= threshold" attack, one per
  // distinct loss value, plus the reject-everything point. At equal FPR only
  // the best TPR is kept (the attacker picks the threshold).
  std::vector<double> thresholds = mem;
  thresholds.insert(thresholds.end(), non.begin(), non.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  std::vector<std::pair<double, double>> roc;  // (fpr, tpr), fpr strictly increasing
  roc.emplace_back(0.0, 0.0);
  for (double t : thresholds) {
    const double fpr =
        static_cast<double>(std::upper_bound(non.begin(), non.end(), t) - non.begin()) / nn;
    const double tpr =
        static_cast<double>(std::upper_bound(mem.begin(), mem.end(), t) - mem.begin()) / nm;
    if (fpr == roc.back().first)
      roc.back().second = std::max(roc.back().second, tpr);
    else
      roc.emplace_back(fpr, tpr);
  }
  if (roc.back().first < 1.0) roc.emplace_back(1.0, 1.0);

  MiaReport report;
  report.fpr_levels = fpr_levels;
  for (double level : fpr_levels) {
    if (level < 0.0 || level > 1.0)
      throw std::invalid_argument("mia_tpr_at_fpr: fpr level outside [0, 1]");
    // Linear interpolation between the surrounding operating points.
    std::size_t hi = 0;
    while (roc[hi].first < level) ++hi;
    double tpr;
    if (roc[hi].first == level) {
      tpr = roc[hi].second;
    } else {
      const auto& [f0, t0] = roc[hi - 1];
      const auto& [f1, t1] = roc[hi];
      tpr = t0 + (t1 - t0) * (level - f0) / (f1 - f0);
    }
    report.tpr.push_back(tpr);
  }
  return report;
}

}  // namespace porl
