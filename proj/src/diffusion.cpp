#include "porl/diffusion.h"

#include <cmath>
#include <stdexcept>

#include "porl/threads.h"

namespace porl {

NoiseSchedule make_schedule(std::size_t T, double beta_min, double beta_max) {
  if (T < 1) throw std::invalid_argument("schedule needs at least one step");
  if (!(beta_min > 0.0) || beta_min > beta_max || !(beta_max < 1.0))
    throw std::invalid_argument("beta range must satisfy 0 < beta_min <= beta_max < 1");
  NoiseSchedule s;
  s.T = T;
  s.beta.assign(T + 1, 0.0);
  s.alpha.assign(T + 1, 1.0);
  s.alpha_bar.assign(T + 1, 1.0);
  s.sigma.assign(T + 1, 0.0);
  for (std::size_t t = 1; t <= T; ++t) {
    double frac = T == 1 ? 0.0 : double(t - 1) / double(T - 1);
    s.beta[t] = beta_min + frac * (beta_max - beta_min);
    s.alpha[t] = 1.0 - s.beta[t];
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    s.sigma[t] = std::sqrt(s.beta[t]);
  }
  return s;
}

Tensor Denoiser::time_embedding(double t_norm) const {
  Tensor emb(1, time_dim);
  std::size_t half = time_dim / 2;
  for (std::size_t k = 0; k < half; ++k) {
    double phase = 2.0 * M_PI * rff_freqs[k] * t_norm;
    emb[k] = std::cos(phase);
    emb[half + k] = std::sin(phase);
  }
  return emb;
}

Tensor Denoiser::assemble(const Tensor& x, std::size_t t, std::size_t T,
                          const Tensor* cond) const {
  if (x.cols() != data_dim) throw std::invalid_argument("denoiser: data width mismatch");
  if (cond_dim > 0) {
    if (!cond) throw std::invalid_argument("denoiser: missing condition");
    if (cond->cols() != cond_dim) throw std::invalid_argument("denoiser: condition width mismatch");
    if (cond->rows() != x.rows() && cond->rows() != 1)
      throw std::invalid_argument("denoiser: condition row count mismatch");
  }
  Tensor emb = time_embedding(double(t) / double(T));
  Tensor in(x.rows(), data_dim + time_dim + cond_dim);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < data_dim; ++c) in.at(r, c) = x.at(r, c);
    for (std::size_t c = 0; c < time_dim; ++c) in.at(r, data_dim + c) = emb[c];
    for (std::size_t c = 0; c < cond_dim; ++c)
      in.at(r, data_dim + time_dim + c) = cond->at(cond->rows() == 1 ? 0 : r, c);
  }
  return in;
}

Tensor Denoiser::predict(const Tensor& x_t, std::size_t t, const NoiseSchedule& sched,
                         const Tensor* cond) const {
  return forward(net, params, assemble(x_t, t, sched.T, cond));
}

Denoiser make_denoiser(std::size_t data_dim, std::size_t cond_dim,
                       std::vector<std::size_t> hidden, std::size_t time_dim, SeededRng rng,
                       const std::string& activation) {
  if (data_dim == 0) throw std::invalid_argument("denoiser: data dim must be positive");
  if (time_dim == 0 || time_dim % 2 != 0)
    throw std::invalid_argument("denoiser: time embedding dim must be positive and even");
  Denoiser d;
  d.data_dim = data_dim;
  d.cond_dim = cond_dim;
  d.time_dim = time_dim;
  d.net = NetworkSpec{data_dim + time_dim + cond_dim, data_dim, std::move(hidden), activation,
                      false, {}};
  d.net.validate();
  SeededRng param_rng = rng.child(1);
  SeededRng freq_rng = rng.child(2);
  d.params = init_params(d.net, param_rng);
  d.rff_freqs = gaussian(freq_rng, {1, time_dim / 2}, 1.0);
  return d;
}

Tensor noise_data(const Tensor& x0, std::size_t t, const Tensor& e, const NoiseSchedule& sched) {
  if (t > sched.T) throw std::invalid_argument("noise_data: step out of range");
  if (!x0.same_shape(e)) throw std::invalid_argument("noise_data: noise shape mismatch");
  if (t == 0) return x0;
  double a = std::sqrt(sched.alpha_bar[t]);
  double b = std::sqrt(1.0 - sched.alpha_bar[t]);
  Tensor out(x0.shape);
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * e[i];
  return out;
}

LossEval diffusion_example_grad(const Denoiser& d, const NoiseSchedule& sched,
                                const Tensor& x0_row, SeededRng& rng, const Tensor* cond_row,
                                bool l1) {
  if (x0_row.rows() != 1) throw std::invalid_argument("example grad expects a single row");
  std::size_t t = rng.uniform_index(sched.T) + 1;
  Tensor e = gaussian(rng, x0_row.shape, 1.0);
  Tensor x_t = noise_data(x0_row, t, e, sched);

  Graph g;
  int in = g.input(d.assemble(x_t, t, sched.T, cond_row));
  std::vector<int> pnodes;
  int pred = apply_network(g, d.net, d.params, in, pnodes);
  int diff = g.sub(pred, g.input(e));
  int loss = l1 ? g.sum_abs(diff) : g.sum_sq(diff);
  g.backward(loss);
  LossEval out;
  out.value = g.val(loss)[0];
  out.grads = collect_grads(g, d.params, pnodes);
  return out;
}

namespace {

LossEval batch_mean_loss(const Denoiser& d, const NoiseSchedule& sched, const Tensor& batch,
                         SeededRng& rng, const Tensor* conditions, bool l1) {
  if (batch.rows() == 0) throw std::invalid_argument("diffusion loss: empty batch");
  if (conditions && conditions->rows() != batch.rows())
    throw std::invalid_argument("diffusion loss: one condition per example required");
  LossEval acc;
  acc.grads = zeros_like(d.params);
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    SeededRng ri = rng.child(i);
    Tensor cond;
    const Tensor* cp = nullptr;
    if (conditions) {
      cond = conditions->row_slice(i);
      cp = &cond;
    }
    LossEval ev = diffusion_example_grad(d, sched, batch.row_slice(i), ri, cp, l1);
    acc.value += ev.value;
    ps_axpy(acc.grads, 1.0, ev.grads);
  }
  double inv = 1.0 / double(batch.rows());
  acc.value *= inv;
  ps_scale(acc.grads, inv);
  return acc;
}

}  // namespace

LossEval diffusion_loss(const Denoiser& d, const NoiseSchedule& sched, const Tensor& batch,
                        SeededRng& rng) {
  return batch_mean_loss(d, sched, batch, rng, nullptr, false);
}

LossEval conditional_loss(const Denoiser& d, const NoiseSchedule& sched, const Tensor& batch,
                          const Tensor& conditions, SeededRng& rng) {
  return batch_mean_loss(d, sched, batch, rng, &conditions, true);
}

Tensor sample_step(const Tensor& x_t, std::size_t t, const Denoiser& d,
                   const NoiseSchedule& sched, SeededRng& rng, const Tensor* cond,
                   bool paper_literal_mean) {
  if (t < 1 || t > sched.T) throw std::invalid_argument("sample_step: step out of range");
  Tensor pred = d.predict(x_t, t, sched, cond);
  double denom = paper_literal_mean ? std::sqrt(1.0 - sched.beta[t])
                                    : std::sqrt(1.0 - sched.alpha_bar[t]);
  double coeff = (1.0 - sched.alpha[t]) / denom;
  double inv_sqrt_a = 1.0 / std::sqrt(sched.alpha[t]);
  Tensor out(x_t.shape);
  for (std::size_t i = 0; i < x_t.size(); ++i) out[i] = inv_sqrt_a * (x_t[i] - coeff * pred[i]);
  if (t > 1) {
    double s = sched.sigma[t];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * rng.normal();
  }
  return out;
}

Tensor sample(const Denoiser& d, const NoiseSchedule& sched, std::size_t n, SeededRng rng,
              const Tensor* conditions, bool paper_literal_mean) {
  if (conditions && conditions->rows() != 1 && conditions->rows() != n)
    throw std::invalid_argument("sample: conditions must broadcast or match n");
  Tensor out(n, d.data_dim);
  parallel_for(n, [&](std::size_t i) {
    SeededRng ri = rng.child(i);
    Tensor x = gaussian(ri, {1, d.data_dim}, 1.0);
    Tensor cond;
    const Tensor* cp = nullptr;
    if (conditions) {
      cond = conditions->row_slice(conditions->rows() == 1 ? 0 : i);
      cp = &cond;
    }
    for (std::size_t t = sched.T; t >= 1; --t)
      x = sample_step(x, t, d, sched, ri, cp, paper_literal_mean);
    for (std::size_t c = 0; c < d.data_dim; ++c) out.at(i, c) = x[c];
  });
  return out;
}

}  // namespace porl
