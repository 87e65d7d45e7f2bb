#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "porl/diffusion.h"
#include "porl/net.h"
#include "porl/rng.h"

using namespace porl;

namespace {

// Denoiser whose prediction is scale * x + offset, ignoring time features.
Denoiser linear_denoiser(std::size_t dim, std::size_t cond_dim, double scale, double offset) {
  Denoiser d = make_denoiser(dim, cond_dim, {}, 8, SeededRng(0));
  Tensor& w = *d.params.find("w0");
  for (double& v : w.data) v = 0.0;
  for (std::size_t i = 0; i < dim; ++i) w.at(i, i) = scale;
  Tensor& b = *d.params.find("b0");
  for (double& v : b.data) v = offset;
  return d;
}

}  // namespace

TEST_CASE("noise schedule construction") {
  NoiseSchedule s1 = make_schedule(1, 0.5, 0.5);
  CHECK(s1.alpha_bar[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s1.alpha_bar[0] == 1.0);

  NoiseSchedule s3 = make_schedule(3, 0.1, 0.1);
  CHECK(s3.alpha_bar[3] == doctest::Approx(0.729).epsilon(1e-12));

  NoiseSchedule big = make_schedule(1000, 1e-4, 0.02);
  CHECK(big.alpha_bar[1000] < 1e-4);
  for (std::size_t t = 1; t <= big.T; ++t) {
    CHECK(big.alpha_bar[t] < big.alpha_bar[t - 1]);
    CHECK(big.beta[t] > 0.0);
    CHECK(big.beta[t] < 1.0);
    CHECK(big.sigma[t] == doctest::Approx(std::sqrt(big.beta[t])));
  }
  CHECK(big.beta[1] == doctest::Approx(1e-4));
  CHECK(big.beta[1000] == doctest::Approx(0.02));

  CHECK_THROWS(make_schedule(0, 0.1, 0.2));
  CHECK_THROWS(make_schedule(10, 0.0, 0.2));
  CHECK_THROWS(make_schedule(10, 0.3, 0.2));
  CHECK_THROWS(make_schedule(10, 0.1, 1.0));
}

TEST_CASE("forward corruption") {
  NoiseSchedule s = make_schedule(8, 1e-3, 0.3);
  Tensor x0 = Tensor::from({2, 3}, {1, -2, 3, 0.5, 0, -1});
  Tensor e = Tensor::from({2, 3}, {0.3, 0.1, -0.8, 1.2, -0.4, 0.9});

  // t = 0 convention: the data itself.
  Tensor same = noise_data(x0, 0, e, s);
  CHECK(same.data == x0.data);

  // Zero data isolates the noise term.
  Tensor zero(2, 3);
  Tensor only_noise = noise_data(zero, 5, e, s);
  double b = std::sqrt(1.0 - s.alpha_bar[5]);
  for (std::size_t i = 0; i < e.size(); ++i)
    CHECK(only_noise[i] == doctest::Approx(b * e[i]).epsilon(1e-15));

  Tensor mid = noise_data(x0, 3, e, s);
  double sa = std::sqrt(s.alpha_bar[3]), sb = std::sqrt(1.0 - s.alpha_bar[3]);
  for (std::size_t i = 0; i < e.size(); ++i)
    CHECK(mid[i] == doctest::Approx(sa * x0[i] + sb * e[i]).epsilon(1e-15));

  CHECK_THROWS(noise_data(x0, 9, e, s));
  CHECK_THROWS(noise_data(x0, 3, Tensor(1, 3), s));
}

TEST_CASE("terminal-step output decorrelates from the data") {
  NoiseSchedule s = make_schedule(1000, 1e-4, 0.02);
  SeededRng rng(77);
  const int n = 10000;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    Tensor x0 = Tensor::row({rng.normal()});
    Tensor e = Tensor::row({rng.normal()});
    double y = noise_data(x0, s.T, e, s)[0];
    sx += x0[0]; sy += y; sxx += x0[0] * x0[0]; syy += y * y; sxy += x0[0] * y;
  }
  double cov = sxy / n - (sx / n) * (sy / n);
  double vx = sxx / n - (sx / n) * (sx / n);
  double vy = syy / n - (sy / n) * (sy / n);
  CHECK(std::fabs(cov / std::sqrt(vx * vy)) < 0.05);
}

TEST_CASE("variance preservation under corruption") {
  NoiseSchedule s = make_schedule(64, 1e-3, 0.05);
  SeededRng rng(31);
  const int n = 10000;
  std::size_t t = 32;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    // Standardized two-point data: mean 0, variance 1.
    Tensor x0 = Tensor::row({rng.uniform() < 0.5 ? -1.0 : 1.0});
    Tensor e = Tensor::row({rng.normal()});
    double y = noise_data(x0, t, e, s)[0];
    sum += y;
    sum2 += y * y;
  }
  double var = sum2 / n - (sum / n) * (sum / n);
  // Expected alpha_bar * 1 + (1 - alpha_bar) = 1; three standard errors of a
  // variance estimate at n = 1e4 is about 0.04-0.05.
  CHECK(std::fabs(var - 1.0) < 0.05);
}

TEST_CASE("training loss: exact-inversion denoiser reaches zero") {
  // With T = 1 and x0 = 0, x_1 = sqrt(1 - alpha_bar_1) e, so a pure scaling
  // net recovers e exactly and the loss vanishes.
  NoiseSchedule s = make_schedule(1, 0.36, 0.36);
  double inv = 1.0 / std::sqrt(1.0 - s.alpha_bar[1]);
  Denoiser d = linear_denoiser(3, 0, inv, 0.0);
  SeededRng rng(5);
  LossEval ev = diffusion_loss(d, s, Tensor(4, 3), rng);
  CHECK(ev.value < 1e-20);
  CHECK(ps_norm(ev.grads) < 1e-9);
}

TEST_CASE("training loss: zero denoiser averages to the data dimension") {
  NoiseSchedule s = make_schedule(16, 1e-3, 0.1);
  Denoiser d = linear_denoiser(4, 0, 0.0, 0.0);
  SeededRng rng(6);
  LossEval ev = diffusion_loss(d, s, Tensor(2000, 4), rng);
  CHECK(std::fabs(ev.value - 4.0) < 0.2);
}

TEST_CASE("training loss matches a straight-line re-computation") {
  NoiseSchedule s = make_schedule(12, 1e-3, 0.2);
  Denoiser d = make_denoiser(2, 0, {5}, 8, SeededRng(9));
  Tensor batch = Tensor::from({3, 2}, {0.4, -1.1, 2.0, 0.3, -0.7, 0.9});
  SeededRng rng(42);
  LossEval ev = diffusion_loss(d, s, batch, rng);

  // Re-draw the same child streams and recompute with plain loops.
  double total = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    SeededRng ri = SeededRng(42).child(i);
    std::size_t t = ri.uniform_index(12) + 1;
    Tensor e = gaussian(ri, {1, 2}, 1.0);
    Tensor x0 = batch.row_slice(i);
    Tensor xt(1, 2);
    for (int c = 0; c < 2; ++c)
      xt[c] = std::sqrt(s.alpha_bar[t]) * x0[c] + std::sqrt(1 - s.alpha_bar[t]) * e[c];
    Tensor pred = d.predict(xt, t, s);
    for (int c = 0; c < 2; ++c) total += (pred[c] - e[c]) * (pred[c] - e[c]);
  }
  CHECK(ev.value == doctest::Approx(total / 3.0).epsilon(1e-12));

  // Empty batch is rejected.
  SeededRng r2(1);
  CHECK_THROWS(diffusion_loss(d, s, Tensor(0, 2), r2));
}

TEST_CASE("conditional loss: perfect, constant-offset, and mismatch cases") {
  NoiseSchedule s = make_schedule(1, 0.36, 0.36);
  double inv = 1.0 / std::sqrt(1.0 - s.alpha_bar[1]);

  Denoiser perfect = linear_denoiser(3, 2, inv, 0.0);
  Tensor conds(4, 2);
  SeededRng rng(7);
  LossEval ev = conditional_loss(perfect, s, Tensor(4, 3), conds, rng);
  CHECK(ev.value < 1e-9);

  // Off by one in every coordinate: absolute error sums to the data dim.
  Denoiser off = linear_denoiser(3, 2, inv, 1.0);
  SeededRng rng2(7);
  LossEval ev2 = conditional_loss(off, s, Tensor(4, 3), conds, rng2);
  CHECK(ev2.value == doctest::Approx(3.0).epsilon(1e-9));

  SeededRng rng3(7);
  CHECK_THROWS(conditional_loss(off, s, Tensor(4, 3), Tensor(3, 2), rng3));
}

TEST_CASE("sampling step: zero predictor, final-step determinism, mean variants") {
  NoiseSchedule s = make_schedule(4, 0.1, 0.4);
  Denoiser zero = linear_denoiser(2, 0, 0.0, 0.0);
  Tensor x = Tensor::row({1.0, -2.0});

  // Zero prediction and t = 1: pure rescale by 1/sqrt(alpha_1), no noise.
  SeededRng rng(3);
  Tensor out = sample_step(x, 1, zero, s, rng);
  for (int c = 0; c < 2; ++c)
    CHECK(out[c] == doctest::Approx(x[c] / std::sqrt(s.alpha[1])).epsilon(1e-15));

  // t > 1 adds sigma_t-scaled noise around the rescaled mean.
  SeededRng rng2(3);
  Tensor out2 = sample_step(x, 3, zero, s, rng2);
  SeededRng rng3(3);
  for (int c = 0; c < 2; ++c) {
    double want = x[c] / std::sqrt(s.alpha[3]) + s.sigma[3] * rng3.normal();
    CHECK(out2[c] == doctest::Approx(want).epsilon(1e-15));
  }

  // Identity predictor separates the two posterior-mean conventions.
  Denoiser ident = linear_denoiser(2, 0, 1.0, 0.0);
  SeededRng rng4(3), rng5(3);
  Tensor std_mean = sample_step(x, 1, ident, s, rng4);
  Tensor lit_mean = sample_step(x, 1, ident, s, rng5, nullptr, true);
  Tensor pred = ident.predict(x, 1, s);
  for (int c = 0; c < 2; ++c) {
    double cs = (1 - s.alpha[1]) / std::sqrt(1 - s.alpha_bar[1]);
    double cl = (1 - s.alpha[1]) / std::sqrt(1 - s.beta[1]);
    CHECK(std_mean[c] == doctest::Approx((x[c] - cs * pred[c]) / std::sqrt(s.alpha[1])));
    CHECK(lit_mean[c] == doctest::Approx((x[c] - cl * pred[c]) / std::sqrt(s.alpha[1])));
    CHECK(std_mean[c] != lit_mean[c]);
  }

  SeededRng rng6(3);
  CHECK_THROWS(sample_step(x, 0, zero, s, rng6));
  CHECK_THROWS(sample_step(x, 5, zero, s, rng6));
}

TEST_CASE("full rollout with a linear predictor follows the affine recursion") {
  NoiseSchedule s = make_schedule(6, 0.05, 0.3);
  const double a = 0.7, b = -0.2;
  Denoiser lin = linear_denoiser(1, 0, a, b);
  Tensor got = sample(lin, s, 3, SeededRng(11));

  for (std::size_t i = 0; i < 3; ++i) {
    SeededRng ri = SeededRng(11).child(i);
    double x = ri.normal();  // initial Gaussian
    for (std::size_t t = s.T; t >= 1; --t) {
      double coeff = (1 - s.alpha[t]) / std::sqrt(1 - s.alpha_bar[t]);
      x = (x - coeff * (a * x + b)) / std::sqrt(s.alpha[t]);
      if (t > 1) x += s.sigma[t] * ri.normal();
    }
    CHECK(got.at(i, 0) == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("sampling determinism and empty request") {
  NoiseSchedule s = make_schedule(8, 1e-3, 0.2);
  Denoiser d = make_denoiser(2, 0, {8}, 8, SeededRng(21));
  Tensor a = sample(d, s, 5, SeededRng(100));
  Tensor b = sample(d, s, 5, SeededRng(100));
  CHECK(a.data == b.data);

  Tensor none = sample(d, s, 0, SeededRng(100));
  CHECK(none.rows() == 0);
}

TEST_CASE("a trained denoiser recovers a two-point distribution") {
  NoiseSchedule s = make_schedule(32, 1e-3, 0.15);
  Denoiser d = make_denoiser(1, 0, {32, 32}, 8, SeededRng(55));
  Tensor data(256, 1);
  for (std::size_t i = 0; i < 256; ++i) data[i] = (i % 2 == 0) ? -1.0 : 1.0;

  Adam opt;
  opt.lr = 2e-3;
  SeededRng train(77);
  for (int step = 0; step < 1500; ++step) {
    SeededRng sr = train.child(step);
    LossEval ev = diffusion_loss(d, s, data, sr);
    opt.step(d.params, ev.grads);
  }

  Tensor samples = sample(d, s, 400, SeededRng(88));
  int close = 0;
  for (double v : samples.data)
    if (std::fabs(std::fabs(v) - 1.0) <= 0.3) ++close;
  CHECK(double(close) / 400.0 >= 0.9);
}
