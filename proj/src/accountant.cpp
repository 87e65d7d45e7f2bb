#include "porl/accountant.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace porl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b), n = std::min(a, b);
  return m + std::log1p(std::exp(n - m));
}

double log_sub(double a, double b) {
  if (b == kNegInf) return a;
  if (a == b) return kNegInf;
  if (b > a) throw std::domain_error("log_sub: negative result");
  return a + std::log1p(-std::exp(b - a));
}

// ln(erfc(x)), stable for large positive x where erfc underflows.
double log_erfc(double x) {
  if (x < 25.0) return std::log(std::erfc(x));
  double x2 = x * x;
  double series = 1.0 - 0.5 / x2 + 0.75 / (x2 * x2) - 1.875 / (x2 * x2 * x2);
  return -x2 - std::log(x) - 0.5 * std::log(M_PI) + std::log(series);
}

double log_comb(double n, double k) {
  return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1);
}

void check_qs(double q, double sigma) {
  if (!(q > 0.0) || q > 1.0) throw std::invalid_argument("sampling ratio must be in (0, 1]");
  if (!(sigma > 0.0)) throw std::invalid_argument("noise multiplier must be positive");
}

// Closed-form integer-order cost (log-domain binomial expansion).
double rdp_int(double q, double sigma, int alpha) {
  if (q == 1.0) return alpha / (2.0 * sigma * sigma);
  double s2 = sigma * sigma;
  double m = kNegInf;
  std::vector<double> terms(alpha + 1);
  for (int j = 0; j <= alpha; ++j) {
    terms[j] = log_comb(alpha, j) + (alpha - j) * std::log1p(-q) + j * std::log(q) +
               j * (j - 1) / (2.0 * s2);
    m = std::max(m, terms[j]);
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return std::max(0.0, (m + std::log(s)) / (alpha - 1));
}

// Generalized binomial coefficient binom(alpha, i) for fractional alpha,
// returned as (log |value|, sign).
std::pair<double, int> log_binom(double alpha, int i) {
  double log_abs = 0.0;
  int sign = 1;
  for (int k = 0; k < i; ++k) {
    double f = alpha - k;
    if (f < 0) sign = -sign;
    log_abs += std::log(std::fabs(f));
  }
  log_abs -= std::lgamma(i + 1.0);
  return {log_abs, sign};
}

// Fractional-order cost via the two-sided series with Gaussian-tail weights.
double rdp_frac(double q, double sigma, double alpha) {
  double log_a0 = kNegInf, log_a1 = kNegInf;
  double s2 = sigma * sigma;
  double z0 = s2 * std::log(1.0 / q - 1.0) + 0.5;
  double sqrt2s = std::sqrt(2.0) * sigma;
  for (int i = 0;; ++i) {
    auto [log_coef, sign] = log_binom(alpha, i);
    double j = alpha - i;
    double log_t0 = log_coef + i * std::log(q) + j * std::log1p(-q);
    double log_t1 = log_coef + j * std::log(q) + i * std::log1p(-q);
    double log_e0 = std::log(0.5) + log_erfc((i - z0) / sqrt2s);
    double log_e1 = std::log(0.5) + log_erfc((z0 - j) / sqrt2s);
    double log_s0 = log_t0 + (double(i) * i - i) / (2.0 * s2) + log_e0;
    double log_s1 = log_t1 + (j * j - j) / (2.0 * s2) + log_e1;
    if (sign > 0) {
      log_a0 = log_add(log_a0, log_s0);
      log_a1 = log_add(log_a1, log_s1);
    } else {
      log_a0 = log_sub(log_a0, log_s0);
      log_a1 = log_sub(log_a1, log_s1);
    }
    if (std::max(log_s0, log_s1) < -30.0) break;
    // Very large sigma with moderate q makes the series decay only
    // polynomially; fall back to the plain-Gaussian cost, which upper-bounds
    // the subsampled cost (the mixture is no farther from the base than the
    // shifted Gaussian itself), so the account stays conservative.
    if (i > 5000) return alpha / (2.0 * s2);
  }
  return std::max(0.0, log_add(log_a0, log_a1) / (alpha - 1));
}

}  // namespace

void SgmParams::validate() const {
  check_qs(q, sigma);
  if (steps < 1) throw std::invalid_argument("step count must be at least 1");
}

double rdp_single_step(double q, double sigma, int alpha) {
  check_qs(q, sigma);
  if (alpha < 2) throw std::invalid_argument("integer order must be at least 2");
  return rdp_int(q, sigma, alpha);
}

double rdp_step_cost(double q, double sigma, double alpha) {
  check_qs(q, sigma);
  if (!(alpha > 1.0)) throw std::invalid_argument("order must exceed 1");
  if (q == 1.0) return alpha / (2.0 * sigma * sigma);  // plain Gaussian, any order
  if (alpha == std::floor(alpha) && alpha <= 1e6) return rdp_int(q, sigma, int(alpha));
  return rdp_frac(q, sigma, alpha);
}

std::vector<double> default_orders() {
  std::vector<double> orders;
  for (int a = 2; a <= 256; ++a) orders.push_back(a);
  return orders;
}

std::vector<double> dense_orders() {
  std::vector<double> orders;
  for (int x = 11; x <= 109; ++x) {
    if (x % 10 == 0) continue;  // integers come from the 2..256 block
    orders.push_back(x / 10.0);
  }
  auto ints = default_orders();
  orders.insert(orders.end(), ints.begin(), ints.end());
  std::sort(orders.begin(), orders.end());
  return orders;
}

RdpCurve sgm_curve(double q, double sigma, const std::vector<double>& orders) {
  if (orders.empty()) throw std::invalid_argument("empty order grid");
  RdpCurve c;
  c.orders = orders;
  c.gamma.reserve(orders.size());
  for (double a : orders) c.gamma.push_back(rdp_step_cost(q, sigma, a));
  return c;
}

RdpCurve sgm_curve(double q, double sigma) { return sgm_curve(q, sigma, dense_orders()); }

RdpCurve compose(RdpCurve curve, std::int64_t k) {
  if (k < 1) throw std::invalid_argument("composition count must be at least 1");
  for (double& g : curve.gamma) g *= double(k);
  return curve;
}

PrivacyParams to_dp(const RdpCurve& curve, double delta, DpConversion conversion) {
  if (curve.orders.empty()) throw std::invalid_argument("empty order grid");
  if (!(delta > 0.0) || !(delta < 1.0)) throw std::invalid_argument("delta must be in (0, 1)");
  PrivacyParams best;
  best.delta = delta;
  best.epsilon = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < curve.orders.size(); ++i) {
    double a = curve.orders[i], g = curve.gamma[i];
    double eps;
    if (conversion == DpConversion::kClassic) {
      eps = g + std::log(1.0 / delta) / (a - 1.0);
    } else {
      eps = g - (std::log(delta) + std::log(a)) / (a - 1.0) + std::log1p(-1.0 / a);
    }
    if (eps < best.epsilon) {
      best.epsilon = eps;
      best.order = a;
    }
  }
  best.epsilon = std::max(0.0, best.epsilon);
  return best;
}

double calibrate_sigma(double q, std::int64_t steps, double eps_target, double delta,
                       DpConversion conversion, double tol) {
  if (!(eps_target > 0.0)) throw std::invalid_argument("epsilon target must be positive");
  auto orders = dense_orders();
  auto eps_at = [&](double sigma) {
    return to_dp(compose(sgm_curve(q, sigma, orders), steps), delta, conversion).epsilon;
  };
  double lo = 1e-3, hi = 1e4;
  double e_lo = eps_at(lo), e_hi = eps_at(hi);
  if (e_hi > eps_target || e_lo < eps_target) {
    std::ostringstream msg;
    msg << "epsilon target " << eps_target << " not attainable: sigma in [" << lo << ", " << hi
        << "] spans epsilon [" << e_hi << ", " << e_lo << "]";
    throw std::runtime_error(msg.str());
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (eps_at(mid) > eps_target) {
      lo = mid;
    } else {
      hi = mid;
      if (eps_at(hi) >= eps_target * (1.0 - tol)) return hi;
    }
  }
  double achieved = eps_at(hi);
  if (achieved <= eps_target && achieved >= eps_target * (1.0 - tol)) return hi;
  std::ostringstream msg;
  msg << "calibration stalled: bracket [" << lo << ", " << hi << "], epsilon " << achieved
      << " vs target " << eps_target;
  throw std::runtime_error(msg.str());
}

}  // namespace porl
