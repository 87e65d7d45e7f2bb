#pragma once

#include <cstdint>
#include <vector>

namespace porl {

// Subsampled-Gaussian-mechanism parameters: Poisson sampling ratio q, noise
// multiplier sigma, and the number of composed steps.
struct SgmParams {
  double q = 1.0;
  double sigma = 1.0;
  std::int64_t steps = 1;
  void validate() const;  // throws unless 0 < q <= 1, sigma > 0, steps >= 1
};

// Renyi-DP cost curve: gamma(alpha) over a grid of orders alpha > 1.
struct RdpCurve {
  std::vector<double> orders;
  std::vector<double> gamma;
};

struct PrivacyParams {
  double epsilon = 0.0;
  double delta = 1e-6;
  double order = 0.0;  // the order that attained the minimum in the conversion
};

// Two RDP -> (eps, delta) conversions. kClassic is the textbook bound
// eps = gamma + ln(1/delta)/(alpha-1); kTight is the refinement
// eps = gamma - (ln(delta) + ln(alpha))/(alpha-1) + ln(1 - 1/alpha),
// which is what modern accountant implementations report and what the
// calibration path uses by default.
enum class DpConversion { kClassic, kTight };

// Closed-form integer-order RDP of one subsampled-Gaussian step (binomial
// expansion, evaluated in the log domain). Throws for alpha < 2 or sigma <= 0.
double rdp_single_step(double q, double sigma, int alpha);

// RDP of one step at any order alpha > 1: integer orders use the closed form,
// fractional orders the convergent two-sided series with erfc tail weights.
double rdp_step_cost(double q, double sigma, double alpha);

// Integer orders 2..256.
std::vector<double> default_orders();
// default_orders plus fractional orders 1.1 .. 10.9 (step 0.1), which tighten
// the bound materially in the high-q regime.
std::vector<double> dense_orders();

RdpCurve sgm_curve(double q, double sigma, const std::vector<double>& orders);
RdpCurve sgm_curve(double q, double sigma);  // dense_orders

RdpCurve compose(RdpCurve curve, std::int64_t k);

PrivacyParams to_dp(const RdpCurve& curve, double delta,
                    DpConversion conversion = DpConversion::kTight);

// Smallest sigma whose composed cost converts to eps within
// [eps_target * (1 - tol), eps_target]. Throws with the searched bracket when
// the target is not attainable inside it.
double calibrate_sigma(double q, std::int64_t steps, double eps_target, double delta,
                       DpConversion conversion = DpConversion::kTight, double tol = 1e-3);

}  // namespace porl
