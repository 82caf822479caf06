#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "innovnet/errors.hpp"

namespace innovnet {
namespace detail {

inline constexpr int kGammaMaxIter = 600;
inline constexpr double kGammaEps = 1e-16;
inline constexpr double kFpMin = std::numeric_limits<double>::min() / kGammaEps;

// Lower regularized incomplete gamma P(a,x) by power series; valid and fast
// for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < kGammaMaxIter; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * kGammaEps) {
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
  }
  throw ConvergenceFailure("incomplete gamma series did not converge");
}

// Upper regularized incomplete gamma Q(a,x) by modified Lentz continued
// fraction; valid for x >= a + 1.
inline double gamma_q_contfrac(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kFpMin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kGammaMaxIter; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = b + an / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kGammaEps) {
      return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
  }
  throw ConvergenceFailure("incomplete gamma continued fraction did not converge");
}

}  // namespace detail

// Upper regularized incomplete gamma Q(a,x) = Gamma(a,x)/Gamma(a).
inline double gamma_q(double a, double x) {
  if (!(a > 0.0)) throw std::invalid_argument("gamma_q requires a > 0");
  if (x < 0.0) {
    if (x > -1e-12) x = 0.0;
    else throw std::invalid_argument("gamma_q requires x >= 0");
  }
  if (x == 0.0) return 1.0;
  return x < a + 1.0 ? 1.0 - detail::gamma_p_series(a, x)
                     : detail::gamma_q_contfrac(a, x);
}

// Survival function of the chi-squared distribution with k degrees of freedom.
inline double chi2_sf(double x, double k) {
  if (!(k > 0.0)) throw std::invalid_argument("chi2_sf requires k > 0");
  return gamma_q(0.5 * k, 0.5 * x);
}

// Standard normal cdf.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Standard normal quantile, Wichura's PPND16 rational approximations
// (relative error far below 1e-9 across (0,1)).
inline double normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0)) {
    throw std::invalid_argument("normal_quantile requires p in (0,1)");
  }
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        q * (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                  6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
              1.3314166789178437745e2) * r + 3.3871328727963666080e0);
    const double den =
        (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
              3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
            5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
          4.2313330701600911252e1) * r + 1.0);
    return num / den;
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
            3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
          4.63033784615654529590e0) * r + 1.42343711074968357734e0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
          2.05319162663775882187e0) * r + 1.0);
    val = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
          5.46378491116411436990e0) * r + 6.65790464350110377720e0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    val = num / den;
  }
  return q < 0.0 ? -val : val;
}

// Inverse of chi2_sf in its first argument: the value q with
// chi2_sf(q, k) == alpha.  Bracketing bisection; robust, used at setup time
// only, so the ~100 iterations are irrelevant.
inline double chi2_quantile(double alpha, double k) {
  if (!(alpha > 0.0) || !(alpha < 1.0)) {
    throw std::invalid_argument("chi2_quantile requires alpha in (0,1)");
  }
  double lo = 0.0;
  double hi = k + 10.0 * std::sqrt(2.0 * k) + 50.0;
  while (chi2_sf(hi, k) > alpha) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw ConvergenceFailure("chi2_quantile bracket failed");
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (chi2_sf(mid, k) > alpha) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace innovnet
