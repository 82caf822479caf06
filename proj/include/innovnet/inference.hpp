#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "innovnet/errors.hpp"
#include "innovnet/model_params.hpp"
#include "innovnet/special_functions.hpp"
#include "innovnet/spectral.hpp"

namespace innovnet {

// Which null hypothesis a test was computed against.  `family` is one of
// "n2_gamma", "n2_w", "meanfield_gamma", "meanfield_w", "general_gamma",
// "general_w"; eta0/n are filled where meaningful.
struct HypothesisDescriptor {
  std::string family;
  double iota0 = std::numeric_limits<double>::quiet_NaN();
  double eta0 = std::numeric_limits<double>::quiet_NaN();
  int n = 0;
  std::string side = "reject for large values (interaction below the null intensity)";
};

struct TestResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  double delta0 = 0.0;  // spectral gap of the null; the statistic's scale
  HypothesisDescriptor hypothesis;
};

struct ConfidenceInterval {
  double center = 0.0;
  double half_width = 0.0;
  double level = 0.0;     // nominal coverage, e.g. 0.95
  std::uint64_t t = 0;    // sample size the interval was computed at
  double c_factor = 0.0;  // structural variance factor under the sqrt

  double lower() const { return center - half_width; }
  double upper() const { return center + half_width; }
  bool contains(double x) const { return lower() <= x && x <= upper(); }
};

// --- structural variance factors --------------------------------------------------

// Pooled-frequency variance factor for a general two-process system in terms
// of the eigenvector ratio r and the asymmetry eta; reduces to
// c_eta = eta^2 + (1-eta)^2 at r = 1.
inline double c_eta(double eta) { return eta * eta + (1.0 - eta) * (1.0 - eta); }

inline double c_r_eta(double r, double eta) {
  const double om = 1.0 - eta;
  return (r * r * r * eta * eta + om * om) /
         ((r * eta + om) * (r * r * eta + om));
}

// --- two-process tests --------------------------------------------------------------

// Interaction test from the novelty counts of a two-process system.  Under the
// null (r, gamma_star, eta0, iota0) the statistic is asymptotically chi^2(1);
// it scales with the null's spectral gap
//   Delta0 = (iota0/gamma_star) ((1-eta0) + eta0 r^2)/r - 1/2,
// and under an alternative with gap Delta1 it behaves like (Delta0/Delta1)
// chi^2(1), so the upper-tail test is consistent against the composite
// alternative iota < iota0 (weaker interaction inflates the fluctuations).
inline TestResult test_gamma_n2(double d_star_1, double d_star_2, double r,
                                double gamma_star, double iota0,
                                double eta0 = 0.5) {
  const IotaInterval band = admissible_interval(r, gamma_star, eta0);
  const double delta0 =
      (iota0 / gamma_star) * ((1.0 - eta0) + eta0 * r * r) / r - 0.5;
  if (!band.contains(iota0) || !(delta0 > 0.0)) {
    throw InadmissibleNull(
        "iota0 = " + detail::fmt(iota0) +
        " is not an admissible null (needs iota0 in (0, " +
        detail::fmt(band.upper) + (band.upper_closed ? "]" : ")") +
        " and spectral gap > 0, got gap = " + detail::fmt(delta0) + ")");
  }
  if (!(d_star_2 > 0.0)) throw ZeroDenominator("d_star_2 must be positive");
  const double dev = d_star_1 / d_star_2 - r;
  TestResult res;
  res.statistic = (2.0 / (r * (1.0 + r))) * delta0 * d_star_2 * dev * dev;
  res.df = 1;
  res.p_value = chi2_sf(res.statistic, 1);
  res.delta0 = delta0;
  res.hypothesis = {"n2_gamma", iota0, eta0, 2,
                    "reject for large values (interaction below the null intensity)"};
  return res;
}

// Interaction test from a single item's counts (K_1, K_2) at step t in a
// two-process system; eta0 = 1/2 convention (the statistic's limit law does
// not depend on eta).  chi^2(1) under the null iota = iota0.
inline TestResult test_w_n2(double k1, double k2, std::uint64_t t, double iota0) {
  if (!(iota0 > 0.5) || !(iota0 < 2.0)) {
    throw InadmissibleNull("iota0 must lie in (1/2, 2), got " +
                           detail::fmt(iota0));
  }
  const double ktilde = 0.5 * (k1 + k2);
  const double tt = static_cast<double>(t);
  if (!(ktilde > 0.0) || !(ktilde < tt)) {
    throw DegenerateCounts("pooled count " + detail::fmt(ktilde) +
                           " must lie strictly between 0 and t");
  }
  const double delta0 = iota0 - 0.5;
  TestResult res;
  res.statistic = delta0 * (k1 - k2) * (k1 - k2) / (ktilde * (1.0 - ktilde / tt));
  res.df = 1;
  res.p_value = chi2_sf(res.statistic, 1);
  res.delta0 = delta0;
  res.hypothesis = {"n2_w", iota0, 0.5, 2,
                    "reject for large values (interaction below the null intensity)"};
  return res;
}

// --- mean-field tests ----------------------------------------------------------------

inline TestResult test_gamma_meanfield(const Eigen::VectorXd& d_star, double iota0) {
  const int n = static_cast<int>(d_star.size());
  if (n < 2) throw std::invalid_argument("need at least two processes");
  if (!(iota0 > 0.5) || iota0 > 1.0) {
    throw InadmissibleNull("iota0 must lie in (1/2, 1], got " + detail::fmt(iota0));
  }
  const double dbar = d_star.mean();
  if (!(dbar > 0.0)) throw DegenerateCounts("mean novelty count must be positive");
  const double delta0 = iota0 - 0.5;
  TestResult res;
  res.statistic =
      2.0 * delta0 * (d_star.array() - dbar).matrix().squaredNorm() / dbar;
  res.df = n - 1;
  res.p_value = chi2_sf(res.statistic, res.df);
  res.delta0 = delta0;
  res.hypothesis = {"meanfield_gamma", iota0,
                    std::numeric_limits<double>::quiet_NaN(), n,
                    "reject for large values (interaction below the null intensity)"};
  return res;
}

inline TestResult test_w_meanfield(const Eigen::VectorXd& k, std::uint64_t t,
                                   double iota0) {
  const int n = static_cast<int>(k.size());
  if (n < 2) throw std::invalid_argument("need at least two processes");
  if (!(iota0 > 0.5) || iota0 > 1.0) {
    throw InadmissibleNull("iota0 must lie in (1/2, 1], got " + detail::fmt(iota0));
  }
  const double kbar = k.mean();
  const double tt = static_cast<double>(t);
  if (!(kbar > 0.0) || !(kbar < tt)) {
    throw DegenerateCounts("pooled count " + detail::fmt(kbar) +
                           " must lie strictly between 0 and t");
  }
  const double delta0 = iota0 - 0.5;
  TestResult res;
  res.statistic = 2.0 * delta0 * (k.array() - kbar).matrix().squaredNorm() /
                  (kbar * (1.0 - kbar / tt));
  res.df = n - 1;
  res.p_value = chi2_sf(res.statistic, res.df);
  res.delta0 = delta0;
  res.hypothesis = {"meanfield_w", iota0,
                    std::numeric_limits<double>::quiet_NaN(), n,
                    "reject for large values (interaction below the null intensity)"};
  return res;
}

inline TestResult test_gamma_meanfield(const std::vector<std::uint64_t>& d_star,
                                       double iota0) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(d_star.size()));
  for (std::size_t i = 0; i < d_star.size(); ++i) v(static_cast<Eigen::Index>(i)) = static_cast<double>(d_star[i]);
  return test_gamma_meanfield(v, iota0);
}

inline TestResult test_w_meanfield(const std::vector<std::uint64_t>& k,
                                   std::uint64_t t, double iota0) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(k.size()));
  for (std::size_t i = 0; i < k.size(); ++i) v(static_cast<Eigen::Index>(i)) = static_cast<double>(k[i]);
  return test_w_meanfield(v, t, iota0);
}

// --- general whitened test ------------------------------------------------------------

// Variance model for the scalar factor of the general statistic: identity for
// novelty-count observables (B = Dstar/t^{phi_star}), bernoulli for item
// frequencies (B = K/t, bounded draws).
enum class GMode { identity, bernoulli };

// Whitened chi^2(N-1) statistic for an arbitrary null matrix phi0:
//
//   T = t^{phi_star/2} g(phi_star Btilde)^{-1/2} W (U V' B),   statistic = |T|^2
//
// with Btilde = v'B, W the whitening of the projected fluctuation covariance
// M^{33} (computed with Sigma_det = diag(u) in identity mode, I in bernoulli
// mode), and U V' B evaluated as (I - u v')B.  Reproduces the specialized
// mean-field tests exactly and the two-process tests up to their documented
// finite-sample simplifications.
inline TestResult test_general(const Eigen::VectorXd& b,
                               const Eigen::MatrixXd& phi0, GMode g_mode,
                               double t, double phi_star) {
  const EigenStructure eig = eigen_structure(phi0);
  if (std::abs(eig.phi_star - phi_star) > 1e-8 * std::max(1.0, phi_star)) {
    throw std::invalid_argument(
        "phi_star does not match the leading eigenvalue of phi0");
  }
  const int n = eig.n();
  if (b.size() != n) throw std::invalid_argument("observable length mismatch");
  const Eigen::MatrixXd sigma =
      sigma_det_for_mode(eig, g_mode == GMode::identity ? CltMode::gamma : CltMode::w);
  const CovarianceBlocks blocks = covariance_blocks(eig, sigma);  // StabilityViolation
  const double btilde = eig.v.dot(b);
  const double garg = phi_star * btilde;
  const double gval = g_mode == GMode::identity ? garg : garg * (1.0 - garg);
  if (!(gval > 0.0)) {
    throw DegenerateCounts("variance factor g = " + detail::fmt(gval) +
                           " is not positive");
  }
  TestResult res;
  res.df = n - 1;
  res.delta0 = blocks.gap;
  res.hypothesis = {g_mode == GMode::identity ? "general_gamma" : "general_w",
                    std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN(), n,
                    "reject for large values (departure from the null matrix)"};
  if (n == 1) {
    res.statistic = 0.0;
    res.p_value = 1.0;
    return res;
  }
  const Eigen::MatrixXd tw = whitening(blocks.m33);
  const Eigen::VectorXd y = tw * (b - eig.u * btilde);
  res.statistic = std::pow(t, phi_star) * y.squaredNorm() / gval;
  res.p_value = chi2_sf(res.statistic, res.df);
  return res;
}

// --- confidence intervals ---------------------------------------------------------------

// Interval for the limiting pooled frequency of one item in a two-process
// system.  With eta known the center is the eta-weighted count mix and the
// variance factor is c_eta = eta^2 + (1-eta)^2; with eta unknown the
// equal-weight center is kept and the factor is widened to 1 (the supremum of
// c_eta over eta), giving a conservative interval.
inline ConfidenceInterval ci_p_tilde_n2(double k1, double k2, std::uint64_t t,
                                        std::optional<double> eta, double alpha) {
  if (!(alpha > 0.0) || !(alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (0,1)");
  }
  const double e = eta.value_or(0.5);
  if (!(e > 0.0) || !(e < 1.0)) throw std::invalid_argument("eta must lie in (0,1)");
  const double tt = static_cast<double>(t);
  const double ktilde = e * k1 + (1.0 - e) * k2;
  if (!(ktilde > 0.0) || !(ktilde < tt)) {
    throw DegenerateCounts("pooled count " + detail::fmt(ktilde) +
                           " must lie strictly between 0 and t");
  }
  const double c = eta.has_value() ? c_eta(e) : 1.0;
  const double phat = ktilde / tt;
  ConfidenceInterval ci;
  ci.center = phat;
  ci.half_width =
      normal_quantile(1.0 - alpha / 2.0) * std::sqrt(phat * (1.0 - phat) * c / tt);
  ci.level = 1.0 - alpha;
  ci.t = t;
  ci.c_factor = c;
  return ci;
}

// Interval for the limiting pooled frequency of one item in a mean-field
// system of N processes; the structural factor is 1/N.
inline ConfidenceInterval ci_p_tilde_meanfield(const Eigen::VectorXd& k,
                                               std::uint64_t t, double alpha) {
  const int n = static_cast<int>(k.size());
  if (n < 1) throw std::invalid_argument("empty count vector");
  if (!(alpha > 0.0) || !(alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (0,1)");
  }
  const double tt = static_cast<double>(t);
  const double kbar = k.mean();
  if (!(kbar > 0.0) || !(kbar < tt)) {
    throw DegenerateCounts("pooled count " + detail::fmt(kbar) +
                           " must lie strictly between 0 and t");
  }
  const double phat = kbar / tt;
  ConfidenceInterval ci;
  ci.center = phat;
  ci.half_width = normal_quantile(1.0 - alpha / 2.0) *
                  std::sqrt(phat * (1.0 - phat) / (n * tt));
  ci.level = 1.0 - alpha;
  ci.t = t;
  ci.c_factor = 1.0 / n;
  return ci;
}

inline ConfidenceInterval ci_p_tilde_meanfield(const std::vector<std::uint64_t>& k,
                                               std::uint64_t t, double alpha) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(k.size()));
  for (std::size_t i = 0; i < k.size(); ++i) v(static_cast<Eigen::Index>(i)) = static_cast<double>(k[i]);
  return ci_p_tilde_meanfield(v, t, alpha);
}

// --- power ---------------------------------------------------------------------------------

// Asymptotic power of the gap-scaled chi^2 tests: under an alternative with
// spectral gap delta1 the statistic is distributed as (delta0/delta1) chi^2(df),
// so the rejection probability at level alpha is
// chi2_sf(q_alpha * delta1/delta0, df).
inline double analytic_power(double delta0, double delta1, int df, double alpha) {
  if (!(delta0 > 0.0) || !(delta1 > 0.0)) {
    throw InadmissibleNull("analytic_power requires positive spectral gaps");
  }
  if (df < 1) throw std::invalid_argument("df must be >= 1");
  if (!(alpha > 0.0) || !(alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (0,1)");
  }
  const double q = chi2_quantile(alpha, df);
  return chi2_sf(q * delta1 / delta0, df);
}

}  // namespace innovnet
