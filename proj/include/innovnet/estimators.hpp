#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "innovnet/errors.hpp"
#include "innovnet/simulator.hpp"

namespace innovnet {

struct RegressionFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_rms = 0.0;
  std::uint64_t t_lo = 0;  // first and last checkpoint used
  std::uint64_t t_hi = 0;
  int n_points = 0;
};

namespace detail {

inline RegressionFit ols(const std::vector<double>& x, const std::vector<double>& y,
                         std::uint64_t t_lo, std::uint64_t t_hi) {
  const int n = static_cast<int>(x.size());
  double sx = 0, sy = 0;
  for (int i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw InsufficientData("regression abscissae are degenerate");
  RegressionFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0;
  for (int i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    ssr += r * r;
  }
  fit.residual_rms = std::sqrt(ssr / n);
  fit.t_lo = t_lo;
  fit.t_hi = t_hi;
  fit.n_points = n;
  return fit;
}

// Checkpoint indices inside the trailing window [window * horizon, horizon].
inline std::vector<std::size_t> window_indices(const Trajectory& traj, double window) {
  if (!(window > 0.0) || !(window <= 1.0)) {
    throw std::invalid_argument("window must be a fraction in (0, 1]");
  }
  const double lo = window * static_cast<double>(traj.horizon);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < traj.checkpoints.size(); ++i) {
    if (static_cast<double>(traj.checkpoints[i]) >= lo) idx.push_back(i);
  }
  if (idx.size() < 5) {
    throw InsufficientData("only " + std::to_string(idx.size()) +
                           " checkpoints in the estimation window, need >= 5");
  }
  return idx;
}

}  // namespace detail

// Heaps-law exponent: slope of log10(total novelty count) against log10(t)
// over the trailing window of checkpoints.  The total count 1'Dstar_t grows
// like t^{gamma_star}, so the slope estimates the leading eigenvalue of Gamma.
inline RegressionFit heaps_exponent(const Trajectory& traj, double window = 0.1) {
  const auto idx = detail::window_indices(traj, window);
  std::vector<double> x, y;
  for (const std::size_t i : idx) {
    double total = 0;
    for (const auto d : traj.d_star[i]) total += static_cast<double>(d);
    if (!(total > 0.0)) {
      throw ZeroDenominator("total novelty count is zero at t = " +
                            std::to_string(traj.checkpoints[i]));
    }
    x.push_back(std::log10(static_cast<double>(traj.checkpoints[i])));
    y.push_back(std::log10(total));
  }
  return detail::ols(x, y, traj.checkpoints[idx.front()], traj.checkpoints[idx.back()]);
}

enum class RatioVariant { geometric_mean, intercept_difference };

// Ratio u_h/u_j of leading-eigenvector components, estimated from the per-urn
// novelty counts: Dstar_{t,h}/Dstar_{t,j} -> u_h/u_j.  The default variant
// takes the geometric mean of the per-checkpoint ratios over the trailing
// window; the alternative fits separate log-log regressions to the two
// components and differences their intercepts (useful when the two series are
// still drifting at parallel slopes).
inline double eigvec_ratio(const Trajectory& traj, int h, int j,
                           double window = 0.1,
                           RatioVariant variant = RatioVariant::geometric_mean) {
  const int n = traj.n_processes();
  if (h < 0 || h >= n || j < 0 || j >= n) {
    throw std::invalid_argument("process index out of range");
  }
  const auto idx = detail::window_indices(traj, window);
  for (const std::size_t i : idx) {
    if (traj.d_star[i][h] == 0 || traj.d_star[i][j] == 0) {
      throw ZeroDenominator("novelty count is zero inside the window at t = " +
                            std::to_string(traj.checkpoints[i]));
    }
  }
  if (variant == RatioVariant::geometric_mean) {
    double acc = 0;
    for (const std::size_t i : idx) {
      acc += std::log(static_cast<double>(traj.d_star[i][h]) /
                      static_cast<double>(traj.d_star[i][j]));
    }
    return std::exp(acc / static_cast<double>(idx.size()));
  }
  std::vector<double> x, yh, yj;
  for (const std::size_t i : idx) {
    x.push_back(std::log10(static_cast<double>(traj.checkpoints[i])));
    yh.push_back(std::log10(static_cast<double>(traj.d_star[i][h])));
    yj.push_back(std::log10(static_cast<double>(traj.d_star[i][j])));
  }
  const auto fh = detail::ols(x, yh, traj.checkpoints[idx.front()],
                              traj.checkpoints[idx.back()]);
  const auto fj = detail::ols(x, yj, traj.checkpoints[idx.front()],
                              traj.checkpoints[idx.back()]);
  return std::pow(10.0, fh.intercept - fj.intercept);
}

// Pooled frequency estimate of a single item: 1'K_t / (N t).  Converges to the
// limiting pooled frequency of the item under every urn's stationary weights.
inline double p_tilde_hat(const std::vector<std::uint64_t>& k, std::uint64_t t) {
  if (t < 1) throw ZeroDenominator("p_tilde_hat requires t >= 1");
  if (k.empty()) throw std::invalid_argument("empty count vector");
  double total = 0;
  for (const auto v : k) total += static_cast<double>(v);
  return total / (static_cast<double>(k.size()) * static_cast<double>(t));
}

}  // namespace innovnet
