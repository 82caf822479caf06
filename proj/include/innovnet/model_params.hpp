#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "innovnet/errors.hpp"

namespace innovnet {

// Parameters of an N-process system of interacting innovation urns in the
// normalized (theta, Gamma, W) form.  Entry (j,h) of each matrix is the
// influence of process j on urn h:
//
//   birth (novelty) probability of urn h at step t+1:
//     Z_{t,h} = (theta_h + sum_j gamma_{j,h} Dstar_{t,j}) / (theta_h + t)
//   probability that urn h re-draws an already observed color c:
//     P_t(h,c) = (sum_j w_{j,h} K_t(j,c) - gamma_{j'(c),h}) / (theta_h + t)
//
// where j'(c) is the process that minted color c.  Validity requires
// Gamma >= 0, W >= 0, Lambda = W - Gamma >= 0 with strictly positive diagonal,
// column sums 1'Gamma < 1' and 1'W = 1' (so that the per-urn outcome
// probabilities always sum to one), both matrices irreducible, and theta > 0.
struct ModelParams {
  Eigen::VectorXd theta;
  Eigen::MatrixXd gamma;
  Eigen::MatrixXd w;

  int n() const { return static_cast<int>(theta.size()); }
  Eigen::MatrixXd lambda() const { return w - gamma; }
};

struct ValidateOptions {
  // Accept Lambda diagonal entries that are zero (within fp tolerance) instead
  // of strictly positive.  Some otherwise well-behaved parameter choices sit
  // exactly on this boundary; the simulator handles them by clamping the
  // corresponding mint weight to zero.
  bool allow_lambda_boundary = false;
};

namespace detail {

inline constexpr double kColSumTol = 1e-12;
inline constexpr double kNonNegTol = 1e-12;

// Strong connectivity of the directed graph with an edge j -> h whenever
// m(j,h) > 0.  Kosaraju-style double reachability from node 0.
inline bool strongly_connected(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  if (n <= 1) return true;
  auto reach = [&](bool forward) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int j = stack.back();
      stack.pop_back();
      for (int h = 0; h < n; ++h) {
        const double edge = forward ? m(j, h) : m(h, j);
        if (edge > 0.0 && !seen[h]) {
          seen[h] = 1;
          ++count;
          stack.push_back(h);
        }
      }
    }
    return count == n;
  };
  return reach(true) && reach(false);
}

inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace detail

inline bool is_irreducible(const Eigen::MatrixXd& m) {
  return detail::strongly_connected(m);
}

// Non-throwing validation: returns the full list of violated constraints, in
// the order they are checked (shape, non-negativity, column sums, Lambda,
// irreducibility).  Empty result means the candidate is valid.
inline std::vector<ConstraintViolation> check_params(
    const ModelParams& p, const ValidateOptions& opts = {}) {
  std::vector<ConstraintViolation> out;
  const int n = p.n();
  if (n < 1 || p.gamma.rows() != n || p.gamma.cols() != n || p.w.rows() != n ||
      p.w.cols() != n) {
    out.push_back({"ShapeMismatch",
                   "theta has length " + std::to_string(n) +
                       " but gamma is " + std::to_string(p.gamma.rows()) + "x" +
                       std::to_string(p.gamma.cols()) + " and w is " +
                       std::to_string(p.w.rows()) + "x" +
                       std::to_string(p.w.cols())});
    return out;  // nothing else is meaningful on a shape error
  }
  for (int h = 0; h < n; ++h) {
    if (!(p.theta(h) > 0.0)) {
      out.push_back({"NonNegativityViolation",
                     "theta(" + std::to_string(h) +
                         ") must be positive, got " + detail::fmt(p.theta(h))});
    }
  }
  for (int j = 0; j < n; ++j) {
    for (int h = 0; h < n; ++h) {
      if (p.gamma(j, h) < -detail::kNonNegTol) {
        out.push_back({"NonNegativityViolation",
                       "gamma(" + std::to_string(j) + "," + std::to_string(h) +
                           ") = " + detail::fmt(p.gamma(j, h))});
      }
      if (p.w(j, h) < -detail::kNonNegTol) {
        out.push_back({"NonNegativityViolation",
                       "w(" + std::to_string(j) + "," + std::to_string(h) +
                           ") = " + detail::fmt(p.w(j, h))});
      }
    }
  }
  for (int h = 0; h < n; ++h) {
    const double gs = p.gamma.col(h).sum();
    if (gs > 1.0 - detail::kColSumTol) {
      out.push_back({"ColumnSumViolation",
                     "gamma column " + std::to_string(h) + " sums to " +
                         detail::fmt(gs) + ", must be < 1"});
    }
    const double ws = p.w.col(h).sum();
    if (std::abs(ws - 1.0) > detail::kColSumTol) {
      out.push_back({"ColumnSumViolation",
                     "w column " + std::to_string(h) + " sums to " +
                         detail::fmt(ws) + ", must equal 1"});
    }
  }
  const Eigen::MatrixXd lam = p.w - p.gamma;
  for (int j = 0; j < n; ++j) {
    for (int h = 0; h < n; ++h) {
      if (j == h) continue;
      if (lam(j, h) < -detail::kNonNegTol) {
        out.push_back({"NonNegativityViolation",
                       "lambda(" + std::to_string(j) + "," + std::to_string(h) +
                           ") = " + detail::fmt(lam(j, h)) +
                           ", w - gamma must be elementwise nonnegative"});
      }
    }
  }
  for (int h = 0; h < n; ++h) {
    const double d = lam(h, h);
    const bool ok = opts.allow_lambda_boundary ? d >= -detail::kNonNegTol
                                               : d > 0.0;
    if (!ok) {
      out.push_back({"LambdaDiagonalNonPositive",
                     "lambda(" + std::to_string(h) + "," + std::to_string(h) +
                         ") = " + detail::fmt(d)});
    }
  }
  if (!detail::strongly_connected(p.gamma)) {
    out.push_back({"ReducibleMatrix", "gamma is not irreducible"});
  }
  if (!detail::strongly_connected(p.w)) {
    out.push_back({"ReducibleMatrix", "w is not irreducible"});
  }
  return out;
}

// Throwing validation: returns the candidate unchanged if valid, otherwise
// throws the exception type of the first violation with a message listing
// every violation found.
inline ModelParams validate(const ModelParams& p, const ValidateOptions& opts = {}) {
  const auto violations = check_params(p, opts);
  if (violations.empty()) return p;
  std::string msg;
  for (const auto& v : violations) {
    if (!msg.empty()) msg += "; ";
    msg += v.constraint + ": " + v.detail;
  }
  const std::string& kind = violations.front().constraint;
  if (kind == "ColumnSumViolation") throw ColumnSumViolation(msg);
  if (kind == "ReducibleMatrix") throw ReducibleMatrix(msg);
  if (kind == "LambdaDiagonalNonPositive") throw LambdaDiagonalNonPositive(msg);
  throw NonNegativityViolation(msg);
}

// --- two-process parametrization ---------------------------------------------

// Two-process family indexed by the leading-eigenvector component ratio
// r = u_1/u_2, the leading eigenvalue gamma_star of Gamma, the interaction
// asymmetry eta in (0,1), and the total interaction intensity iota.
struct N2Parametrization {
  double r;
  double gamma_star;
  double eta;
  double iota;
};

// Admissible intensities for the two-process Gamma family: a half-open or
// closed interval (0, upper] or (0, upper) depending on which constraint
// binds.  `contains` applies the endpoint convention.
struct IotaInterval {
  double lower = 0.0;  // always open at 0
  double upper = 0.0;
  bool upper_closed = true;

  bool contains(double iota) const {
    if (!(iota > lower)) return false;
    return upper_closed ? iota <= upper : iota < upper;
  }
};

inline void require_n2_domain(double r, double gamma_star, double eta) {
  if (!(r > 0.0) || !(gamma_star > 0.0) || !(gamma_star < 1.0) ||
      !(eta > 0.0) || !(eta < 1.0)) {
    throw std::invalid_argument(
        "two-process family requires r > 0, gamma_star in (0,1), eta in (0,1)");
  }
}

inline IotaInterval admissible_interval(double r, double gamma_star, double eta) {
  require_n2_domain(r, gamma_star, eta);
  // Non-negativity of both Gamma diagonal entries gives the closed bound; the
  // column-sum constraint (columns of Gamma strictly below one) caps it with
  // an open bound whenever r != 1.
  const double closed_bound =
      std::min(gamma_star * r / (1.0 - eta), gamma_star / (r * eta));
  double cap = std::numeric_limits<double>::infinity();
  if (r < 1.0) {
    cap = (1.0 - gamma_star) / (eta * (1.0 - r));
  } else if (r > 1.0) {
    cap = (1.0 - gamma_star) / ((1.0 - eta) * (1.0 - 1.0 / r));
  }
  IotaInterval out;
  out.lower = 0.0;
  if (closed_bound < cap) {
    out.upper = closed_bound;
    out.upper_closed = true;
  } else {
    out.upper = cap;
    out.upper_closed = false;
  }
  return out;
}

// Gamma matrix of the two-process family.  Leading eigenvalue gamma_star with
// right/left structure fixed by (r, eta); off-diagonal entries are eta*iota
// and (1-eta)*iota.
inline Eigen::Matrix2d gamma_from_n2(const N2Parametrization& p) {
  require_n2_domain(p.r, p.gamma_star, p.eta);
  const IotaInterval band = admissible_interval(p.r, p.gamma_star, p.eta);
  if (!band.contains(p.iota)) {
    throw InadmissibleIntensity(
        "iota = " + detail::fmt(p.iota) + " outside admissible interval (0, " +
        detail::fmt(band.upper) + (band.upper_closed ? "]" : ")"));
  }
  Eigen::Matrix2d g;
  g << p.gamma_star - (1.0 - p.eta) * p.iota / p.r, p.eta * p.iota,
      (1.0 - p.eta) * p.iota, p.gamma_star - p.r * p.eta * p.iota;
  return g;
}

// W matrix of the two-process family: columns sum to one, leading eigenvalue
// one, asymmetry eta and intensity iota with iota in (0, min(1/eta, 1/(1-eta))).
inline Eigen::Matrix2d w_from_n2(double eta, double iota) {
  if (!(eta > 0.0) || !(eta < 1.0)) {
    throw std::invalid_argument("w_from_n2 requires eta in (0,1)");
  }
  const double upper = std::min(1.0 / eta, 1.0 / (1.0 - eta));
  if (!(iota > 0.0) || !(iota < upper)) {
    throw InadmissibleIntensity("iota = " + detail::fmt(iota) +
                                " outside admissible interval (0, " +
                                detail::fmt(upper) + ")");
  }
  Eigen::Matrix2d w;
  w << 1.0 - (1.0 - eta) * iota, eta * iota,
      (1.0 - eta) * iota, 1.0 - eta * iota;
  return w;
}

// Mean-field (exchangeable) matrix phi * (iota/n * 1 1' + (1 - iota) * I):
// every off-diagonal influence equals phi*iota/n, leading eigenvalue phi.
inline Eigen::MatrixXd mean_field(double phi, double iota, int n) {
  if (n < 2) throw std::invalid_argument("mean_field requires n >= 2");
  if (!(phi > 0.0) || phi > 1.0 || !(iota > 0.0) || iota > 1.0) {
    throw std::invalid_argument("mean_field requires phi and iota in (0,1]");
  }
  Eigen::MatrixXd m =
      Eigen::MatrixXd::Constant(n, n, phi * iota / static_cast<double>(n));
  m.diagonal().array() += phi * (1.0 - iota);
  return m;
}

// --- assembled parameter sets ---------------------------------------------------

inline ModelParams n2_params(double r, double gamma_star, double eta,
                             double iota_gamma, double iota_w,
                             const Eigen::Vector2d& theta = Eigen::Vector2d::Ones()) {
  ModelParams p;
  p.theta = theta;
  p.gamma = gamma_from_n2({r, gamma_star, eta, iota_gamma});
  p.w = w_from_n2(eta, iota_w);
  return p;
}

inline ModelParams mean_field_params(int n, double phi, double iota_gamma,
                                     double iota_w, double theta = 1.0) {
  ModelParams p;
  p.theta = Eigen::VectorXd::Constant(n, theta);
  p.gamma = mean_field(phi, iota_gamma, n);
  p.w = mean_field(1.0, iota_w, n);
  return p;
}

// --- json round trip -------------------------------------------------------------

// Serialized form records the constructing family when one was used, plus the
// explicit matrices, so readers can either rebuild or consume directly.
inline nlohmann::json params_to_json(const ModelParams& p) {
  nlohmann::json j;
  j["n"] = p.n();
  j["theta"] = std::vector<double>(p.theta.data(), p.theta.data() + p.theta.size());
  auto mat = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      std::vector<double> row;
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  j["gamma"] = mat(p.gamma);
  j["w"] = mat(p.w);
  return j;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw IoError("expected a matrix as an array of rows");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j.at(r).size()) != cols) {
      throw IoError("ragged matrix rows in json");
    }
    for (int c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

// Accepts either explicit matrices ({"theta":[...],"gamma":[[...]],"w":[[...]]})
// or a family block:
//   {"family":"n2","r":..,"gamma_star":..,"eta":..,"iota_gamma":..,"iota_w":..}
//   {"family":"mean_field","n":..,"phi":..,"iota_gamma":..,"iota_w":..}
// with an optional "theta" array in both family forms.
inline ModelParams params_from_json(const nlohmann::json& j) {
  ModelParams p;
  if (j.contains("family")) {
    const std::string family = j.at("family").get<std::string>();
    if (family == "n2") {
      p = n2_params(j.at("r").get<double>(), j.at("gamma_star").get<double>(),
                    j.at("eta").get<double>(), j.at("iota_gamma").get<double>(),
                    j.at("iota_w").get<double>());
    } else if (family == "mean_field") {
      p = mean_field_params(j.at("n").get<int>(), j.at("phi").get<double>(),
                            j.at("iota_gamma").get<double>(),
                            j.at("iota_w").get<double>());
    } else {
      throw IoError("unknown parameter family '" + family + "'");
    }
    if (j.contains("theta")) {
      const auto th = j.at("theta").get<std::vector<double>>();
      if (static_cast<int>(th.size()) != p.n()) {
        throw IoError("theta length does not match family size");
      }
      p.theta = Eigen::Map<const Eigen::VectorXd>(th.data(), th.size());
    }
    return p;
  }
  const auto th = j.at("theta").get<std::vector<double>>();
  p.theta = Eigen::Map<const Eigen::VectorXd>(th.data(), th.size());
  p.gamma = matrix_from_json(j.at("gamma"));
  p.w = matrix_from_json(j.at("w"));
  return p;
}

}  // namespace innovnet
