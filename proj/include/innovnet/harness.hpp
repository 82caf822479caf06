#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "innovnet/errors.hpp"
#include "innovnet/inference.hpp"
#include "innovnet/model_params.hpp"
#include "innovnet/rng.hpp"
#include "innovnet/simulator.hpp"
#include "innovnet/special_functions.hpp"
#include "innovnet/spectral.hpp"

namespace innovnet {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Monte Carlo experiment description.  `family` is a parameter block in the
// same JSON form params_from_json accepts; the n2/mean_field family fields
// are kept accessible because the inference protocol (which CI, which test,
// which true spectral gap) depends on them.
struct ExperimentConfig {
  std::string kind;  // "coverage" | "size_power" | "clt_diagnostics"
  nlohmann::json family;
  int s = 200;
  std::uint64_t t = 1000;
  std::uint64_t t_inf = 100000;
  double alpha = 0.05;
  std::uint64_t master_seed = 1;
  int threads = 0;  // 0: hardware concurrency
  std::vector<double> iota0_gamma;  // null grids for size/power
  std::vector<double> iota0_w;

  bool is_n2() const { return family.value("family", "") == "n2"; }
  bool is_mean_field() const { return family.value("family", "") == "mean_field"; }
  ModelParams build_params() const { return params_from_json(family); }

  double true_r() const { return is_n2() ? family.at("r").get<double>() : 1.0; }
  double true_eta() const { return is_n2() ? family.at("eta").get<double>() : 0.5; }
  double true_gamma_star() const {
    return is_n2() ? family.at("gamma_star").get<double>()
                   : family.at("phi").get<double>();
  }
  double true_iota_gamma() const { return family.at("iota_gamma").get<double>(); }
  double true_iota_w() const { return family.at("iota_w").get<double>(); }

  void validate_experiment() const {
    if (s < 1) throw std::invalid_argument("replicate count must be >= 1");
    if (!(alpha > 0.0) || !(alpha < 1.0)) {
      throw std::invalid_argument("alpha must lie in (0,1)");
    }
    if (kind != "size_power" && t >= t_inf) {
      throw std::invalid_argument("need t < t_inf for a truth proxy");
    }
    if (!is_n2() && !is_mean_field()) {
      throw std::invalid_argument(
          "experiments require an 'n2' or 'mean_field' family block");
    }
    (void)build_params();  // surfaces family errors early
  }

  nlohmann::json to_json() const {
    return {{"kind", kind},         {"family", family},
            {"s", s},               {"t", t},
            {"t_inf", t_inf},       {"alpha", alpha},
            {"master_seed", master_seed},
            {"threads", threads},   {"iota0_gamma", iota0_gamma},
            {"iota0_w", iota0_w}};
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.kind = j.value("kind", std::string());
    c.family = j.at("family");
    c.s = j.value("s", 200);
    c.t = j.value("t", std::uint64_t{1000});
    c.t_inf = j.value("t_inf", std::uint64_t{100000});
    c.alpha = j.value("alpha", 0.05);
    c.master_seed = j.value("master_seed", std::uint64_t{1});
    c.threads = j.value("threads", 0);
    c.iota0_gamma = j.value("iota0_gamma", std::vector<double>{});
    c.iota0_w = j.value("iota0_w", std::vector<double>{});
    return c;
  }
};

// Runs fn(replicate_index) for indices [0, s) on a small worker pool and
// collects the results by index, so aggregates never depend on execution
// order.  Exceptions from workers are rethrown on the caller thread.
template <typename Result, typename Fn>
std::vector<Result> parallel_replicates(int s, int threads, Fn&& fn) {
  const unsigned hw = std::thread::hardware_concurrency();
  const int want = threads > 0 ? threads : static_cast<int>(hw ? hw : 1);
  const int nthreads = std::max(1, std::min(want, s));
  std::vector<Result> results(static_cast<std::size_t>(s));
  if (nthreads == 1) {
    for (int i = 0; i < s; ++i) results[static_cast<std::size_t>(i)] = fn(i);
    return results;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nthreads));
  for (int w = 0; w < nthreads; ++w) {
    pool.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < s;) {
        try {
          results[static_cast<std::size_t>(i)] = fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

// --- coverage ---------------------------------------------------------------------------

struct CoverageRow {
  int replicate = 0;
  double lower = 0.0, upper = 0.0, truth = 0.0;
  bool hit = false;
};

struct CoverageReport {
  ExperimentConfig config;
  std::vector<CoverageRow> rows;  // sorted by truth, plot-ready
  double coverage = 0.0;
  double se = 0.0;  // binomial standard error sqrt(p(1-p)/S)
};

// One coverage replicate: simulate to t, pick the item with the highest total
// count, form its pooled-frequency CI at t, keep simulating to t_inf, and
// compare against the truth proxy 1'K_{t_inf}(c) / (N t_inf).
inline CoverageReport run_coverage(const ExperimentConfig& config) {
  config.validate_experiment();
  const ModelParams params = config.build_params();
  const int n = params.n();
  const bool n2 = config.is_n2();
  const double eta = config.true_eta();

  auto one = [&](int rep) {
    SystemState st(params, RngStream::derive(config.master_seed,
                                             static_cast<std::uint64_t>(rep)));
    st.run_to(config.t);
    const std::uint32_t c = st.top_color();
    ConfidenceInterval ci;
    if (n2) {
      ci = ci_p_tilde_n2(static_cast<double>(st.count(0, c)),
                         static_cast<double>(st.count(1, c)), config.t, eta,
                         config.alpha);
    } else {
      std::vector<std::uint64_t> k(static_cast<std::size_t>(n));
      for (int h = 0; h < n; ++h) k[static_cast<std::size_t>(h)] = st.count(h, c);
      ci = ci_p_tilde_meanfield(k, config.t, config.alpha);
    }
    st.run_to(config.t_inf);
    const double truth = static_cast<double>(st.total_count(c)) /
                         (static_cast<double>(n) * static_cast<double>(config.t_inf));
    CoverageRow row;
    row.replicate = rep;
    row.lower = ci.lower();
    row.upper = ci.upper();
    row.truth = truth;
    row.hit = ci.contains(truth);
    return row;
  };

  CoverageReport report;
  report.config = config;
  report.rows = parallel_replicates<CoverageRow>(config.s, config.threads, one);
  std::sort(report.rows.begin(), report.rows.end(),
            [](const CoverageRow& a, const CoverageRow& b) {
              return a.truth < b.truth;
            });
  int hits = 0;
  for (const auto& r : report.rows) hits += r.hit ? 1 : 0;
  report.coverage = static_cast<double>(hits) / config.s;
  report.se = std::sqrt(report.coverage * (1.0 - report.coverage) / config.s);
  return report;
}

inline void write_coverage_csv(const CoverageReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "index,lower,upper,truth,hit\n";
  out.precision(12);
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    out << (i + 1) << "," << r.lower << "," << r.upper << "," << r.truth << ","
        << (r.hit ? 1 : 0) << "\n";
  }
  if (!out) throw IoError("write failed on " + path);
}

// --- size and power ------------------------------------------------------------------------

struct SizePowerRow {
  std::string test;  // "gamma_n2" | "w_n2" | "gamma_meanfield" | "w_meanfield"
  double iota0 = 0.0;
  double delta0 = 0.0;   // null spectral gap
  double delta1 = 0.0;   // true spectral gap
  double analytic = 0.0; // analytic_power prediction
  double empirical = 0.0;
  double se = 0.0;
};

struct SizePowerReport {
  ExperimentConfig config;
  std::vector<SizePowerRow> rows;
};

// Empirical rejection rates of the specialized tests over a grid of null
// intensities, against the analytic (delta0/delta1) chi^2 power law.  The
// truth is the configured family; the gamma tests consume the final novelty
// counts, the w tests the final counts of the top item.
inline SizePowerReport run_size_power(const ExperimentConfig& config) {
  config.validate_experiment();
  if (config.iota0_gamma.empty() && config.iota0_w.empty()) {
    throw std::invalid_argument("size/power needs at least one iota0 grid");
  }
  const ModelParams params = config.build_params();
  const int n = params.n();
  const bool n2 = config.is_n2();
  const double r = config.true_r();
  const double gs = config.true_gamma_star();
  const double eta = config.true_eta();

  // Spectral gap as a function of intensity within each one-parameter family.
  const auto gap_gamma = [&](double iota) {
    return n2 ? (iota / gs) * ((1.0 - eta) + eta * r * r) / r - 0.5 : iota - 0.5;
  };
  const auto gap_w = [&](double iota) { return iota - 0.5; };

  struct Cell {
    std::string test;
    bool wmode = false;
    double iota0 = 0.0, delta0 = 0.0, delta1 = 0.0;
  };
  std::vector<Cell> cells;
  for (const double i0 : config.iota0_gamma) {
    cells.push_back({n2 ? "gamma_n2" : "gamma_meanfield", false, i0, gap_gamma(i0),
                     gap_gamma(config.true_iota_gamma())});
  }
  for (const double i0 : config.iota0_w) {
    cells.push_back({n2 ? "w_n2" : "w_meanfield", true, i0, gap_w(i0),
                     gap_w(config.true_iota_w())});
  }

  auto one = [&](int rep) {
    SystemState st(params, RngStream::derive(config.master_seed,
                                             static_cast<std::uint64_t>(rep)));
    st.run_to(config.t);
    const auto& ds = st.novelty_counts();
    const std::uint32_t c = st.top_color();
    std::vector<std::uint64_t> k(static_cast<std::size_t>(n));
    for (int h = 0; h < n; ++h) k[static_cast<std::size_t>(h)] = st.count(h, c);
    std::vector<std::uint8_t> reject(cells.size(), 0);
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const Cell& cell = cells[j];
      TestResult res;
      if (!cell.wmode) {
        res = n2 ? test_gamma_n2(static_cast<double>(ds[0]),
                                 static_cast<double>(ds[1]), r, gs, cell.iota0, eta)
                 : test_gamma_meanfield(ds, cell.iota0);
      } else {
        res = n2 ? test_w_n2(static_cast<double>(k[0]), static_cast<double>(k[1]),
                             config.t, cell.iota0)
                 : test_w_meanfield(k, config.t, cell.iota0);
      }
      reject[j] = res.p_value < config.alpha ? 1 : 0;
    }
    return reject;
  };

  const auto rejects =
      parallel_replicates<std::vector<std::uint8_t>>(config.s, config.threads, one);
  SizePowerReport report;
  report.config = config;
  const int df = n2 ? 1 : n - 1;
  for (std::size_t j = 0; j < cells.size(); ++j) {
    const Cell& cell = cells[j];
    int count = 0;
    for (const auto& rep : rejects) count += rep[j];
    SizePowerRow row;
    row.test = cell.test;
    row.iota0 = cell.iota0;
    row.delta0 = cell.delta0;
    row.delta1 = cell.delta1;
    row.analytic = analytic_power(cell.delta0, cell.delta1, df, config.alpha);
    row.empirical = static_cast<double>(count) / config.s;
    row.se = std::sqrt(row.empirical * (1.0 - row.empirical) / config.s);
    report.rows.push_back(std::move(row));
  }
  return report;
}

inline void write_size_power_csv(const SizePowerReport& report,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "test,iota0,delta0,delta1,analytic_power,empirical_rate,se\n";
  out.precision(12);
  for (const auto& r : report.rows) {
    out << r.test << "," << r.iota0 << "," << r.delta0 << "," << r.delta1 << ","
        << r.analytic << "," << r.empirical << "," << r.se << "\n";
  }
  if (!out) throw IoError("write failed on " + path);
}

// --- central limit theorem diagnostics -------------------------------------------------------

namespace detail {

struct MomentDiag {
  std::vector<double> mean, mean_se, skewness, excess_kurtosis, ks_stat;
};

// Componentwise normality diagnostics of whitened draws (each column of ys is
// one replicate).
inline MomentDiag moment_diagnostics(const Eigen::MatrixXd& ys) {
  MomentDiag d;
  const int dim = static_cast<int>(ys.rows());
  const int s = static_cast<int>(ys.cols());
  for (int i = 0; i < dim; ++i) {
    const Eigen::VectorXd x = ys.row(i).transpose();
    const double m = x.mean();
    const double var = (x.array() - m).square().sum() / (s - 1);
    const double sd = std::sqrt(var);
    d.mean.push_back(m);
    d.mean_se.push_back(sd / std::sqrt(double(s)));
    d.skewness.push_back((x.array() - m).pow(3).mean() / (sd * sd * sd));
    d.excess_kurtosis.push_back((x.array() - m).pow(4).mean() / (var * var) - 3.0);
    std::vector<double> sorted(x.data(), x.data() + s);
    std::sort(sorted.begin(), sorted.end());
    double ks = 0.0;
    for (int j = 0; j < s; ++j) {
      const double cdf = normal_cdf(sorted[static_cast<std::size_t>(j)]);
      ks = std::max(ks, std::abs(cdf - (j + 1.0) / s));
      ks = std::max(ks, std::abs(cdf - j / static_cast<double>(s)));
    }
    d.ks_stat.push_back(ks);
  }
  return d;
}

inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& ys) {
  const int s = static_cast<int>(ys.cols());
  const Eigen::VectorXd mean = ys.rowwise().mean();
  const Eigen::MatrixXd centered = ys.colwise() - mean;
  return centered * centered.transpose() / static_cast<double>(s - 1);
}

inline std::vector<std::vector<double>> to_nested(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row;
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace detail

// Diagnostics of one CLT mode (gamma: novelty counts at scale t^{gamma*};
// w: single-item counts at scale t).  Fluctuations are studentized with
// per-replicate plug-ins of the random limits taken at t_inf.  The plug-in
// is the same limit martingale read off the same path at a later time, so
// its fluctuation is perfectly correlated with the component along u at
// step t and shrinks the covariance there by exactly
// rho^2 (v' Sigma v / phi*) uu' with rho^2 = (t/t_inf)^{scale exponent}.
// theory_cov is C_det minus that known shrinkage; the share fluctuations
// live in the contrast space (Q u = 0), where the shrinkage cancels, and
// converge to Q C_det Q'.
struct CltModeDiag {
  std::string mode;
  Eigen::MatrixXd emp_cov, theory_cov;
  Eigen::MatrixXd emp_share_cov, theory_share_cov;
  detail::MomentDiag whitened;      // after C_det^{-1/2}, components iid N(0,1)
  double max_diag_ratio_dev = 0.0;  // max_h |emp_hh / theory_hh - 1|
  double share_max_abs_dev = 0.0;   // |emp - theory|_inf / |theory|_inf
  double contrast_variance = std::numeric_limits<double>::quiet_NaN();  // N=2
};

struct CltDiagReport {
  ExperimentConfig config;
  CltModeDiag gamma_diag;
  CltModeDiag w_diag;
};

inline CltDiagReport run_clt_diagnostics(const ExperimentConfig& config) {
  config.validate_experiment();
  const ModelParams params = config.build_params();
  const int n = params.n();
  const double iota_w_true = config.true_iota_w();

  const EigenStructure eig_g = eigen_structure(params.gamma);
  const EigenStructure eig_w = eigen_structure(params.w);
  const double gstar = eig_g.phi_star;
  const Eigen::MatrixXd c_g = c_det(eig_g, CltMode::gamma);
  const Eigen::MatrixXd c_w = c_det(eig_w, CltMode::w);
  // Exact covariance shrinkage along u from the t_inf plug-ins; see the
  // comment above CltModeDiag.
  const double tratio =
      static_cast<double>(config.t) / static_cast<double>(config.t_inf);
  const double rho2_g = std::pow(tratio, gstar);
  const double rho2_w = tratio;
  const double c1_g =
      (eig_g.v.array().square() * eig_g.u.array()).sum() / gstar;
  const double c1_w = eig_w.v.squaredNorm() / eig_w.phi_star;
  const Eigen::MatrixXd c_g_adj =
      c_g - rho2_g * c1_g * (eig_g.u * eig_g.u.transpose());
  const Eigen::MatrixXd c_w_adj =
      c_w - rho2_w * c1_w * (eig_w.u * eig_w.u.transpose());
  const Eigen::VectorXd uhat_g = eig_g.u / eig_g.u.sum();
  const Eigen::MatrixXd q_g =
      Eigen::MatrixXd::Identity(n, n) - uhat_g * Eigen::RowVectorXd::Ones(n);
  const Eigen::MatrixXd q_w =
      Eigen::MatrixXd::Identity(n, n) -
      Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));

  struct Rep {
    Eigen::VectorXd y_g, y_w, y_g_share, y_w_share;
    double contrast = std::numeric_limits<double>::quiet_NaN();
  };

  auto one = [&](int rep) {
    SystemState st(params, RngStream::derive(config.master_seed,
                                             static_cast<std::uint64_t>(rep)));
    st.run_to(config.t);
    Eigen::VectorXd d_t(n), k_t(n);
    for (int h = 0; h < n; ++h) d_t(h) = static_cast<double>(st.novelty_counts()[h]);
    const std::uint32_t c = st.top_color();
    for (int h = 0; h < n; ++h) k_t(h) = static_cast<double>(st.count(h, c));
    st.run_to(config.t_inf);
    Eigen::VectorXd d_inf(n), k_inf(n);
    for (int h = 0; h < n; ++h) {
      d_inf(h) = static_cast<double>(st.novelty_counts()[h]);
      k_inf(h) = static_cast<double>(st.count(h, c));
    }
    const double tt = static_cast<double>(config.t);
    const double tinf = static_cast<double>(config.t_inf);

    Rep out;
    // gamma mode: Dstar_t ~ t^{gamma*} Z u with Z estimated at t_inf; the
    // limit covariance scale is gamma* z (the fluctuations of v'Dstar/t^g
    // around z have variance (v'Sigma v) z / gamma* per the growth law).
    const double z_hat = eig_g.v.dot(d_inf) / std::pow(tinf, gstar);
    if (!(z_hat > 0.0)) throw DegenerateCounts("novelty limit plug-in is zero");
    const Eigen::VectorXd x_g =
        std::pow(tt, 0.5 * gstar) *
        (d_t / std::pow(tt, gstar) - z_hat * eig_g.u);
    out.y_g = x_g / std::sqrt(gstar * z_hat);
    const double dsum = d_t.sum();
    out.y_g_share = std::pow(tt, 0.5 * gstar) * (d_t / dsum - uhat_g) *
                    std::sqrt(z_hat / gstar) * eig_g.u.sum();
    // w mode: K_t(c) ~ t P 1 with P estimated at t_inf.
    const double p_hat = eig_w.v.dot(k_inf) / tinf;
    if (!(p_hat > 0.0) || !(p_hat < 1.0)) {
      throw DegenerateCounts("item frequency plug-in outside (0,1)");
    }
    const Eigen::VectorXd x_w = std::sqrt(tt) * (k_t / tt - p_hat * eig_w.u);
    out.y_w = x_w / std::sqrt(p_hat * (1.0 - p_hat));
    const double ksum = k_t.sum();
    out.y_w_share = std::sqrt(tt) *
                    (k_t / ksum - Eigen::VectorXd::Constant(n, 1.0 / n)) *
                    static_cast<double>(n) * std::sqrt(p_hat / (1.0 - p_hat));
    if (n == 2) {
      const double kbar = 0.5 * (k_t(0) + k_t(1));
      out.contrast = (k_t(0) - k_t(1)) /
                     std::sqrt(2.0 * kbar * (1.0 - kbar / tt) /
                               (2.0 * iota_w_true - 1.0));
    }
    return out;
  };

  const auto reps = parallel_replicates<Rep>(config.s, config.threads, one);

  auto assemble = [&](const char* mode, auto get_y, auto get_share,
                      const Eigen::MatrixXd& theory,
                      const Eigen::MatrixXd& theory_share) {
    CltModeDiag d;
    d.mode = mode;
    Eigen::MatrixXd ys(n, config.s), shares(n, config.s);
    for (int i = 0; i < config.s; ++i) {
      ys.col(i) = get_y(reps[static_cast<std::size_t>(i)]);
      shares.col(i) = get_share(reps[static_cast<std::size_t>(i)]);
    }
    d.emp_cov = detail::sample_covariance(ys);
    d.theory_cov = theory;
    d.emp_share_cov = detail::sample_covariance(shares);
    d.theory_share_cov = theory_share;
    for (int h = 0; h < n; ++h) {
      d.max_diag_ratio_dev = std::max(
          d.max_diag_ratio_dev, std::abs(d.emp_cov(h, h) / theory(h, h) - 1.0));
    }
    d.share_max_abs_dev = (d.emp_share_cov - theory_share).cwiseAbs().maxCoeff() /
                          theory_share.cwiseAbs().maxCoeff();
    // Whiten by the full-rank theory covariance; components become iid N(0,1).
    const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(theory).matrixL();
    const Eigen::MatrixXd whitened =
        l.triangularView<Eigen::Lower>().solve(ys);
    d.whitened = detail::moment_diagnostics(whitened);
    return d;
  };

  CltDiagReport report;
  report.config = config;
  report.gamma_diag = assemble(
      "gamma", [](const Rep& r) { return r.y_g; },
      [](const Rep& r) { return r.y_g_share; }, c_g_adj,
      q_g * c_g * q_g.transpose());
  report.w_diag = assemble(
      "w", [](const Rep& r) { return r.y_w; },
      [](const Rep& r) { return r.y_w_share; }, c_w_adj,
      q_w * c_w * q_w.transpose());
  if (n == 2) {
    double m = 0, m2 = 0;
    for (const auto& r : reps) {
      m += r.contrast;
      m2 += r.contrast * r.contrast;
    }
    m /= config.s;
    report.w_diag.contrast_variance = m2 / config.s - m * m;
  }
  return report;
}

inline nlohmann::json clt_mode_to_json(const CltModeDiag& d) {
  nlohmann::json j;
  j["mode"] = d.mode;
  j["emp_cov"] = detail::to_nested(d.emp_cov);
  j["theory_cov"] = detail::to_nested(d.theory_cov);
  j["emp_share_cov"] = detail::to_nested(d.emp_share_cov);
  j["theory_share_cov"] = detail::to_nested(d.theory_share_cov);
  j["max_diag_ratio_dev"] = d.max_diag_ratio_dev;
  j["share_max_abs_dev"] = d.share_max_abs_dev;
  if (!std::isnan(d.contrast_variance)) j["contrast_variance"] = d.contrast_variance;
  j["whitened_mean"] = d.whitened.mean;
  j["whitened_mean_se"] = d.whitened.mean_se;
  j["whitened_skewness"] = d.whitened.skewness;
  j["whitened_excess_kurtosis"] = d.whitened.excess_kurtosis;
  j["whitened_ks_stat"] = d.whitened.ks_stat;
  return j;
}

// --- report serialization ----------------------------------------------------------------------

inline nlohmann::json coverage_to_json(const CoverageReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"replicate", row.replicate},
                    {"lower", row.lower},
                    {"upper", row.upper},
                    {"truth", row.truth},
                    {"hit", row.hit}});
  }
  return {{"config", r.config.to_json()},
          {"coverage", r.coverage},
          {"se", r.se},
          {"rows", rows}};
}

inline nlohmann::json size_power_to_json(const SizePowerReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"test", row.test},
                    {"iota0", row.iota0},
                    {"delta0", row.delta0},
                    {"delta1", row.delta1},
                    {"analytic_power", row.analytic},
                    {"empirical_rate", row.empirical},
                    {"se", row.se}});
  }
  return {{"config", r.config.to_json()}, {"rows", rows}};
}

inline nlohmann::json clt_diag_to_json(const CltDiagReport& r) {
  return {{"config", r.config.to_json()},
          {"gamma", clt_mode_to_json(r.gamma_diag)},
          {"w", clt_mode_to_json(r.w_diag)}};
}

// Every output directory gets a manifest sufficient to reproduce the artifacts
// bit-identically: full config, seeds, tool version, randomness recipe.  No
// timestamps, so reruns produce identical bytes.
inline void write_manifest(const std::string& dir, const nlohmann::json& config,
                           const std::string& command) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["tool"] = "innovnet";
  j["version"] = std::string(kToolVersion);
  j["generator"] = std::string(kGeneratorId);
  j["command"] = command;
  j["config"] = config;
  const auto path = std::filesystem::path(dir) / "manifest.json";
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace innovnet
