#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "innovnet/harness.hpp"
#include "innovnet/rng.hpp"
#include "reference_values.hpp"

using namespace innovnet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("innovnet_harness_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

nlohmann::json n2_family() {
  return {{"family", "n2"},      {"r", 0.75},        {"gamma_star", 0.75},
          {"eta", 0.5},          {"iota_gamma", 1.0}, {"iota_w", 1.25}};
}

nlohmann::json mean_field_family(int n, double phi, double iota_gamma,
                                 double iota_w) {
  return {{"family", "mean_field"},
          {"n", n},
          {"phi", phi},
          {"iota_gamma", iota_gamma},
          {"iota_w", iota_w}};
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

// --- configuration -------------------------------------------------------------------

TEST_CASE("experiment configs round-trip through JSON") {
  ExperimentConfig c;
  c.kind = "coverage";
  c.family = n2_family();
  c.s = 10;
  c.t = 100;
  c.t_inf = 1000;
  c.alpha = 0.1;
  c.master_seed = 7;
  c.threads = 2;
  c.iota0_gamma = {0.8, 1.0};
  c.iota0_w = {1.25};

  const ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
  REQUIRE(back.kind == c.kind);
  REQUIRE(back.family == c.family);
  REQUIRE(back.s == c.s);
  REQUIRE(back.t == c.t);
  REQUIRE(back.t_inf == c.t_inf);
  REQUIRE(back.alpha == c.alpha);
  REQUIRE(back.master_seed == c.master_seed);
  REQUIRE(back.threads == c.threads);
  REQUIRE(back.iota0_gamma == c.iota0_gamma);
  REQUIRE(back.iota0_w == c.iota0_w);

  REQUIRE(c.is_n2());
  REQUIRE_FALSE(c.is_mean_field());
  REQUIRE(c.true_r() == 0.75);
  REQUIRE(c.true_eta() == 0.5);
  REQUIRE(c.true_gamma_star() == 0.75);
  REQUIRE(c.true_iota_gamma() == 1.0);
  REQUIRE(c.true_iota_w() == 1.25);

  ExperimentConfig mf;
  mf.kind = "coverage";
  mf.family = mean_field_family(3, 0.75, 0.8, 0.8);
  REQUIRE(mf.is_mean_field());
  REQUIRE(mf.true_r() == 1.0);
  REQUIRE(mf.true_eta() == 0.5);
  REQUIRE(mf.true_gamma_star() == 0.75);

  // Defaults fill in when keys are absent.
  const ExperimentConfig min =
      ExperimentConfig::from_json({{"family", mean_field_family(3, 0.75, 0.8, 0.8)}});
  REQUIRE(min.s == 200);
  REQUIRE(min.t == 1000);
  REQUIRE(min.t_inf == 100000);
  REQUIRE(min.alpha == 0.05);
  REQUIRE(min.master_seed == 1);
}

TEST_CASE("experiment validation rejects malformed configs") {
  ExperimentConfig c;
  c.kind = "coverage";
  c.family = mean_field_family(3, 0.75, 0.8, 0.8);
  c.s = 8;
  c.t = 100;
  c.t_inf = 1000;
  REQUIRE_NOTHROW(c.validate_experiment());

  ExperimentConfig bad = c;
  bad.s = 0;
  REQUIRE_THROWS_AS(bad.validate_experiment(), std::invalid_argument);

  bad = c;
  bad.alpha = 0.0;
  REQUIRE_THROWS_AS(bad.validate_experiment(), std::invalid_argument);
  bad.alpha = 1.0;
  REQUIRE_THROWS_AS(bad.validate_experiment(), std::invalid_argument);

  bad = c;
  bad.t_inf = bad.t;  // no truth proxy possible
  REQUIRE_THROWS_AS(bad.validate_experiment(), std::invalid_argument);
  bad.kind = "size_power";  // size/power never looks past t
  REQUIRE_NOTHROW(bad.validate_experiment());

  bad = c;
  bad.family = {{"family", "unknown"}};
  REQUIRE_THROWS_AS(bad.validate_experiment(), std::invalid_argument);
  bad.family = nlohmann::json::object();
  REQUIRE_THROWS_AS(bad.validate_experiment(), std::invalid_argument);
}

TEST_CASE("parallel replicate scheduling is order-stable and propagates errors") {
  auto square = [](int i) { return i * i; };
  const auto serial = parallel_replicates<int>(100, 1, square);
  const auto pooled = parallel_replicates<int>(100, 4, square);
  REQUIRE(serial == pooled);
  for (int i = 0; i < 100; ++i) REQUIRE(serial[static_cast<std::size_t>(i)] == i * i);

  auto throwing = [](int i) -> int {
    if (i == 50) throw std::runtime_error("boom");
    return i;
  };
  REQUIRE_THROWS_AS(parallel_replicates<int>(64, 1, throwing), std::runtime_error);
  REQUIRE_THROWS_AS(parallel_replicates<int>(64, 4, throwing), std::runtime_error);
}

// --- coverage ------------------------------------------------------------------------

TEST_CASE("coverage replicates are deterministic and plot-ready") {
  ExperimentConfig c;
  c.kind = "coverage";
  c.family = mean_field_family(3, 0.75, 0.8, 0.8);
  c.s = 16;
  c.t = 200;
  c.t_inf = 2000;
  c.alpha = 0.05;
  c.master_seed = 20260814;
  c.threads = 2;

  const CoverageReport report = run_coverage(c);
  REQUIRE(report.rows.size() == 16);

  // Rows come sorted by the truth proxy for direct plotting.
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    REQUIRE(report.rows[i - 1].truth <= report.rows[i].truth);
  }
  int hits = 0;
  for (const auto& row : report.rows) {
    REQUIRE(row.lower < row.upper);
    REQUIRE(row.truth > 0.0);
    REQUIRE(row.hit == (row.lower <= row.truth && row.truth <= row.upper));
    hits += row.hit ? 1 : 0;
  }
  REQUIRE(report.coverage == static_cast<double>(hits) / 16.0);
  REQUIRE(report.se ==
          std::sqrt(report.coverage * (1.0 - report.coverage) / 16.0));

  // Thread count must not affect the aggregate.
  ExperimentConfig serial = c;
  serial.threads = 1;
  const CoverageReport again = run_coverage(serial);
  REQUIRE(again.coverage == report.coverage);
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    REQUIRE(again.rows[i].replicate == report.rows[i].replicate);
    REQUIRE(again.rows[i].lower == report.rows[i].lower);
    REQUIRE(again.rows[i].truth == report.rows[i].truth);
  }

  // Two-process families use the asymmetry-aware interval without incident.
  ExperimentConfig n2 = c;
  n2.family = n2_family();
  n2.s = 4;
  REQUIRE_NOTHROW(run_coverage(n2));
}

TEST_CASE("coverage reports serialize to CSV and JSON") {
  ExperimentConfig c;
  c.kind = "coverage";
  c.family = mean_field_family(3, 0.75, 0.8, 0.8);
  c.s = 6;
  c.t = 150;
  c.t_inf = 1500;
  c.master_seed = 3;
  c.threads = 1;
  const CoverageReport report = run_coverage(c);

  TempDir dir;
  const auto csv = dir.path / "coverage.csv";
  write_coverage_csv(report, csv.string());
  const auto lines = read_lines(csv);
  REQUIRE(lines.size() == 7);
  REQUIRE(lines[0] == "index,lower,upper,truth,hit");
  REQUIRE(lines[1].rfind("1,", 0) == 0);
  REQUIRE(lines[6].rfind("6,", 0) == 0);

  const nlohmann::json j = coverage_to_json(report);
  REQUIRE(j.at("rows").size() == 6);
  REQUIRE(j.at("coverage").get<double>() == report.coverage);
  REQUIRE(j.at("config").at("kind").get<std::string>() == "coverage");

  REQUIRE_THROWS_AS(
      write_coverage_csv(report, (dir.path / "no_dir" / "x.csv").string()), IoError);
}

// --- size and power -------------------------------------------------------------------

TEST_CASE("size and power grids label their cells against the analytic law") {
  ExperimentConfig c;
  c.kind = "size_power";
  c.family = mean_field_family(3, 0.75, 0.8, 0.8);
  c.s = 30;
  c.t = 400;
  c.alpha = 0.1;
  c.master_seed = 11;
  c.threads = 2;
  c.iota0_gamma = {0.8, 1.0};
  c.iota0_w = {0.8};

  const SizePowerReport report = run_size_power(c);
  REQUIRE(report.rows.size() == 3);
  REQUIRE(report.rows[0].test == "gamma_meanfield");
  REQUIRE(report.rows[1].test == "gamma_meanfield");
  REQUIRE(report.rows[2].test == "w_meanfield");

  // Null gaps move with the hypothesized intensity; the true gap is fixed.
  REQUIRE(std::abs(report.rows[0].delta0 - 0.3) < 1e-14);
  REQUIRE(std::abs(report.rows[1].delta0 - 0.5) < 1e-14);
  REQUIRE(std::abs(report.rows[2].delta0 - 0.3) < 1e-14);
  for (const auto& row : report.rows) {
    REQUIRE(std::abs(row.delta1 - 0.3) < 1e-14);
    REQUIRE(row.empirical >= 0.0);
    REQUIRE(row.empirical <= 1.0);
    REQUIRE(row.se == std::sqrt(row.empirical * (1.0 - row.empirical) / c.s));
  }

  // Testing the truth itself predicts rejection at exactly the level.
  REQUIRE(std::abs(report.rows[0].analytic - c.alpha) < 1e-9);
  REQUIRE(std::abs(report.rows[2].analytic - c.alpha) < 1e-9);
  // A tighter null gap than the truth predicts above-level rejection.
  REQUIRE(report.rows[1].analytic > c.alpha);

  // Replicates are deterministic in the master seed.
  const SizePowerReport again = run_size_power(c);
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    REQUIRE(again.rows[i].empirical == report.rows[i].empirical);
  }

  ExperimentConfig empty = c;
  empty.iota0_gamma.clear();
  empty.iota0_w.clear();
  REQUIRE_THROWS_AS(run_size_power(empty), std::invalid_argument);
}

TEST_CASE("two-process size and power cells use the streamlined tests") {
  ExperimentConfig c;
  c.kind = "size_power";
  c.family = n2_family();
  c.s = 20;
  c.t = 400;
  c.alpha = 0.05;
  c.master_seed = 5;
  c.threads = 1;
  c.iota0_gamma = {1.0};
  c.iota0_w = {1.25};

  const SizePowerReport report = run_size_power(c);
  REQUIRE(report.rows.size() == 2);
  REQUIRE(report.rows[0].test == "gamma_n2");
  REQUIRE(std::abs(report.rows[0].delta0 - refvals::kGammaN2Delta0) < 1e-12);
  REQUIRE(report.rows[1].test == "w_n2");
  REQUIRE(std::abs(report.rows[1].delta0 - 0.75) < 1e-14);

  TempDir dir;
  const auto csv = dir.path / "size_power.csv";
  write_size_power_csv(report, csv.string());
  const auto lines = read_lines(csv);
  REQUIRE(lines.size() == 3);
  REQUIRE(lines[0] == "test,iota0,delta0,delta1,analytic_power,empirical_rate,se");
  REQUIRE(lines[1].rfind("gamma_n2,", 0) == 0);
  REQUIRE(lines[2].rfind("w_n2,", 0) == 0);

  const nlohmann::json j = size_power_to_json(report);
  REQUIRE(j.at("rows").size() == 2);
  REQUIRE(j.at("rows")[0].at("test") == "gamma_n2");
}

// --- manifest ------------------------------------------------------------------------

TEST_CASE("manifests are reproducible byte for byte") {
  ExperimentConfig c;
  c.kind = "coverage";
  c.family = n2_family();

  TempDir dir;
  const auto out = dir.path / "artifacts";
  write_manifest(out.string(), c.to_json(), "innovnet coverage --config cfg.json");
  const std::string first = read_file(out / "manifest.json");
  write_manifest(out.string(), c.to_json(), "innovnet coverage --config cfg.json");
  const std::string second = read_file(out / "manifest.json");
  REQUIRE(first == second);

  const nlohmann::json j = nlohmann::json::parse(first);
  REQUIRE(j.at("tool") == "innovnet");
  REQUIRE(j.at("version") == std::string(kToolVersion));
  REQUIRE(j.at("generator") == std::string(kGeneratorId));
  REQUIRE(j.at("command") == "innovnet coverage --config cfg.json");
  REQUIRE(ExperimentConfig::from_json(j.at("config")).family == c.family);
}

// --- moment diagnostics -----------------------------------------------------------------

TEST_CASE("moment diagnostics accept standard normal samples") {
  std::mt19937_64 eng(20260814);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd ys(2, 4000);
  for (int i = 0; i < 4000; ++i) {
    ys(0, i) = gauss(eng);
    ys(1, i) = gauss(eng);
  }
  const detail::MomentDiag d = detail::moment_diagnostics(ys);
  for (int h = 0; h < 2; ++h) {
    REQUIRE(std::abs(d.mean[static_cast<std::size_t>(h)]) <
            4.0 * d.mean_se[static_cast<std::size_t>(h)]);
    REQUIRE(std::abs(d.skewness[static_cast<std::size_t>(h)]) < 0.15);
    REQUIRE(std::abs(d.excess_kurtosis[static_cast<std::size_t>(h)]) < 0.3);
    REQUIRE(d.ks_stat[static_cast<std::size_t>(h)] < 0.03);
  }
}

TEST_CASE("sample covariance recovers a planted linear mixing") {
  std::mt19937_64 eng(7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 0.0, 0.6, 0.8;
  Eigen::MatrixXd xs(2, 20000);
  for (int i = 0; i < 20000; ++i) {
    xs(0, i) = gauss(eng);
    xs(1, i) = gauss(eng);
  }
  const Eigen::MatrixXd cov = detail::sample_covariance(a * xs);
  const Eigen::MatrixXd target = a * a.transpose();
  REQUIRE((cov - target).cwiseAbs().maxCoeff() < 0.05);

  const auto nested = detail::to_nested(cov);
  REQUIRE(nested.size() == 2);
  REQUIRE(nested[0].size() == 2);
  REQUIRE(nested[0][0] == cov(0, 0));
}

// --- central limit theorem diagnostics ----------------------------------------------------

TEST_CASE("clt diagnostics are invariant to the worker pool size") {
  ExperimentConfig c;
  c.kind = "clt_diagnostics";
  c.family = mean_field_family(3, 0.75, 0.8, 0.8);
  c.s = 24;
  c.t = 300;
  c.t_inf = 3000;
  c.master_seed = 17;
  c.threads = 3;

  const CltDiagReport pooled = run_clt_diagnostics(c);
  c.threads = 1;
  const CltDiagReport serial = run_clt_diagnostics(c);

  REQUIRE(pooled.gamma_diag.emp_cov == serial.gamma_diag.emp_cov);
  REQUIRE(pooled.w_diag.emp_cov == serial.w_diag.emp_cov);
  REQUIRE(pooled.w_diag.emp_share_cov == serial.w_diag.emp_share_cov);
  REQUIRE(pooled.gamma_diag.theory_cov.rows() == 3);

  const nlohmann::json j = clt_diag_to_json(pooled);
  REQUIRE(j.at("gamma").at("mode") == "gamma");
  REQUIRE(j.at("w").at("emp_cov").size() == 3);
  REQUIRE(j.at("w").contains("whitened_ks_stat"));
}

TEST_CASE("studentized item-count fluctuations match the limit law",
          "[.][slow]") {
  // Two symmetric processes with fully mean-field reinforcement: the
  // studentized count contrast has unit limiting variance.
  ExperimentConfig c;
  c.kind = "clt_diagnostics";
  c.family = mean_field_family(2, 0.75, 0.8, 1.0);
  c.s = 500;
  c.t = 10000;
  c.t_inf = 100000;
  c.master_seed = 101;
  c.threads = 0;

  const CltDiagReport report = run_clt_diagnostics(c);
  const CltModeDiag& w = report.w_diag;

  REQUIRE(w.contrast_variance > 0.85);
  REQUIRE(w.contrast_variance < 1.15);

  // Centering holds componentwise in both modes.
  for (int h = 0; h < 2; ++h) {
    const auto i = static_cast<std::size_t>(h);
    REQUIRE(std::abs(w.whitened.mean[i]) < 3.0 * w.whitened.mean_se[i]);
    REQUIRE(std::abs(report.gamma_diag.whitened.mean[i]) <
            3.0 * report.gamma_diag.whitened.mean_se[i]);
  }

  // Share fluctuations live in the contrast space, which the truth-proxy
  // plug-in does not perturb.
  REQUIRE(w.share_max_abs_dev < 0.25);
}

TEST_CASE("studentized novelty-count fluctuations match the limit law",
          "[.][slow]") {
  // The novelty scale t^{gamma*} concentrates more slowly, so the variance
  // gate runs at a longer horizon with a deeper truth proxy.  A small growth
  // exponent keeps the finite-horizon bias of the per-step birth variance
  // (relative size ~ growth-rate * t^{gamma*-1}) well inside the band at
  // this horizon.
  ExperimentConfig c;
  c.kind = "clt_diagnostics";
  c.family = mean_field_family(2, 0.4, 0.9, 0.9);
  c.s = 500;
  c.t = 100000;
  c.t_inf = 1000000;
  c.master_seed = 202;
  c.threads = 0;

  const CltDiagReport report = run_clt_diagnostics(c);

  for (int h = 0; h < 2; ++h) {
    const double gamma_ratio =
        report.gamma_diag.emp_cov(h, h) / report.gamma_diag.theory_cov(h, h);
    REQUIRE(gamma_ratio > 0.8);
    REQUIRE(gamma_ratio < 1.25);
    const double w_ratio =
        report.w_diag.emp_cov(h, h) / report.w_diag.theory_cov(h, h);
    REQUIRE(w_ratio > 0.8);
    REQUIRE(w_ratio < 1.25);
  }
  REQUIRE(report.gamma_diag.share_max_abs_dev < 0.25);
  REQUIRE(report.w_diag.share_max_abs_dev < 0.25);
}
