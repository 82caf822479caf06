#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "innovnet/enumeration.hpp"
#include "innovnet/errors.hpp"
#include "innovnet/estimators.hpp"
#include "innovnet/harness.hpp"
#include "innovnet/inference.hpp"
#include "innovnet/ingest.hpp"
#include "innovnet/model_params.hpp"
#include "innovnet/simulator.hpp"
#include "innovnet/spectral.hpp"
#include "innovnet/trajectory_io.hpp"

namespace innovnet {
namespace cli {

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad json in " + path + ": " + e.what());
  }
  return j;
}

inline void emit(const nlohmann::json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot open " + out_path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed on " + out_path);
}

inline std::string join_args(int argc, const char* const* argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

inline nlohmann::json test_result_json(const TestResult& r) {
  nlohmann::json h;
  h["family"] = r.hypothesis.family;
  if (!std::isnan(r.hypothesis.iota0)) h["iota0"] = r.hypothesis.iota0;
  if (!std::isnan(r.hypothesis.eta0)) h["eta0"] = r.hypothesis.eta0;
  h["n"] = r.hypothesis.n;
  h["side"] = r.hypothesis.side;
  return {{"statistic", r.statistic},
          {"df", r.df},
          {"p_value", r.p_value},
          {"p_value_formatted", format_pvalue(r.p_value)},
          {"delta0", r.delta0},
          {"hypothesis", h}};
}

inline nlohmann::json ci_json(const ConfidenceInterval& ci) {
  return {{"center", ci.center},     {"half_width", ci.half_width},
          {"lower", ci.lower()},     {"upper", ci.upper()},
          {"level", ci.level},       {"t", ci.t},
          {"c_factor", ci.c_factor}};
}

struct CommonOverrides {
  std::optional<int> s;
  std::optional<std::uint64_t> t, t_inf, master_seed;
  std::optional<double> alpha;
  std::optional<int> threads;

  void attach(CLI::App* cmd) {
    cmd->add_option("--s", s, "replicate count override");
    cmd->add_option("--t", t, "evaluation step override");
    cmd->add_option("--t-inf", t_inf, "truth-proxy step override");
    cmd->add_option("--alpha", alpha, "level override");
    cmd->add_option("--master-seed", master_seed, "master seed override");
    cmd->add_option("--threads", threads, "worker threads (0 = hardware)");
  }
  void apply(ExperimentConfig& c) const {
    if (s) c.s = *s;
    if (t) c.t = *t;
    if (t_inf) c.t_inf = *t_inf;
    if (alpha) c.alpha = *alpha;
    if (master_seed) c.master_seed = *master_seed;
    if (threads) c.threads = *threads;
  }
};

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{
      "innovnet: simulation and inference for systems of interacting "
      "innovation processes"};
  app.require_subcommand(1);
  const std::string command_line = join_args(argc, argv);

  // ---- simulate --------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "run one seeded trajectory");
  std::string sim_params, sim_out = ".";
  std::uint64_t sim_seed = 1, sim_horizon = 1000, sim_select = 0;
  int sim_per_decade = 50, sim_top = 0;
  std::vector<std::uint64_t> sim_ids;
  sim->add_option("--params", sim_params, "model parameter json (matrices or family)")
      ->required();
  sim->add_option("--seed", sim_seed, "run seed");
  sim->add_option("--horizon", sim_horizon, "number of steps")->required();
  sim->add_option("--per-decade", sim_per_decade, "checkpoints per decade of t");
  sim->add_option("--track-top", sim_top, "track the top-M items");
  sim->add_option("--select-at", sim_select,
                  "step at which the top-M items are chosen (default: horizon)");
  sim->add_option("--track-ids", sim_ids, "track explicit color ids");
  sim->add_option("--out", sim_out, "output directory");

  // ---- estimate --------------------------------------------------------------
  auto* est = app.add_subcommand("estimate",
                                 "estimate growth exponent and component ratios");
  std::string est_dir, est_stem = "trajectory", est_out;
  double est_window = 0.1;
  est->add_option("--traj", est_dir, "trajectory directory")->required();
  est->add_option("--stem", est_stem, "trajectory file stem");
  est->add_option("--window", est_window, "trailing window fraction");
  est->add_option("--out", est_out, "output json path (default stdout)");

  // ---- test ------------------------------------------------------------------
  auto* tst = app.add_subcommand("test", "hypothesis tests on a trajectory");
  std::string tst_dir, tst_stem = "trajectory", tst_null, tst_out, tst_csv;
  double tst_alpha = 0.05;
  bool tst_bonferroni = false;
  tst->add_option("--traj", tst_dir, "trajectory directory")->required();
  tst->add_option("--stem", tst_stem, "trajectory file stem");
  tst->add_option("--null", tst_null, "null hypothesis json")->required();
  tst->add_option("--alpha", tst_alpha, "level for the rejection column");
  tst->add_flag("--bonferroni", tst_bonferroni,
                "multiply per-item p-values by the item count");
  tst->add_option("--out", tst_out, "output json path (default stdout)");
  tst->add_option("--per-item-csv", tst_csv, "write per-item p-values as csv");

  // ---- ci --------------------------------------------------------------------
  auto* civ = app.add_subcommand("ci", "pooled-frequency confidence intervals");
  std::string ci_dir, ci_stem = "trajectory", ci_out;
  double ci_alpha = 0.05;
  std::optional<double> ci_eta;
  bool ci_eta_unknown = false;
  civ->add_option("--traj", ci_dir, "trajectory directory")->required();
  civ->add_option("--stem", ci_stem, "trajectory file stem");
  civ->add_option("--alpha", ci_alpha, "1 - level");
  civ->add_option("--eta", ci_eta, "known asymmetry (two-process interval)");
  civ->add_flag("--eta-unknown", ci_eta_unknown,
                "two-process conservative interval (widest over eta)");
  civ->add_option("--out", ci_out, "output json path (default stdout)");

  // ---- ingest ----------------------------------------------------------------
  auto* ing = app.add_subcommand("ingest",
                                 "convert aligned token streams to observables");
  std::vector<std::string> ing_files, ing_names;
  std::string ing_out = ".";
  int ing_per_decade = 50, ing_top = 100;
  std::uint64_t ing_horizon = 0;
  bool ing_fold = false;
  ing->add_option("--streams", ing_files, "one token-per-line file per process")
      ->required()
      ->expected(-1);
  ing->add_option("--names", ing_names, "process labels");
  ing->add_flag("--fold-case", ing_fold, "lowercase ascii before matching");
  ing->add_option("--per-decade", ing_per_decade, "checkpoints per decade");
  ing->add_option("--top-m", ing_top, "number of items to track");
  ing->add_option("--horizon", ing_horizon,
                  "use only the first H steps (default: full truncated length)");
  ing->add_option("--out", ing_out, "output directory");

  // ---- experiments -----------------------------------------------------------
  auto* cov = app.add_subcommand("coverage", "confidence-interval coverage study");
  std::string cov_config, cov_out;
  CommonOverrides cov_over;
  cov->add_option("--config", cov_config, "experiment config json")->required();
  cov->add_option("--out", cov_out, "output directory");
  cov_over.attach(cov);

  auto* szp = app.add_subcommand("size-power", "test size/power study");
  std::string szp_config, szp_out;
  CommonOverrides szp_over;
  szp->add_option("--config", szp_config, "experiment config json")->required();
  szp->add_option("--out", szp_out, "output directory");
  szp_over.attach(szp);

  auto* cdg = app.add_subcommand("clt-diag", "fluctuation-covariance diagnostics");
  std::string cdg_config, cdg_out;
  CommonOverrides cdg_over;
  cdg->add_option("--config", cdg_config, "experiment config json")->required();
  cdg->add_option("--out", cdg_out, "output directory");
  cdg_over.attach(cdg);

  // ---- spectral (debugging) ----------------------------------------------------
  auto* spc = app.add_subcommand("spectral",
                                 "dump eigenstructure and limit covariances");
  std::string spc_params, spc_out;
  std::string spc_matrix = "gamma";
  spc->add_option("--params", spc_params, "model parameter json")->required();
  spc->add_option("--matrix", spc_matrix, "gamma | w")
      ->check(CLI::IsMember({"gamma", "w"}));
  spc->add_option("--out", spc_out, "output json path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (*sim) {
      const ModelParams params = params_from_json(load_json_file(sim_params));
      const auto schedule = CheckpointSchedule::log_spaced(sim_horizon, sim_per_decade);
      TrackPolicy track = TrackPolicy::none();
      if (!sim_ids.empty()) {
        std::vector<std::uint32_t> ids(sim_ids.begin(), sim_ids.end());
        track = TrackPolicy::ids(std::move(ids));
      } else if (sim_top > 0) {
        track = TrackPolicy::top(sim_top, sim_select);
      }
      const Trajectory traj = run(params, sim_seed, sim_horizon, schedule, track);
      save_trajectory(traj, sim_out);
      write_manifest(sim_out,
                     {{"kind", "simulate"},
                      {"params", params_to_json(params)},
                      {"seed", sim_seed},
                      {"horizon", sim_horizon},
                      {"per_decade", sim_per_decade},
                      {"track_top", sim_top},
                      {"select_at", sim_select},
                      {"track_ids", sim_ids}},
                     command_line);
      std::cout << "wrote " << sim_out << "/trajectory.{csv,json} ("
                << traj.checkpoints.size() << " checkpoints, "
                << traj.tracked.size() << " tracked items)\n";
      return 0;
    }

    if (*est) {
      const Trajectory traj = load_trajectory_dir(est_dir, est_stem);
      const RegressionFit fit = heaps_exponent(traj, est_window);
      nlohmann::json j;
      j["gamma_star_hat"] = fit.slope;
      j["fit"] = {{"slope", fit.slope},
                  {"intercept", fit.intercept},
                  {"residual_rms", fit.residual_rms},
                  {"t_lo", fit.t_lo},
                  {"t_hi", fit.t_hi},
                  {"n_points", fit.n_points}};
      j["window"] = est_window;
      const int n = traj.n_processes();
      nlohmann::json ratios = nlohmann::json::array();
      for (int h = 0; h < n; ++h) {
        for (int g = h + 1; g < n; ++g) {
          ratios.push_back(
              {{"numerator", h},
               {"denominator", g},
               {"geometric_mean", eigvec_ratio(traj, h, g, est_window)},
               {"intercept_difference",
                eigvec_ratio(traj, h, g, est_window,
                             RatioVariant::intercept_difference)}});
        }
      }
      j["eigvec_ratios"] = ratios;
      if (n == 2) j["r_hat"] = j["eigvec_ratios"][0]["geometric_mean"];
      emit(j, est_out);
      return 0;
    }

    if (*tst) {
      const Trajectory traj = load_trajectory_dir(tst_dir, tst_stem);
      const nlohmann::json h = load_json_file(tst_null);
      const std::string family = h.at("family").get<std::string>();
      nlohmann::json out;
      out["null"] = h;
      out["t"] = traj.horizon;
      if (family == "n2_gamma" || family == "meanfield_gamma") {
        const auto& ds = traj.final_d_star();
        TestResult res;
        if (family == "n2_gamma") {
          if (traj.n_processes() != 2) throw DegenerateCounts("need a 2-process trajectory");
          res = test_gamma_n2(static_cast<double>(ds[0]), static_cast<double>(ds[1]),
                              h.at("r").get<double>(),
                              h.at("gamma_star").get<double>(),
                              h.at("iota0").get<double>(), h.value("eta0", 0.5));
        } else {
          res = test_gamma_meanfield(ds, h.at("iota0").get<double>());
        }
        out["result"] = test_result_json(res);
        out["reject_at_alpha"] = res.p_value < tst_alpha;
      } else if (family == "n2_w" || family == "meanfield_w" || family == "general") {
        if (traj.tracked.empty() || traj.k.empty()) {
          throw DegenerateCounts("trajectory has no tracked items for a w-type test");
        }
        std::vector<double> pvals;
        nlohmann::json items = nlohmann::json::array();
        const std::size_t n_items = traj.tracked.size();
        for (std::size_t i = 0; i < n_items; ++i) {
          const auto k = traj.final_k(i);
          TestResult res;
          if (family == "n2_w") {
            if (traj.n_processes() != 2) throw DegenerateCounts("need a 2-process trajectory");
            res = test_w_n2(static_cast<double>(k[0]), static_cast<double>(k[1]),
                            traj.horizon, h.at("iota0").get<double>());
          } else if (family == "meanfield_w") {
            res = test_w_meanfield(k, traj.horizon, h.at("iota0").get<double>());
          } else {
            const Eigen::MatrixXd phi0 = matrix_from_json(h.at("phi0"));
            const std::string gm = h.value("g_mode", std::string("bernoulli"));
            Eigen::VectorXd b(static_cast<Eigen::Index>(k.size()));
            for (std::size_t q = 0; q < k.size(); ++q) {
              b(static_cast<Eigen::Index>(q)) =
                  static_cast<double>(k[q]) / static_cast<double>(traj.horizon);
            }
            res = test_general(b, phi0,
                               gm == "identity" ? GMode::identity : GMode::bernoulli,
                               static_cast<double>(traj.horizon),
                               h.value("phi_star", 1.0));
          }
          double p = res.p_value;
          if (tst_bonferroni) p = std::min(1.0, p * static_cast<double>(n_items));
          pvals.push_back(p);
          nlohmann::json ji = test_result_json(res);
          ji["item"] = traj.tracked[i];
          if (i < traj.tracked_labels.size()) ji["label"] = traj.tracked_labels[i];
          ji["p_value_adjusted"] = p;
          items.push_back(std::move(ji));
        }
        out["items"] = items;
        const PvalueSummary summary = pvalue_summary(pvals, {0.5, 0.75, 0.95});
        out["summary"] = {{"q50", summary.formatted[0]},
                          {"q75", summary.formatted[1]},
                          {"q95", summary.formatted[2]},
                          {"values", summary.values},
                          {"bonferroni", tst_bonferroni}};
        if (!tst_csv.empty()) {
          std::ofstream csv(tst_csv);
          if (!csv) throw IoError("cannot open " + tst_csv + " for writing");
          csv << "item,label,statistic,p_value,p_value_adjusted\n";
          csv.precision(12);
          for (std::size_t i = 0; i < n_items; ++i) {
            csv << traj.tracked[i] << ","
                << (i < traj.tracked_labels.size() ? traj.tracked_labels[i] : "")
                << "," << items[i]["statistic"].get<double>() << ","
                << items[i]["p_value"].get<double>() << ","
                << items[i]["p_value_adjusted"].get<double>() << "\n";
          }
        }
      } else {
        throw std::invalid_argument("unknown test family '" + family + "'");
      }
      emit(out, tst_out);
      return 0;
    }

    if (*civ) {
      const Trajectory traj = load_trajectory_dir(ci_dir, ci_stem);
      if (traj.tracked.empty() || traj.k.empty()) {
        throw DegenerateCounts("trajectory has no tracked items");
      }
      const int n = traj.n_processes();
      nlohmann::json items = nlohmann::json::array();
      for (std::size_t i = 0; i < traj.tracked.size(); ++i) {
        const auto k = traj.final_k(i);
        ConfidenceInterval ci;
        if (n == 2 && (ci_eta.has_value() || ci_eta_unknown)) {
          ci = ci_p_tilde_n2(static_cast<double>(k[0]), static_cast<double>(k[1]),
                             traj.horizon,
                             ci_eta_unknown ? std::nullopt : ci_eta, ci_alpha);
        } else {
          ci = ci_p_tilde_meanfield(k, traj.horizon, ci_alpha);
        }
        nlohmann::json ji = ci_json(ci);
        ji["item"] = traj.tracked[i];
        if (i < traj.tracked_labels.size()) ji["label"] = traj.tracked_labels[i];
        items.push_back(std::move(ji));
      }
      emit({{"t", traj.horizon}, {"alpha", ci_alpha}, {"items", items}}, ci_out);
      return 0;
    }

    if (*ing) {
      const TokenStreams streams = load_streams(ing_files, ing_fold, ing_names);
      const std::uint64_t horizon =
          ing_horizon > 0 ? std::min<std::uint64_t>(ing_horizon, streams.length())
                          : streams.length();
      const auto schedule = CheckpointSchedule::log_spaced(horizon, ing_per_decade);
      const ObservableBundle bundle = observables(streams, schedule, ing_top);
      save_trajectory(bundle.traj, ing_out);
      nlohmann::json summary;
      summary["n"] = streams.n();
      summary["length"] = streams.length();
      summary["original_lengths"] = streams.original_lengths;
      summary["horizon"] = horizon;
      summary["distinct_items"] = bundle.traj.final_d_star();
      summary["simultaneous_novelties"] = bundle.simultaneous_novelties;
      {
        std::ofstream out(std::filesystem::path(ing_out) / "ingest_summary.json");
        if (!out) throw IoError("cannot write ingest summary");
        out << summary.dump(2) << "\n";
      }
      write_manifest(ing_out,
                     {{"kind", "ingest"},
                      {"streams", ing_files},
                      {"fold_case", ing_fold},
                      {"per_decade", ing_per_decade},
                      {"top_m", ing_top},
                      {"horizon", horizon}},
                     command_line);
      std::cout << "ingested " << streams.n() << " streams x " << horizon
                << " steps, " << bundle.traj.tracked.size()
                << " tracked items, " << bundle.simultaneous_novelties
                << " simultaneous novelties\n";
      return 0;
    }

    if (*cov) {
      ExperimentConfig config = ExperimentConfig::from_json(load_json_file(cov_config));
      config.kind = "coverage";
      cov_over.apply(config);
      const CoverageReport report = run_coverage(config);
      if (!cov_out.empty()) {
        std::filesystem::create_directories(cov_out);
        write_coverage_csv(report,
                           (std::filesystem::path(cov_out) / "coverage.csv").string());
        emit(coverage_to_json(report),
             (std::filesystem::path(cov_out) / "coverage.json").string());
        write_manifest(cov_out, config.to_json(), command_line);
      }
      std::cout << "coverage " << report.coverage << " (se " << report.se << ", s="
                << config.s << ", t=" << config.t << ", t_inf=" << config.t_inf
                << ")\n";
      return 0;
    }

    if (*szp) {
      ExperimentConfig config = ExperimentConfig::from_json(load_json_file(szp_config));
      config.kind = "size_power";
      szp_over.apply(config);
      const SizePowerReport report = run_size_power(config);
      if (!szp_out.empty()) {
        std::filesystem::create_directories(szp_out);
        write_size_power_csv(
            report, (std::filesystem::path(szp_out) / "size_power.csv").string());
        emit(size_power_to_json(report),
             (std::filesystem::path(szp_out) / "size_power.json").string());
        write_manifest(szp_out, config.to_json(), command_line);
      }
      for (const auto& row : report.rows) {
        std::cout << row.test << " iota0=" << row.iota0 << " empirical="
                  << row.empirical << " analytic=" << row.analytic << "\n";
      }
      return 0;
    }

    if (*cdg) {
      ExperimentConfig config = ExperimentConfig::from_json(load_json_file(cdg_config));
      config.kind = "clt_diagnostics";
      cdg_over.apply(config);
      const CltDiagReport report = run_clt_diagnostics(config);
      const nlohmann::json j = clt_diag_to_json(report);
      if (!cdg_out.empty()) {
        std::filesystem::create_directories(cdg_out);
        emit(j, (std::filesystem::path(cdg_out) / "clt_diag.json").string());
        write_manifest(cdg_out, config.to_json(), command_line);
      } else {
        emit(j, "");
      }
      std::cout << "gamma max diag ratio dev " << report.gamma_diag.max_diag_ratio_dev
                << ", w max diag ratio dev " << report.w_diag.max_diag_ratio_dev
                << "\n";
      return 0;
    }

    if (*spc) {
      const ModelParams params = params_from_json(load_json_file(spc_params));
      const Eigen::MatrixXd& m = spc_matrix == "gamma" ? params.gamma : params.w;
      const EigenStructure eig = eigen_structure(m);
      nlohmann::json j;
      j["matrix"] = spc_matrix;
      j["phi_star"] = eig.phi_star;
      j["phi2_star"] = {{"re", eig.phi2_star.real()}, {"im", eig.phi2_star.imag()}};
      j["u"] = std::vector<double>(eig.u.data(), eig.u.data() + eig.u.size());
      j["v"] = std::vector<double>(eig.v.data(), eig.v.data() + eig.v.size());
      const CltMode mode = spc_matrix == "gamma" ? CltMode::gamma : CltMode::w;
      j["gap"] = 0.5 - eig.phi2_star.real() / eig.phi_star;
      j["c_det"] = detail::to_nested(c_det(eig, mode));
      const CovarianceBlocks blocks =
          covariance_blocks(eig, sigma_det_for_mode(eig, mode));
      j["m11"] = detail::to_nested(blocks.m11);
      j["m13"] = detail::to_nested(blocks.m13);
      j["m33"] = detail::to_nested(blocks.m33);
      emit(j, spc_out);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << nlohmann::json({{"error", e.what()}, {"kind", "domain"}}).dump()
              << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json({{"error", e.what()}, {"kind", "runtime"}}).dump()
              << "\n";
    return 1;
  }
  return 2;  // no subcommand matched (require_subcommand should prevent this)
}

}  // namespace cli

inline int cli_main(int argc, const char* const* argv) {
  return cli::run_cli(argc, argv);
}

}  // namespace innovnet
