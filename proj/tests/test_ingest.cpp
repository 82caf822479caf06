#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "innovnet/ingest.hpp"
#include "innovnet/model_params.hpp"
#include "innovnet/rng.hpp"
#include "innovnet/simulator.hpp"

using namespace innovnet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("innovnet_ingest_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string write_lines(const TempDir& dir, const std::string& name,
                        const std::vector<std::string>& lines) {
  const fs::path p = dir.path / name;
  std::ofstream out(p, std::ios::binary);
  for (const auto& line : lines) out << line << '\n';
  return p.string();
}

ModelParams toy_params() {
  ModelParams p;
  p.theta = Eigen::Vector2d::Ones();
  p.gamma = Eigen::Matrix2d{{0.4, 0.3}, {0.3, 0.4}};
  p.w = Eigen::Matrix2d{{0.7, 0.3}, {0.3, 0.7}};
  return p;
}

}  // namespace

// --- stream loading -----------------------------------------------------------------

TEST_CASE("stream loading reads one token per line and truncates to alignment") {
  TempDir dir;
  const auto p1 = write_lines(dir, "one.txt", {"Apple", "", "Banana", "apple"});
  const auto p2 = write_lines(dir, "two.txt",
                              {"cherry", "apple", "cherry", "date", "elder"});

  const TokenStreams ts = load_streams({p1, p2});
  REQUIRE(ts.n() == 2);
  REQUIRE(ts.length() == 3);  // blank line skipped, then truncated to min
  REQUIRE(ts.original_lengths == std::vector<std::size_t>{3, 5});
  REQUIRE(ts.streams[0] == std::vector<std::string>{"Apple", "Banana", "apple"});
  REQUIRE(ts.streams[1] == std::vector<std::string>{"cherry", "apple", "cherry"});
  REQUIRE(ts.process_names == std::vector<std::string>{p1, p2});
}

TEST_CASE("stream loading folds case and strips carriage returns on request") {
  TempDir dir;
  const fs::path p = dir.path / "crlf.txt";
  {
    std::ofstream out(p, std::ios::binary);
    out << "Apple\r\nBANANA\r\n";
  }
  const auto q = write_lines(dir, "plain.txt", {"x", "y"});

  const TokenStreams folded = load_streams({p.string(), q}, true, {"a", "b"});
  REQUIRE(folded.streams[0] == std::vector<std::string>{"apple", "banana"});
  REQUIRE(folded.process_names == std::vector<std::string>{"a", "b"});

  const TokenStreams verbatim = load_streams({p.string(), q});
  REQUIRE(verbatim.streams[0] == std::vector<std::string>{"Apple", "BANANA"});
}

TEST_CASE("stream loading reports unreadable and empty inputs") {
  TempDir dir;
  const auto good = write_lines(dir, "good.txt", {"tok"});
  const auto blank = write_lines(dir, "blank.txt", {"", "", ""});

  REQUIRE_THROWS_AS(load_streams({}), std::invalid_argument);
  REQUIRE_THROWS_AS(load_streams({(dir.path / "missing.txt").string()}), IoError);
  REQUIRE_THROWS_AS(load_streams({good, blank}), EmptyStream);
  REQUIRE_THROWS_AS(load_streams({good}, false, {"a", "b"}), std::invalid_argument);
}

// --- observables --------------------------------------------------------------------

TEST_CASE("observables follow the hand-traced two-stream example") {
  TempDir dir;
  const auto p1 = write_lines(dir, "p1.txt", {"a", "b", "a"});
  const auto p2 = write_lines(dir, "p2.txt", {"c", "a", "c"});
  const TokenStreams ts = load_streams({p1, p2});

  const auto schedule = CheckpointSchedule::from_times({1, 2, 3});
  const ObservableBundle bundle = observables(ts, schedule, 3);
  const Trajectory& traj = bundle.traj;

  REQUIRE(traj.d_star.size() == 3);
  REQUIRE(traj.d_star[0] == std::vector<std::uint64_t>{1, 1});
  REQUIRE(traj.d_star[1] == std::vector<std::uint64_t>{2, 1});
  REQUIRE(traj.d_star[2] == std::vector<std::uint64_t>{2, 1});

  // Sum of final novelty counts equals the number of distinct tokens.
  REQUIRE(traj.final_d_star()[0] + traj.final_d_star()[1] == 3);
  REQUIRE(bundle.simultaneous_novelties == 0);
  REQUIRE(traj.source == "ingest");
  REQUIRE(traj.selection_step == 3);

  // Most frequent first: a (3 draws), c (2), b (1).
  REQUIRE(bundle.tracked_tokens == std::vector<std::string>{"a", "c", "b"});
  REQUIRE(traj.tracked_labels == bundle.tracked_tokens);

  // Per-checkpoint per-process counts of the tracked items.
  using Block = std::vector<std::vector<std::uint64_t>>;
  REQUIRE(traj.k[0] == Block{{1, 0}, {0, 1}, {0, 0}});
  REQUIRE(traj.k[1] == Block{{1, 1}, {0, 1}, {1, 0}});
  REQUIRE(traj.k[2] == Block{{2, 1}, {0, 2}, {1, 0}});

  // Every step contributes one draw per process.
  for (std::size_t ck = 0; ck < traj.checkpoints.size(); ++ck) {
    for (int h = 0; h < 2; ++h) {
      std::uint64_t total = 0;
      for (const auto& row : traj.k[ck]) total += row[static_cast<std::size_t>(h)];
      REQUIRE(total == traj.checkpoints[ck]);
    }
  }
}

TEST_CASE("simultaneous first appearances resolve to the lowest-index process") {
  TempDir dir;

  SECTION("identical single-token streams") {
    const auto p1 = write_lines(dir, "p1.txt", {"x"});
    const auto p2 = write_lines(dir, "p2.txt", {"x"});
    const ObservableBundle bundle =
        observables(load_streams({p1, p2}), CheckpointSchedule::from_times({1}), 1);
    REQUIRE(bundle.traj.d_star[0] == std::vector<std::uint64_t>{1, 0});
    REQUIRE(bundle.simultaneous_novelties == 1);
    REQUIRE(bundle.traj.k[0] == std::vector<std::vector<std::uint64_t>>{{1, 1}});
  }

  SECTION("three streams, two of them colliding") {
    const auto p1 = write_lines(dir, "q1.txt", {"x"});
    const auto p2 = write_lines(dir, "q2.txt", {"y"});
    const auto p3 = write_lines(dir, "q3.txt", {"x"});
    const ObservableBundle bundle = observables(
        load_streams({p1, p2, p3}), CheckpointSchedule::from_times({1}), 0);
    REQUIRE(bundle.traj.d_star[0] == std::vector<std::uint64_t>{1, 1, 0});
    REQUIRE(bundle.simultaneous_novelties == 1);
  }

  SECTION("collisions at every step accumulate") {
    const auto p1 = write_lines(dir, "r1.txt", {"a", "d"});
    const auto p2 = write_lines(dir, "r2.txt", {"a", "d"});
    const ObservableBundle bundle = observables(
        load_streams({p1, p2}), CheckpointSchedule::from_times({2}), 0);
    REQUIRE(bundle.simultaneous_novelties == 2);
  }
}

TEST_CASE("observables validate schedule and tracking arguments") {
  TempDir dir;
  const auto p1 = write_lines(dir, "p1.txt", {"a", "b"});
  const auto p2 = write_lines(dir, "p2.txt", {"c", "a"});
  const TokenStreams ts = load_streams({p1, p2});

  REQUIRE_THROWS_AS(observables(ts, CheckpointSchedule::from_times({3}), 1),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(observables(ts, CheckpointSchedule::from_times({2}), -1),
                    std::invalid_argument);

  const ObservableBundle none = observables(ts, CheckpointSchedule::from_times({2}), 0);
  REQUIRE(none.traj.tracked.empty());
  REQUIRE(none.traj.k.empty());

  // Requesting more items than exist returns them all, most frequent first.
  const ObservableBundle all = observables(ts, CheckpointSchedule::from_times({2}), 99);
  REQUIRE(all.traj.tracked.size() == 3);
}

TEST_CASE("observables are deterministic across repeated runs") {
  TempDir dir;
  const auto p1 = write_lines(dir, "p1.txt", {"u", "v", "u", "w"});
  const auto p2 = write_lines(dir, "p2.txt", {"v", "v", "x", "u"});
  const TokenStreams ts = load_streams({p1, p2});
  const auto schedule = CheckpointSchedule::from_times({1, 2, 4});

  const ObservableBundle first = observables(ts, schedule, 4);
  const ObservableBundle second = observables(ts, schedule, 4);
  REQUIRE(first.traj.d_star == second.traj.d_star);
  REQUIRE(first.traj.k == second.traj.k);
  REQUIRE(first.traj.tracked == second.traj.tracked);
  REQUIRE(first.tracked_tokens == second.tracked_tokens);
}

TEST_CASE("simulator draw logs round-trip through ingestion") {
  const ModelParams params = toy_params();
  const std::uint64_t horizon = 2000;
  const std::uint64_t seed = 99;
  const auto schedule = CheckpointSchedule::log_spaced(horizon, 8);

  // Reference observables recorded directly by the simulator, with full count
  // series for a fixed set of early items.
  const Trajectory by_ids =
      run(params, seed, horizon, schedule, TrackPolicy::ids({0, 1, 2}));
  const Trajectory by_top =
      run(params, seed, horizon, schedule, TrackPolicy::top(5));

  // Replay the identical run while logging every draw, then write the logs as
  // per-process token files (the item id in decimal is the token).
  SystemState state(params, RngStream::derive(seed, 0));
  state.enable_draw_log();
  state.run_to(horizon);
  const std::vector<std::uint32_t>& log = state.draw_log();
  REQUIRE(log.size() == 2 * horizon);

  TempDir dir;
  std::vector<std::string> paths;
  for (int h = 0; h < 2; ++h) {
    std::vector<std::string> lines;
    lines.reserve(horizon);
    for (std::uint64_t s = 0; s < horizon; ++s) {
      lines.push_back(std::to_string(log[2 * s + static_cast<std::uint64_t>(h)]));
    }
    paths.push_back(write_lines(dir, "urn" + std::to_string(h) + ".txt", lines));
  }

  const TokenStreams ts = load_streams(paths);
  const ObservableBundle bundle = observables(ts, schedule, 1 << 20);
  const Trajectory& ing = bundle.traj;

  // The model never mints the same item twice, so the data-side collision
  // counter must stay at zero and novelty counts must agree exactly.
  REQUIRE(bundle.simultaneous_novelties == 0);
  REQUIRE(ing.checkpoints == by_ids.checkpoints);
  REQUIRE(ing.d_star == by_ids.d_star);

  // Ingestion assigns ids in first-appearance order, which coincides with the
  // simulator's minting order; the decimal token of every tracked item must
  // therefore parse back to its own id.
  REQUIRE(ing.tracked.size() == static_cast<std::size_t>(state.color_count()));
  for (std::size_t slot = 0; slot < ing.tracked.size(); ++slot) {
    REQUIRE(std::stoul(bundle.tracked_tokens[slot]) == ing.tracked[slot]);
  }

  // Full per-checkpoint count series agree for the directly tracked items.
  for (std::size_t i = 0; i < by_ids.tracked.size(); ++i) {
    const std::uint32_t id = by_ids.tracked[i];
    const auto slot = std::find(ing.tracked.begin(), ing.tracked.end(), id);
    REQUIRE(slot != ing.tracked.end());
    const std::size_t s = static_cast<std::size_t>(slot - ing.tracked.begin());
    for (std::size_t ck = 0; ck < ing.checkpoints.size(); ++ck) {
      REQUIRE(ing.k[ck][s] == by_ids.k[ck][i]);
    }
  }

  // Top-item selection agrees with the simulator's ranking rule.
  const ObservableBundle top5 = observables(ts, schedule, 5);
  REQUIRE(top5.traj.tracked == by_top.tracked);
  REQUIRE(top5.traj.k.back() == by_top.k.back());

  // Each process draws exactly once per step.
  for (int h = 0; h < 2; ++h) {
    std::uint64_t total = 0;
    for (const auto& row : ing.k.back()) total += row[static_cast<std::size_t>(h)];
    REQUIRE(total == horizon);
  }
}

// --- p-value summaries ----------------------------------------------------------------

TEST_CASE("empirical quantiles interpolate between order statistics") {
  const std::vector<double> decile = {0.1, 0.2, 0.3, 0.4, 0.5,
                                      0.6, 0.7, 0.8, 0.9, 1.0};
  REQUIRE(std::abs(quantile_type7(decile, 0.5) - 0.55) < 1e-15);
  REQUIRE(std::abs(quantile_type7(decile, 0.75) - 0.775) < 1e-15);
  REQUIRE(std::abs(quantile_type7(decile, 0.95) - 0.955) < 1e-15);

  const std::vector<double> flat(100, 0.5);
  REQUIRE(quantile_type7(flat, 0.5) == 0.5);
  REQUIRE(quantile_type7(flat, 0.75) == 0.5);
  REQUIRE(quantile_type7(flat, 0.95) == 0.5);

  const std::vector<double> single = {0.3};
  REQUIRE(quantile_type7(single, 0.25) == 0.3);

  REQUIRE_THROWS_AS(quantile_type7({}, 0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(quantile_type7(decile, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(quantile_type7(decile, 1.0), std::invalid_argument);
}

TEST_CASE("p-value formatting matches the table conventions") {
  REQUIRE(format_pvalue(0.0005) == "<0.001");
  REQUIRE(format_pvalue(0.00099) == "<0.001");
  REQUIRE(format_pvalue(0.001) == "0.001");
  REQUIRE(format_pvalue(0.058) == "0.058");
  REQUIRE(format_pvalue(0.25) == "0.250");
  REQUIRE(format_pvalue(1.0) == "1.000");
}

TEST_CASE("p-value summaries sort their input and format each quantile") {
  std::vector<double> pvals = {0.4, 0.1, 1.0, 0.3, 0.8, 0.2, 0.9, 0.5, 0.7, 0.6};
  const PvalueSummary s = pvalue_summary(pvals, {0.5, 0.75, 0.95});
  REQUIRE(s.probabilities == std::vector<double>{0.5, 0.75, 0.95});
  REQUIRE(std::abs(s.values[0] - 0.55) < 1e-15);
  REQUIRE(std::abs(s.values[1] - 0.775) < 1e-15);
  REQUIRE(std::abs(s.values[2] - 0.955) < 1e-15);
  REQUIRE(s.formatted == std::vector<std::string>{"0.550", "0.775", "0.955"});

  const PvalueSummary tiny =
      pvalue_summary({1e-5, 2e-5, 3e-5, 4e-5}, {0.5, 0.95});
  REQUIRE(tiny.formatted[0] == "<0.001");
  REQUIRE(tiny.formatted[1] == "<0.001");

  REQUIRE_THROWS_AS(pvalue_summary({}, {0.5}), std::invalid_argument);
}
