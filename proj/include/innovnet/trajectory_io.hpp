#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "innovnet/errors.hpp"
#include "innovnet/simulator.hpp"

namespace innovnet {

// A recorded run is stored as a pair of files:
//   <stem>.csv   -- one row per checkpoint: t, dstar_1..dstar_N, then
//                   k<ID>_1..k<ID>_N for every tracked item ID
//   <stem>.json  -- sidecar with params, seed, schedule, generator id,
//                   tracked ids/labels
// The CSV holds only integers, so the round trip is exact.

inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const int n = traj.n_processes();
  out << "t";
  for (int h = 1; h <= n; ++h) out << ",dstar_" << h;
  for (const std::uint32_t id : traj.tracked) {
    for (int h = 1; h <= n; ++h) out << ",k" << id << "_" << h;
  }
  out << "\n";
  for (std::size_t i = 0; i < traj.checkpoints.size(); ++i) {
    out << traj.checkpoints[i];
    for (int h = 0; h < n; ++h) out << "," << traj.d_star[i][h];
    if (!traj.tracked.empty()) {
      for (std::size_t item = 0; item < traj.tracked.size(); ++item) {
        for (int h = 0; h < n; ++h) out << "," << traj.k[i][item][h];
      }
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed on " + path);
}

inline nlohmann::json trajectory_sidecar(const Trajectory& traj) {
  nlohmann::json j;
  j["schema"] = "innovnet-trajectory-v1";
  j["n"] = traj.n_processes();
  j["horizon"] = traj.horizon;
  j["seed"] = traj.seed;
  j["selection_step"] = traj.selection_step;
  j["generator"] = traj.generator;
  j["source"] = traj.source;
  j["schedule"] = {{"kind", traj.schedule_kind},
                   {"per_decade", traj.schedule_per_decade}};
  if (traj.params.n() > 0) j["params"] = params_to_json(traj.params);
  j["tracked"] = traj.tracked;
  if (!traj.tracked_labels.empty()) j["tracked_labels"] = traj.tracked_labels;
  return j;
}

inline void save_trajectory(const Trajectory& traj, const std::string& dir,
                            const std::string& stem = "trajectory") {
  std::filesystem::create_directories(dir);
  const auto base = std::filesystem::path(dir) / stem;
  write_trajectory_csv(traj, (base.string() + ".csv"));
  std::ofstream side(base.string() + ".json");
  if (!side) throw IoError("cannot open " + base.string() + ".json for writing");
  side << trajectory_sidecar(traj).dump(2) << "\n";
  if (!side) throw IoError("write failed on " + base.string() + ".json");
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline std::uint64_t parse_u64(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw IoError("bad integer '" + s + "' in " + where);
  }
}

}  // namespace detail

inline Trajectory load_trajectory(const std::string& csv_path,
                                  const std::string& json_path) {
  std::ifstream side(json_path);
  if (!side) throw IoError("cannot open " + json_path);
  nlohmann::json j;
  try {
    side >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad sidecar json in " + json_path + ": " + e.what());
  }
  Trajectory traj;
  try {
    traj.horizon = j.at("horizon").get<std::uint64_t>();
    traj.seed = j.value("seed", std::uint64_t{0});
    traj.selection_step = j.value("selection_step", std::uint64_t{0});
    traj.generator = j.value("generator", std::string());
    traj.source = j.value("source", std::string("simulator"));
    traj.schedule_kind = j.at("schedule").value("kind", std::string("log"));
    traj.schedule_per_decade = j.at("schedule").value("per_decade", 0);
    if (j.contains("params")) traj.params = params_from_json(j.at("params"));
    traj.tracked = j.value("tracked", std::vector<std::uint32_t>{});
    traj.tracked_labels = j.value("tracked_labels", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw IoError("sidecar " + json_path + " missing fields: " + e.what());
  }
  const int n = j.at("n").get<int>();
  if (n < 1) throw IoError("sidecar declares n < 1");

  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot open " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(csv_path + " is empty");
  const auto header = detail::split_csv_line(line);
  const std::size_t expected_cols = 1 + static_cast<std::size_t>(n) * (1 + traj.tracked.size());
  if (header.size() != expected_cols || header[0] != "t") {
    throw IoError(csv_path + " header does not match sidecar (expected " +
                  std::to_string(expected_cols) + " columns, got " +
                  std::to_string(header.size()) + ")");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    const std::string where = csv_path + ":" + std::to_string(lineno);
    if (fields.size() != expected_cols) {
      throw IoError("row with " + std::to_string(fields.size()) +
                    " columns (expected " + std::to_string(expected_cols) +
                    ") in " + where);
    }
    std::size_t f = 0;
    traj.checkpoints.push_back(detail::parse_u64(fields[f++], where));
    std::vector<std::uint64_t> ds(static_cast<std::size_t>(n));
    for (int h = 0; h < n; ++h) ds[h] = detail::parse_u64(fields[f++], where);
    traj.d_star.push_back(std::move(ds));
    if (!traj.tracked.empty()) {
      std::vector<std::vector<std::uint64_t>> block;
      for (std::size_t item = 0; item < traj.tracked.size(); ++item) {
        std::vector<std::uint64_t> row(static_cast<std::size_t>(n));
        for (int h = 0; h < n; ++h) row[h] = detail::parse_u64(fields[f++], where);
        block.push_back(std::move(row));
      }
      traj.k.push_back(std::move(block));
    }
  }
  if (traj.checkpoints.empty()) throw IoError(csv_path + " has no data rows");
  return traj;
}

inline Trajectory load_trajectory_dir(const std::string& dir,
                                      const std::string& stem = "trajectory") {
  const auto base = std::filesystem::path(dir) / stem;
  return load_trajectory(base.string() + ".csv", base.string() + ".json");
}

}  // namespace innovnet
