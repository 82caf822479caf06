#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "innovnet/errors.hpp"
#include "innovnet/simulator.hpp"

namespace innovnet {

// Aligned labeled token streams: position t of every stream holds the item
// observed by that process at step t+1.  Streams of unequal natural length are
// truncated to the shortest.
struct TokenStreams {
  std::vector<std::string> process_names;
  std::vector<std::vector<std::string>> streams;
  std::vector<std::size_t> original_lengths;

  int n() const { return static_cast<int>(streams.size()); }
  std::size_t length() const { return streams.empty() ? 0 : streams.front().size(); }
};

// Reads one file per process, one token per line (UTF-8, no further
// tokenization).  Case folding, when requested, lowercases ASCII letters only;
// tokens are otherwise taken verbatim.
inline TokenStreams load_streams(const std::vector<std::string>& paths,
                                 bool fold_case = false,
                                 std::vector<std::string> names = {}) {
  if (paths.empty()) throw std::invalid_argument("no stream files given");
  TokenStreams ts;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (fold_case) {
        std::transform(line.begin(), line.end(), line.begin(), [](unsigned char c) {
          return static_cast<char>(std::tolower(c));
        });
      }
      tokens.push_back(line);
    }
    if (in.bad()) throw IoError("read error on " + path);
    if (tokens.empty()) throw EmptyStream(path + " contains no tokens");
    ts.original_lengths.push_back(tokens.size());
    ts.streams.push_back(std::move(tokens));
  }
  std::size_t min_len = ts.streams.front().size();
  for (const auto& s : ts.streams) min_len = std::min(min_len, s.size());
  for (auto& s : ts.streams) s.resize(min_len);
  if (!names.empty()) {
    if (names.size() != paths.size()) {
      throw std::invalid_argument("process name count does not match file count");
    }
    ts.process_names = std::move(names);
  } else {
    ts.process_names = paths;
  }
  return ts;
}

// Observables reconstructed from data, in the same shape the simulator
// records so that inference is agnostic to the origin.  An item is new at the
// first step it appears in ANY stream (system-level novelty) and its
// originator is that stream; a first appearance in several streams at the same
// step is resolved to the lowest-index process and counted in
// `simultaneous_novelties`, since the model itself excludes such ties.
struct ObservableBundle {
  Trajectory traj;
  std::uint64_t simultaneous_novelties = 0;
  std::vector<std::string> tracked_tokens;  // mirrors traj.tracked_labels
};

inline ObservableBundle observables(const TokenStreams& ts,
                                    const CheckpointSchedule& schedule,
                                    int top_m) {
  const int n = ts.n();
  const std::size_t len = ts.length();
  if (n < 1 || len == 0) throw std::invalid_argument("empty streams");
  if (schedule.horizon() > len) {
    throw std::invalid_argument("schedule horizon exceeds stream length");
  }
  if (top_m < 0) throw std::invalid_argument("top_m must be nonnegative");
  const std::uint64_t horizon = schedule.horizon();

  ObservableBundle out;
  Trajectory& traj = out.traj;
  traj.checkpoints = schedule.times;
  traj.horizon = horizon;
  traj.schedule_kind = schedule.kind;
  traj.schedule_per_decade = schedule.per_decade;
  traj.source = "ingest";
  traj.selection_step = horizon;

  // Pass 1: ids in first-appearance order, originators, novelty counts at
  // checkpoints, total counts at the horizon.
  std::unordered_map<std::string, std::uint32_t> id_of;
  id_of.reserve(len);
  std::vector<int> originator;
  std::vector<std::uint64_t> total_count;
  std::vector<std::uint64_t> first_step;
  std::vector<std::uint64_t> d_star(static_cast<std::size_t>(n), 0);
  std::size_t ck_pos = 0;
  for (std::uint64_t step = 1; step <= horizon; ++step) {
    for (int h = 0; h < n; ++h) {
      const std::string& tok = ts.streams[h][step - 1];
      auto [it, inserted] =
          id_of.emplace(tok, static_cast<std::uint32_t>(originator.size()));
      if (inserted) {
        originator.push_back(h);
        total_count.push_back(0);
        first_step.push_back(step);
        d_star[static_cast<std::size_t>(h)] += 1;
      } else if (first_step[it->second] == step) {
        // Same token, same step, later stream: a simultaneous first
        // appearance the lowest-index rule already attributed.
        out.simultaneous_novelties += 1;
      }
      total_count[it->second] += 1;
    }
    while (ck_pos < schedule.times.size() && schedule.times[ck_pos] == step) {
      traj.d_star.push_back(d_star);
      ++ck_pos;
    }
  }

  // Top items by total system count at the horizon; first-appearance order
  // breaks ties (equivalently: smallest id).
  std::vector<std::uint32_t> ids(total_count.size());
  std::iota(ids.begin(), ids.end(), 0u);
  std::sort(ids.begin(), ids.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (total_count[a] != total_count[b]) return total_count[a] > total_count[b];
    return a < b;
  });
  ids.resize(std::min<std::size_t>(ids.size(), static_cast<std::size_t>(top_m)));
  traj.tracked = ids;
  std::vector<std::string> token_of(originator.size());
  for (const auto& [tok, id] : id_of) token_of[id] = tok;
  for (const auto id : ids) out.tracked_tokens.push_back(token_of[id]);
  traj.tracked_labels = out.tracked_tokens;

  // Pass 2: K-series of the tracked items at every checkpoint.
  if (!ids.empty()) {
    std::unordered_map<std::uint32_t, std::size_t> slot_of;
    for (std::size_t s = 0; s < ids.size(); ++s) slot_of.emplace(ids[s], s);
    std::vector<std::vector<std::uint64_t>> counts(
        ids.size(), std::vector<std::uint64_t>(static_cast<std::size_t>(n), 0));
    ck_pos = 0;
    for (std::uint64_t step = 1; step <= horizon; ++step) {
      for (int h = 0; h < n; ++h) {
        const auto it = slot_of.find(id_of.at(ts.streams[h][step - 1]));
        if (it != slot_of.end()) {
          counts[it->second][static_cast<std::size_t>(h)] += 1;
        }
      }
      while (ck_pos < schedule.times.size() && schedule.times[ck_pos] == step) {
        traj.k.push_back(counts);
        ++ck_pos;
      }
    }
  }
  return out;
}

// --- p-value summaries -----------------------------------------------------------------

// Type-7 empirical quantile (linear interpolation between order statistics)
// of an already sorted ascending sample.
inline double quantile_type7(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("empty sample");
  if (!(p > 0.0) || !(p < 1.0)) throw std::invalid_argument("p must lie in (0,1)");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline std::string format_pvalue(double p) {
  if (p < 0.001) return "<0.001";
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << p;
  return os.str();
}

struct PvalueSummary {
  std::vector<double> probabilities;
  std::vector<double> values;
  std::vector<std::string> formatted;  // "<0.001" below the display threshold
};

inline PvalueSummary pvalue_summary(std::vector<double> pvals,
                                    const std::vector<double>& probabilities) {
  if (pvals.empty()) throw std::invalid_argument("empty p-value list");
  std::sort(pvals.begin(), pvals.end());
  PvalueSummary s;
  s.probabilities = probabilities;
  for (const double p : probabilities) {
    const double q = quantile_type7(pvals, p);
    s.values.push_back(q);
    s.formatted.push_back(format_pvalue(q));
  }
  return s;
}

}  // namespace innovnet
