#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "innovnet/errors.hpp"
#include "innovnet/fenwick.hpp"
#include "innovnet/model_params.hpp"
#include "innovnet/rng.hpp"

namespace innovnet {

struct Draw {
  bool novel = false;
  std::uint32_t color = 0;
};

// One entry per urn (indexed by urn) describing what that urn produced in the
// last step.
using DrawRecord = std::vector<Draw>;

// Live state of an N-urn system.  One step draws one ball in every urn
// simultaneously: conditioned on the state after t steps, urn h mints a fresh
// color with probability
//
//   Z_{t,h} = (theta_h + sum_j gamma_{j,h} Dstar_{t,j}) / (theta_h + t)
//
// and otherwise re-draws an existing color c with probability proportional to
//
//   weight_h(c) = sum_j w_{j,h} K_t(j,c) - gamma_{j'(c),h},
//
// where j'(c) is the process that minted c.  A color minted by urn j enters
// every urn g's sampling index with weight lambda_{j,g} = w_{j,g} - gamma_{j,g}
// (its own first draw already folded in); each subsequent draw of c by urn j
// adds w_{j,g} to its weight in every urn g.  Fresh colors minted by different
// urns within one step are distinct and carry their originator.
//
// Randomness: each step consumes exactly two uniforms per urn in urn order --
// one compared against Z_{t,h}, one locating the color in the sampling index --
// regardless of the outcome, so trajectories are reproducible from (seed, t).
class SystemState {
 public:
  SystemState(ModelParams params, RngStream rng)
      : params_(validate(std::move(params), {.allow_lambda_boundary = true})),
        lambda_(params_.w - params_.gamma),
        n_(params_.n()),
        d_star_(static_cast<std::size_t>(n_), 0),
        birth_numer_(params_.theta.data(), params_.theta.data() + n_),
        sampler_(static_cast<std::size_t>(n_)),
        rng_(std::move(rng)),
        last_draws_(static_cast<std::size_t>(n_)) {}

  int n() const { return n_; }
  std::uint64_t t() const { return t_; }
  std::uint32_t color_count() const {
    return static_cast<std::uint32_t>(originator_.size());
  }
  const ModelParams& params() const { return params_; }

  int originator(std::uint32_t c) const {
    require_color(c);
    return originator_[c];
  }
  std::uint64_t count(int h, std::uint32_t c) const {  // K_t(h, c)
    require_color(c);
    return counts_[static_cast<std::size_t>(c) * n_ + h];
  }
  std::uint64_t total_count(std::uint32_t c) const {  // 1'K_t(c)
    require_color(c);
    return total_counts_[c];
  }
  const std::vector<std::uint64_t>& novelty_counts() const { return d_star_; }

  double birth_probability(int h) const {
    return birth_numer_[h] / (params_.theta(h) + static_cast<double>(t_));
  }
  double old_color_probability(int h, std::uint32_t c) const {
    require_color(c);
    return sampler_[h].value(c) / (params_.theta(h) + static_cast<double>(t_));
  }

  const DrawRecord& last_draws() const { return last_draws_; }

  const DrawRecord& step() {
    // Phase 1: every urn decides against the state after t steps.
    const double tt = static_cast<double>(t_);
    for (int h = 0; h < n_; ++h) {
      const double u_birth = rng_.uniform();
      const double u_color = rng_.uniform();
      const double z = birth_numer_[h] / (params_.theta(h) + tt);
      if (u_birth < z) {
        last_draws_[h] = {true, 0};
      } else {
        const double total = sampler_[h].total();
        const std::uint32_t c =
            static_cast<std::uint32_t>(sampler_[h].find(u_color * total));
        last_draws_[h] = {false, c};
      }
    }
    // Phase 2: apply all outcomes.  Mints go first in urn order so their
    // color ids are deterministic.
    for (int h = 0; h < n_; ++h) {
      if (!last_draws_[h].novel) continue;
      last_draws_[h].color = mint(h);
    }
    for (int h = 0; h < n_; ++h) {
      if (last_draws_[h].novel) continue;
      const std::uint32_t c = last_draws_[h].color;
      counts_[static_cast<std::size_t>(c) * n_ + h] += 1;
      total_counts_[c] += 1;
      for (int g = 0; g < n_; ++g) sampler_[g].add(c, params_.w(h, g));
    }
    ++t_;
    if (log_draws_) {
      for (int h = 0; h < n_; ++h) log_.push_back(last_draws_[h].color);
    }
    return last_draws_;
  }

  void run_to(std::uint64_t t_target) {
    while (t_ < t_target) step();
  }

  // Color maximizing the total count 1'K_t(c); smallest id wins ties.
  std::uint32_t top_color() const {
    if (originator_.empty()) throw UnknownColor("no colors drawn yet");
    std::uint32_t best = 0;
    for (std::uint32_t c = 1; c < total_counts_.size(); ++c) {
      if (total_counts_[c] > total_counts_[best]) best = c;
    }
    return best;
  }

  std::vector<std::uint32_t> top_colors(int m) const {
    std::vector<std::uint32_t> ids(total_counts_.size());
    std::iota(ids.begin(), ids.end(), 0u);
    std::sort(ids.begin(), ids.end(), [&](std::uint32_t a, std::uint32_t b) {
      if (total_counts_[a] != total_counts_[b]) {
        return total_counts_[a] > total_counts_[b];
      }
      return a < b;
    });
    ids.resize(std::min<std::size_t>(ids.size(), static_cast<std::size_t>(m)));
    return ids;
  }

  // When enabled, records the color drawn by every urn at every step
  // (urn-major within the step); used to export synthetic token streams.
  void enable_draw_log() { log_draws_ = true; }
  const std::vector<std::uint32_t>& draw_log() const { return log_; }

 private:
  void require_color(std::uint32_t c) const {
    if (c >= originator_.size()) {
      throw UnknownColor("color id " + std::to_string(c) +
                         " out of range (count " +
                         std::to_string(originator_.size()) + ")");
    }
  }

  std::uint32_t mint(int h) {
    const std::uint32_t c = static_cast<std::uint32_t>(originator_.size());
    originator_.push_back(static_cast<std::uint8_t>(h));
    counts_.insert(counts_.end(), static_cast<std::size_t>(n_), 0);
    counts_[static_cast<std::size_t>(c) * n_ + h] = 1;
    total_counts_.push_back(1);
    d_star_[h] += 1;
    for (int g = 0; g < n_; ++g) {
      birth_numer_[g] += params_.gamma(h, g);
      sampler_[g].push_back(std::max(lambda_(h, g), 0.0));
    }
    return c;
  }

  ModelParams params_;
  Eigen::MatrixXd lambda_;
  int n_;
  std::uint64_t t_ = 0;
  std::vector<std::uint8_t> originator_;
  std::vector<std::uint64_t> counts_;  // color-major, stride n_
  std::vector<std::uint64_t> total_counts_;
  std::vector<std::uint64_t> d_star_;
  std::vector<double> birth_numer_;  // theta_h + sum_j gamma(j,h) Dstar_j
  std::vector<FenwickTree> sampler_;
  RngStream rng_;
  DrawRecord last_draws_;
  bool log_draws_ = false;
  std::vector<std::uint32_t> log_;
};

// --- recorded runs -----------------------------------------------------------------

struct CheckpointSchedule {
  std::vector<std::uint64_t> times;  // strictly increasing, last == horizon
  std::string kind = "log";
  int per_decade = 0;

  // Approximately per_decade log-spaced checkpoints per decade of t, always
  // including the horizon itself.
  static CheckpointSchedule log_spaced(std::uint64_t horizon, int per_decade = 50) {
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (per_decade < 1) throw std::invalid_argument("per_decade must be >= 1");
    CheckpointSchedule s;
    s.kind = "log";
    s.per_decade = per_decade;
    for (int i = 0;; ++i) {
      const double v = std::pow(10.0, static_cast<double>(i) / per_decade);
      const std::uint64_t t = static_cast<std::uint64_t>(std::llround(v));
      if (t >= horizon) break;
      if (t >= 1 && (s.times.empty() || t > s.times.back())) s.times.push_back(t);
    }
    s.times.push_back(horizon);
    return s;
  }

  static CheckpointSchedule from_times(std::vector<std::uint64_t> times) {
    if (times.empty()) throw std::invalid_argument("empty checkpoint list");
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (times[i] < 1 || (i > 0 && times[i] <= times[i - 1])) {
        throw std::invalid_argument("checkpoints must be strictly increasing and >= 1");
      }
    }
    CheckpointSchedule s;
    s.kind = "explicit";
    s.times = std::move(times);
    return s;
  }

  std::uint64_t horizon() const { return times.back(); }
};

struct TrackPolicy {
  enum class Kind { none, top, ids };
  Kind kind = Kind::none;
  int m = 0;
  std::uint64_t selection_step = 0;  // 0 means "at the horizon"
  std::vector<std::uint32_t> explicit_ids;

  static TrackPolicy none() { return {}; }
  static TrackPolicy top(int m, std::uint64_t selection_step = 0) {
    TrackPolicy p;
    p.kind = Kind::top;
    p.m = m;
    p.selection_step = selection_step;
    return p;
  }
  static TrackPolicy ids(std::vector<std::uint32_t> ids) {
    TrackPolicy p;
    p.kind = Kind::ids;
    p.explicit_ids = std::move(ids);
    return p;
  }
};

// Checkpointed observables of one run: per-urn novelty counts Dstar at every
// checkpoint and, optionally, per-urn counts K for a set of tracked items.
// Item counts are all-zero at checkpoints before the tracking selection step
// (top-m tracking cannot know its items earlier).
struct Trajectory {
  std::vector<std::uint64_t> checkpoints;
  std::vector<std::vector<std::uint64_t>> d_star;           // [ck][urn]
  std::vector<std::uint32_t> tracked;                       // item ids
  std::vector<std::string> tracked_labels;                  // optional names
  std::vector<std::vector<std::vector<std::uint64_t>>> k;   // [ck][item][urn]

  std::uint64_t horizon = 0;
  std::uint64_t seed = 0;
  std::uint64_t selection_step = 0;
  std::string generator;      // randomness recipe; empty for ingested data
  std::string schedule_kind = "log";
  int schedule_per_decade = 0;
  std::string source = "simulator";
  ModelParams params;  // n()==0 when unknown (ingested data)

  int n_processes() const {
    return d_star.empty() ? params.n() : static_cast<int>(d_star.front().size());
  }
  std::size_t n_checkpoints() const { return checkpoints.size(); }

  const std::vector<std::uint64_t>& final_d_star() const { return d_star.back(); }
  std::vector<std::uint64_t> final_k(std::size_t item) const {
    return k.back().at(item);
  }
};

inline Trajectory run(const ModelParams& params, std::uint64_t seed,
                      std::uint64_t horizon, const CheckpointSchedule& schedule,
                      const TrackPolicy& track = TrackPolicy::none()) {
  if (schedule.horizon() != horizon) {
    throw std::invalid_argument("schedule horizon does not match run horizon");
  }
  SystemState state(params, RngStream::derive(seed, 0));
  Trajectory traj;
  traj.checkpoints = schedule.times;
  traj.horizon = horizon;
  traj.seed = seed;
  traj.generator = std::string(kGeneratorId);
  traj.schedule_kind = schedule.kind;
  traj.schedule_per_decade = schedule.per_decade;
  traj.params = state.params();

  std::uint64_t selection =
      track.kind == TrackPolicy::Kind::top
          ? (track.selection_step == 0 ? horizon
                                       : std::min(track.selection_step, horizon))
          : 0;
  traj.selection_step = selection;
  bool selected = track.kind != TrackPolicy::Kind::top;
  if (track.kind == TrackPolicy::Kind::ids) traj.tracked = track.explicit_ids;

  const int n = state.n();
  auto record = [&]() {
    traj.d_star.push_back(state.novelty_counts());
    if (track.kind == TrackPolicy::Kind::none) return;
    std::vector<std::vector<std::uint64_t>> block;
    const std::size_t rows = track.kind == TrackPolicy::Kind::top
                                 ? static_cast<std::size_t>(track.m)
                                 : traj.tracked.size();
    for (std::size_t i = 0; i < rows; ++i) {
      std::vector<std::uint64_t> row(static_cast<std::size_t>(n), 0);
      if (selected && i < traj.tracked.size()) {
        const std::uint32_t c = traj.tracked[i];
        if (c < state.color_count()) {
          for (int h = 0; h < n; ++h) row[h] = state.count(h, c);
        }
      }
      block.push_back(std::move(row));
    }
    traj.k.push_back(std::move(block));
  };

  for (const std::uint64_t ck : schedule.times) {
    while (state.t() < ck) {
      state.step();
      if (!selected && state.t() == selection) {
        traj.tracked = state.top_colors(track.m);
        selected = true;
      }
    }
    record();
  }
  if (track.kind == TrackPolicy::Kind::top) {
    // Fewer colors than requested: drop the zero padding rows.
    for (auto& block : traj.k) block.resize(traj.tracked.size());
  }
  return traj;
}

}  // namespace innovnet
