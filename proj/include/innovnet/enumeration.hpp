#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "innovnet/errors.hpp"
#include "innovnet/model_params.hpp"
#include "innovnet/simulator.hpp"

namespace innovnet {

// Colors are interchangeable up to relabeling: the law of the system after t
// steps is fully described by the multiset of (originator, per-urn counts)
// pairs.  A canonical state is that multiset, sorted; its key is a readable
// encoding like "o0:2,1|o1:0,1".
struct ColorClass {
  int originator = 0;
  std::vector<std::uint64_t> counts;

  bool operator<(const ColorClass& other) const {
    if (originator != other.originator) return originator < other.originator;
    return counts < other.counts;
  }
  bool operator==(const ColorClass& other) const {
    return originator == other.originator && counts == other.counts;
  }
};

inline std::string canonical_key(std::vector<ColorClass> colors) {
  std::sort(colors.begin(), colors.end());
  std::string key;
  for (const auto& c : colors) {
    if (!key.empty()) key += '|';
    key += 'o';
    key += std::to_string(c.originator);
    key += ':';
    for (std::size_t h = 0; h < c.counts.size(); ++h) {
      if (h) key += ',';
      key += std::to_string(c.counts[h]);
    }
  }
  return key.empty() ? std::string("-") : key;
}

inline std::string canonical_key(const SystemState& state) {
  std::vector<ColorClass> colors;
  const int n = state.n();
  for (std::uint32_t c = 0; c < state.color_count(); ++c) {
    ColorClass cc;
    cc.originator = state.originator(c);
    cc.counts.resize(static_cast<std::size_t>(n));
    for (int h = 0; h < n; ++h) cc.counts[h] = state.count(h, c);
    colors.push_back(std::move(cc));
  }
  return canonical_key(std::move(colors));
}

struct CanonicalOutcome {
  std::string key;
  std::vector<ColorClass> colors;
  double probability = 0.0;
};

struct Enumeration {
  int n = 0;
  int t = 0;
  std::vector<CanonicalOutcome> outcomes;  // sorted by key
  double total_probability = 0.0;

  double probability_of(const std::string& key) const {
    const auto it =
        std::lower_bound(outcomes.begin(), outcomes.end(), key,
                         [](const CanonicalOutcome& o, const std::string& k) {
                           return o.key < k;
                         });
    return it != outcomes.end() && it->key == key ? it->probability : 0.0;
  }

  // Marginal law of the novelty-count vector Dstar_t.
  std::map<std::vector<std::uint64_t>, double> d_star_marginal() const {
    std::map<std::vector<std::uint64_t>, double> out;
    for (const auto& o : outcomes) {
      std::vector<std::uint64_t> ds(static_cast<std::size_t>(n), 0);
      for (const auto& c : o.colors) ds[static_cast<std::size_t>(c.originator)] += 1;
      out[ds] += o.probability;
    }
    return out;
  }
};

// Exact law of the canonical state after t_max steps, by brute-force expansion
// of the joint per-step outcome tree.  Intended for validating the simulator on
// tiny systems only; n <= 3 and t_max <= 4 are enforced because the state space
// grows combinatorially.
inline Enumeration exact_enumeration(const ModelParams& params_in, int t_max) {
  const ModelParams params = validate(params_in, {.allow_lambda_boundary = true});
  const int n = params.n();
  if (n > 3 || t_max > 4) {
    throw TooLarge("exact enumeration supports n <= 3 and t_max <= 4");
  }
  if (t_max < 1) throw std::invalid_argument("t_max must be >= 1");

  using StateMap = std::unordered_map<std::string, std::pair<std::vector<ColorClass>, double>>;
  StateMap states;
  states.emplace("-", std::make_pair(std::vector<ColorClass>{}, 1.0));

  for (int tau = 0; tau < t_max; ++tau) {
    StateMap next;
    for (const auto& [key, entry] : states) {
      const auto& [colors, prob] = entry;
      std::vector<std::uint64_t> d_star(static_cast<std::size_t>(n), 0);
      for (const auto& c : colors) d_star[static_cast<std::size_t>(c.originator)] += 1;

      // Outcome options per urn: index -1 mints a fresh color, index i >= 0
      // re-draws colors[i].  Zero-probability branches are dropped.
      std::vector<std::vector<std::pair<int, double>>> options(
          static_cast<std::size_t>(n));
      for (int h = 0; h < n; ++h) {
        const double denom = params.theta(h) + static_cast<double>(tau);
        double z_num = params.theta(h);
        for (int j = 0; j < n; ++j) {
          z_num += params.gamma(j, h) * static_cast<double>(d_star[j]);
        }
        if (z_num > 1e-15) options[h].push_back({-1, z_num / denom});
        for (std::size_t i = 0; i < colors.size(); ++i) {
          double wgt = -params.gamma(colors[i].originator, h);
          for (int j = 0; j < n; ++j) {
            wgt += params.w(j, h) * static_cast<double>(colors[i].counts[j]);
          }
          if (wgt > 1e-15) options[h].push_back({static_cast<int>(i), wgt / denom});
        }
      }

      // Joint product over urns.
      std::vector<int> choice(static_cast<std::size_t>(n), 0);
      auto recurse = [&](auto&& self, int h, double p) -> void {
        if (h == n) {
          std::vector<ColorClass> succ = colors;
          for (int g = 0; g < n; ++g) {
            const int opt = options[g][static_cast<std::size_t>(choice[g])].first;
            if (opt < 0) {
              ColorClass fresh;
              fresh.originator = g;
              fresh.counts.assign(static_cast<std::size_t>(n), 0);
              fresh.counts[static_cast<std::size_t>(g)] = 1;
              succ.push_back(std::move(fresh));
            } else {
              succ[static_cast<std::size_t>(opt)].counts[static_cast<std::size_t>(g)] += 1;
            }
          }
          std::string k = canonical_key(succ);
          auto [it, inserted] = next.emplace(std::move(k), std::make_pair(std::move(succ), p));
          if (!inserted) it->second.second += p;
          return;
        }
        for (std::size_t o = 0; o < options[h].size(); ++o) {
          choice[static_cast<std::size_t>(h)] = static_cast<int>(o);
          self(self, h + 1, p * options[h][o].second);
        }
      };
      recurse(recurse, 0, prob);
    }
    states = std::move(next);
  }

  Enumeration out;
  out.n = n;
  out.t = t_max;
  for (auto& [key, entry] : states) {
    CanonicalOutcome o;
    o.key = key;
    o.colors = std::move(entry.first);
    std::sort(o.colors.begin(), o.colors.end());
    o.probability = entry.second;
    out.outcomes.push_back(std::move(o));
  }
  std::sort(out.outcomes.begin(), out.outcomes.end(),
            [](const CanonicalOutcome& a, const CanonicalOutcome& b) {
              return a.key < b.key;
            });
  for (const auto& o : out.outcomes) out.total_probability += o.probability;
  return out;
}

}  // namespace innovnet
