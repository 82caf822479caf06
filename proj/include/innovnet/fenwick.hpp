#pragma once

#include <cstddef>
#include <vector>

namespace innovnet {

// Binary indexed tree over a growable array of nonnegative weights with
// O(log n) point update, prefix sum, append, and inverse-prefix search.
// Serves as the per-urn sampling index over color ids.
class FenwickTree {
 public:
  std::size_t size() const { return weights_.size(); }
  double value(std::size_t i) const { return weights_[i]; }
  double total() const { return prefix(weights_.size()); }

  void push_back(double w) {
    const std::size_t m = weights_.size() + 1;  // 1-based position
    const std::size_t lowbit = m & (~m + 1);
    // Node m covers (m - lowbit, m]; seed it with the existing span sum.
    tree_.push_back(w + prefix(m - 1) - prefix(m - lowbit));
    weights_.push_back(w);
  }

  void add(std::size_t i, double delta) {
    weights_[i] += delta;
    for (std::size_t j = i + 1; j <= tree_.size(); j += j & (~j + 1)) {
      tree_[j - 1] += delta;
    }
  }

  // Smallest index i whose cumulative weight exceeds target, i.e. the entry
  // selected by a draw with target in [0, total()).  Zero-weight entries are
  // never returned for targets inside the range; targets at or beyond total()
  // (possible through fp rounding of u * total) fall back to the last
  // positive-weight entry.
  std::size_t find(double target) const {
    const std::size_t n = weights_.size();
    std::size_t pos = 0;
    std::size_t step = 1;
    while ((step << 1) <= n) step <<= 1;
    double rem = target;
    for (; step > 0; step >>= 1) {
      const std::size_t next = pos + step;
      if (next <= n && tree_[next - 1] <= rem) {
        rem -= tree_[next - 1];
        pos = next;
      }
    }
    if (pos >= n) {
      pos = n - 1;
      while (pos > 0 && !(weights_[pos] > 0.0)) --pos;
    }
    return pos;
  }

 private:
  double prefix(std::size_t count) const {
    double s = 0.0;
    for (std::size_t j = count; j > 0; j -= j & (~j + 1)) s += tree_[j - 1];
    return s;
  }

  std::vector<double> tree_;     // 1-based implicit structure
  std::vector<double> weights_;  // plain copy for point reads
};

}  // namespace innovnet
