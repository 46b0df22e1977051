#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mersar/decision_tree.hpp"
#include "mersar/error.hpp"
#include "mersar/pmf.hpp"

namespace mersar {

/// Largest resolution accepted by the exact dynamic-programming builder.
inline constexpr int kMaxOracleBits = 12;

/// Relative tolerance (against interval mass) under which two candidate
/// thresholds count as equally balanced.
inline constexpr double kBalanceTieTolerance = 1e-12;

/// Builds a tree by recursive interval splitting. `rule(Interval)` must
/// return a threshold strictly inside any interval of size >= 2.
///
/// Nodes are allocated in preorder, true branch first, so the layout is a
/// deterministic function of the thresholds alone.
template <typename ThresholdRule>
DecisionTree build_tree(int bits, ThresholdRule&& rule) {
  detail::check_bits(bits);
  DecisionTree tree;
  tree.bits = bits;
  const std::size_t codes = std::size_t{1} << bits;
  tree.nodes.reserve(codes - 1);

  struct Pending {
    Interval iv;
    bool has_parent;
    NodeAddress parent;
    bool true_branch;
  };
  std::vector<Pending> stack{{Interval{0, static_cast<Code>(codes)}, false, 0, false}};
  while (!stack.empty()) {
    const Pending item = stack.back();
    stack.pop_back();
    const auto address = static_cast<NodeAddress>(tree.nodes.size());
    if (item.has_parent) {
      TreeNode& parent = tree.nodes[item.parent];
      (item.true_branch ? parent.branch_true : parent.branch_false) = SubNode::node(address);
    }
    const Code threshold = rule(item.iv);
    if (!(item.iv.lb < threshold && threshold < item.iv.ub)) {
      throw Error(ErrorKind::ThresholdOutOfRange,
                  "threshold rule returned " + std::to_string(threshold) + " for [" +
                      std::to_string(item.iv.lb) + "," + std::to_string(item.iv.ub) + ")");
    }
    TreeNode node;
    node.threshold = threshold;
    const Interval below{item.iv.lb, threshold};
    const Interval above{threshold, item.iv.ub};
    if (below.size() == 1) node.branch_true = SubNode::leaf(below.lb);
    if (above.size() == 1) node.branch_false = SubNode::leaf(above.lb);
    tree.nodes.push_back(node);
    // False pushed first so the true subtree is allocated next.
    if (above.size() > 1) stack.push_back({above, true, address, false});
    if (below.size() > 1) stack.push_back({below, true, address, true});
  }
  return tree;
}

/// Conventional SAR schedule: every threshold halves its interval.
inline Code midpoint_threshold(const Interval& iv) {
  return static_cast<Code>((std::size_t{iv.lb} + iv.ub) / 2);
}

inline DecisionTree build_binary_tree(int bits) {
  return build_tree(bits, midpoint_threshold);
}

/// Maximal-entropy-reduction threshold: the split that best balances the
/// probability mass of [lb, t) against [t, ub). Unnormalized sums are used,
/// so zero-mass intervals are legal (every candidate ties). Among near-equal
/// candidates the one closest to the midpoint wins, the lower one if two are
/// equidistant.
inline Code select_mer_threshold(std::span<const double> probs, const Interval& iv) {
  if (iv.size() < 2 || iv.ub > probs.size()) {
    throw Error(ErrorKind::InvalidInterval, "threshold selection needs an interval of size >= 2");
  }
  // Left masses accumulate with the same compensated recurrence in every
  // pass so the objective is reproducible bit-for-bit.
  auto scan = [&](auto&& visit) {
    double sum = 0.0;
    double carry = 0.0;
    for (Code t = iv.lb + 1; t <= iv.ub; ++t) {
      const double v = probs[t - 1];
      const double s = sum + v;
      carry += std::abs(sum) >= std::abs(v) ? (sum - s) + v : (v - s) + sum;
      sum = s;
      visit(t, sum + carry);
    }
  };
  double total = 0.0;
  scan([&](Code t, double left) {
    if (t == iv.ub) total = left;
  });
  double best = std::numeric_limits<double>::infinity();
  scan([&](Code t, double left) {
    if (t < iv.ub) best = std::min(best, std::abs(2.0 * left - total));
  });
  const double cutoff = best + kBalanceTieTolerance * total;
  const std::int64_t twice_mid = std::int64_t{iv.lb} + iv.ub;
  Code chosen = iv.ub;
  std::int64_t chosen_dist = std::numeric_limits<std::int64_t>::max();
  scan([&](Code t, double left) {
    if (t == iv.ub || std::abs(2.0 * left - total) > cutoff) return;
    const std::int64_t dist = std::abs(2 * std::int64_t{t} - twice_mid);
    if (dist < chosen_dist) {  // ascending scan keeps the lower one on ties
      chosen = t;
      chosen_dist = dist;
    }
  });
  return chosen;
}

inline DecisionTree build_mer_tree(const Pmf& pmf) {
  const auto probs = pmf.probs();
  return build_tree(pmf.bits(), [probs](const Interval& iv) { return select_mer_threshold(probs, iv); });
}

/// Exact minimum-expected-depth alphabetic tree by interval dynamic
/// programming:
///
///     cost[i,j) = mass[i,j) + min_{i<k<j} cost[i,k) + cost[k,j)
///
/// with Knuth's root monotonicity root[i,j-1) <= root[i,j) <= root[i+1,j),
/// giving O(n^2) time in the number of codes. Ties take the lowest root.
inline DecisionTree build_optimal_tree(const Pmf& pmf) {
  if (pmf.bits() > kMaxOracleBits) {
    throw Error(ErrorKind::TooManyBits, "optimal tree limited to " + std::to_string(kMaxOracleBits) +
                                            " bits, got " + std::to_string(pmf.bits()));
  }
  const std::size_t n = pmf.size();
  std::vector<double> prefix(n + 1, 0.0);
  {
    double sum = 0.0, carry = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = pmf.probs()[i];
      const double s = sum + v;
      carry += std::abs(sum) >= std::abs(v) ? (sum - s) + v : (v - s) + sum;
      sum = s;
      prefix[i + 1] = sum + carry;
    }
  }
  // Intervals of length len occupy offset[len] .. offset[len] + (n - len).
  std::vector<std::size_t> offset(n + 2, 0);
  for (std::size_t len = 1; len <= n; ++len) offset[len + 1] = offset[len] + (n - len + 1);
  const auto cell = [&](std::size_t i, std::size_t j) { return offset[j - i] + i; };

  std::vector<double> cost(offset[n + 1], 0.0);
  std::vector<std::uint16_t> root(offset[n + 1], 0);
  for (std::size_t len = 2; len <= n; ++len) {
    for (std::size_t i = 0; i + len <= n; ++i) {
      const std::size_t j = i + len;
      std::size_t lo = i + 1, hi = j - 1;
      if (len > 2) {
        lo = root[cell(i, j - 1)];
        hi = root[cell(i + 1, j)];
      }
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_k = lo;
      for (std::size_t k = lo; k <= hi; ++k) {
        const double c = cost[cell(i, k)] + cost[cell(k, j)];
        if (c < best) {
          best = c;
          best_k = k;
        }
      }
      cost[cell(i, j)] = (prefix[j] - prefix[i]) + best;
      root[cell(i, j)] = static_cast<std::uint16_t>(best_k);
    }
  }
  return build_tree(pmf.bits(), [&](const Interval& iv) { return static_cast<Code>(root[cell(iv.lb, iv.ub)]); });
}

}  // namespace mersar
