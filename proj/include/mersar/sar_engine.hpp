#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mersar/decision_tree.hpp"
#include "mersar/error.hpp"
#include "mersar/pmf.hpp"
#include "mersar/tree_builders.hpp"

namespace mersar {

/// Converter resolution and quantization step.
struct AdcConfig {
  int bits = 8;
  double delta = 1.0;

  std::size_t code_count() const { return std::size_t{1} << bits; }
  friend bool operator==(const AdcConfig&, const AdcConfig&) = default;

  void validate() const {
    detail::check_bits(bits);
    if (!(delta > 0.0) || !std::isfinite(delta)) {
      throw Error(ErrorKind::InvalidConfig, "quantization step must be positive and finite");
    }
  }
};

/// DAC output for hypothesis y_hat: delta * (y_hat - 0.5).
inline double dac_reference(Code y_hat, const AdcConfig& cfg) {
  return cfg.delta * (static_cast<double>(y_hat) - 0.5);
}

/// Comparator: true (z = 1) iff x is strictly below the reference. Equality
/// reads as z = 0 so each code cell is closed below, open above.
inline bool compare(double x, Code y_hat, const AdcConfig& cfg) {
  return x < dac_reference(y_hat, cfg);
}

/// Smallest and (exclusive) largest representable input.
inline double input_floor(const AdcConfig& cfg) { return dac_reference(0, cfg); }
inline double input_ceiling(const AdcConfig& cfg) {
  return dac_reference(static_cast<Code>(cfg.code_count()), cfg);
}

inline bool in_range(double x, const AdcConfig& cfg) {
  return x >= input_floor(cfg) && x < input_ceiling(cfg);
}

namespace detail {

inline void require_in_range(double x, const AdcConfig& cfg) {
  if (!in_range(x, cfg)) {
    throw Error(ErrorKind::OutOfRange, "input " + std::to_string(x) + " outside [" +
                                           std::to_string(input_floor(cfg)) + ", " +
                                           std::to_string(input_ceiling(cfg)) + ")");
  }
}

}  // namespace detail

/// Ideal quantizer: the code y with dac_reference(y) <= x < dac_reference(y+1).
/// The rounding estimate is corrected against the same reference values the
/// comparator uses, so both agree on every boundary input.
inline Code quantize(double x, const AdcConfig& cfg) {
  cfg.validate();
  detail::require_in_range(x, cfg);
  const double top = static_cast<double>(cfg.code_count() - 1);
  auto y = static_cast<Code>(std::clamp(std::floor(x / cfg.delta + 0.5), 0.0, top));
  while (y > 0 && x < dac_reference(y, cfg)) --y;
  while (y + 1 < cfg.code_count() && x >= dac_reference(y + 1, cfg)) ++y;
  return y;
}

/// One comparison cycle: the DAC hypothesis and the comparator output.
struct Comparison {
  Code threshold = 0;
  bool z = false;

  friend constexpr bool operator==(const Comparison&, const Comparison&) = default;
};

struct ConversionResult {
  Code code = 0;
  int cycles = 0;
  std::vector<Comparison> trace;

  friend bool operator==(const ConversionResult&, const ConversionResult&) = default;
};

/// Applies the ambiguity-interval update to a comparison sequence starting
/// from the full code range.
inline Interval replay_trace(std::span<const Comparison> trace, int bits) {
  Interval iv{0, static_cast<Code>(std::size_t{1} << bits)};
  for (const Comparison& c : trace) {
    if (c.z) {
      iv.ub = c.threshold;
    } else {
      iv.lb = c.threshold;
    }
  }
  return iv;
}

/// Search with thresholds computed on the fly from the pmf, one maximal
/// entropy reduction split per cycle.
inline ConversionResult convert_online(double x, const Pmf& pmf, const AdcConfig& cfg) {
  cfg.validate();
  if (pmf.bits() != cfg.bits) {
    throw Error(ErrorKind::BitsMismatch, "pmf and converter resolutions differ");
  }
  detail::require_in_range(x, cfg);
  ConversionResult result;
  Interval iv = pmf.full_range();
  while (iv.size() > 1) {
    const Code t = select_mer_threshold(pmf.probs(), iv);
    const bool z = compare(x, t, cfg);
    result.trace.push_back({t, z});
    (z ? iv.ub : iv.lb) = t;
  }
  result.code = iv.lb;
  result.cycles = static_cast<int>(result.trace.size());
  return result;
}

enum class TraceMode { Keep, Drop };

/// Tree-memory walk from node 0. Every step re-checks the node against the
/// interval it governs, so a malformed tree raises InvalidTree instead of
/// producing a wrong code.
inline ConversionResult convert_tree(double x, const DecisionTree& tree, const AdcConfig& cfg,
                                     TraceMode mode = TraceMode::Keep) {
  cfg.validate();
  if (tree.bits != cfg.bits) {
    throw Error(ErrorKind::BitsMismatch, "tree and converter resolutions differ");
  }
  detail::require_in_range(x, cfg);
  ConversionResult result;
  Interval iv{0, static_cast<Code>(cfg.code_count())};
  NodeAddress address = DecisionTree::kRoot;
  const std::size_t max_cycles = cfg.code_count() - 1;
  for (;;) {
    if (address >= tree.nodes.size() || static_cast<std::size_t>(result.cycles) >= max_cycles) {
      throw Error(ErrorKind::InvalidTree, "walk left the tree memory at node " + std::to_string(address));
    }
    const TreeNode& node = tree.nodes[address];
    if (!(iv.lb < node.threshold && node.threshold < iv.ub)) {
      throw Error(ErrorKind::InvalidTree, "node " + std::to_string(address) +
                                              " threshold outside its interval");
    }
    const bool z = compare(x, node.threshold, cfg);
    ++result.cycles;
    if (mode == TraceMode::Keep) result.trace.push_back({node.threshold, z});
    (z ? iv.ub : iv.lb) = node.threshold;
    const SubNode& next = z ? node.branch_true : node.branch_false;
    if (next.stop) {
      if (iv.size() != 1 || next.payload != iv.lb) {
        throw Error(ErrorKind::InvalidTree, "node " + std::to_string(address) +
                                                " stops on an unresolved interval");
      }
      result.code = next.payload;
      return result;
    }
    address = next.payload;
  }
}

struct BatchResult {
  std::vector<Code> codes;
  std::vector<int> cycles;
  std::uint64_t total_cycles = 0;
  /// Per-sample traces, filled only when requested.
  std::vector<std::vector<Comparison>> traces;

  /// Mean cycles per sample; absent for an empty batch.
  std::optional<double> average_cycles() const {
    if (codes.empty()) return std::nullopt;
    return static_cast<double>(total_cycles) / static_cast<double>(codes.size());
  }
};

inline BatchResult convert_batch(std::span<const double> xs, const DecisionTree& tree,
                                 const AdcConfig& cfg, TraceMode mode = TraceMode::Drop) {
  cfg.validate();
  if (tree.bits != cfg.bits) {
    throw Error(ErrorKind::BitsMismatch, "tree and converter resolutions differ");
  }
  require_valid(tree);
  BatchResult out;
  out.codes.reserve(xs.size());
  out.cycles.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ConversionResult r;
    try {
      r = convert_tree(xs[i], tree, cfg, mode);
    } catch (const Error& e) {
      throw Error(e.kind(), "sample " + std::to_string(i) + ": " + e.what(), i);
    }
    out.codes.push_back(r.code);
    out.cycles.push_back(r.cycles);
    out.total_cycles += static_cast<std::uint64_t>(r.cycles);
    if (mode == TraceMode::Keep) out.traces.push_back(std::move(r.trace));
  }
  return out;
}

}  // namespace mersar
