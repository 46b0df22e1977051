#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mersar/decision_tree.hpp"
#include "mersar/error.hpp"
#include "mersar/pmf.hpp"
#include "mersar/sar_engine.hpp"
#include "mersar/tree_builders.hpp"

namespace mersar {

struct AdaptiveConfig {
  /// Samples per statistics window; 0 selects max(4096, 16 * 2^bits).
  std::size_t window = 0;
  /// L1 distance between consecutive window histograms that counts as a
  /// change of input statistics.
  double l1_threshold = 0.02;

  std::size_t resolved_window(int bits) const {
    if (window != 0) return window;
    return std::max<std::size_t>(4096, std::size_t{16} << bits);
  }
  friend bool operator==(const AdaptiveConfig&, const AdaptiveConfig&) = default;
};

/// Output statistics and the tree currently loaded in decision memory.
///
/// `counts` is the cumulative histogram behind the pmf estimate and sums to
/// `samples_seen`. `window_counts` restarts at every window boundary and is
/// compared against the previous window to detect changed statistics.
struct AdaptiveState {
  AdcConfig cfg;
  AdaptiveConfig params;
  std::vector<std::uint64_t> counts;
  std::uint64_t samples_seen = 0;
  std::vector<std::uint64_t> window_counts;
  std::uint64_t window_samples = 0;
  std::optional<std::vector<double>> previous_window;
  std::uint64_t total_observed = 0;
  std::uint64_t generation = 0;
  DecisionTree active_tree;

  friend bool operator==(const AdaptiveState&, const AdaptiveState&) = default;
};

/// Startup state: binary tree, empty histograms, generation 0.
inline AdaptiveState new_adaptive(const AdcConfig& cfg, const AdaptiveConfig& params = {}) {
  cfg.validate();
  if (!(params.l1_threshold >= 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "L1 threshold must be non-negative");
  }
  AdaptiveState s;
  s.cfg = cfg;
  s.params = params;
  s.counts.assign(cfg.code_count(), 0);
  s.window_counts.assign(cfg.code_count(), 0);
  s.active_tree = build_binary_tree(cfg.bits);
  return s;
}

inline void observe(AdaptiveState& s, Code code) {
  if (code >= s.counts.size()) {
    throw Error(ErrorKind::CodeOutOfRange, "code " + std::to_string(code) + " out of range");
  }
  ++s.counts[code];
  ++s.samples_seen;
  ++s.window_counts[code];
  ++s.window_samples;
  ++s.total_observed;
}

/// Laplace estimate (counts[n] + 1) / (samples_seen + 2^bits).
inline Pmf estimate_pmf(const AdaptiveState& s) {
  if (s.samples_seen == 0) {
    throw Error(ErrorKind::NoSamples, "no samples observed since the last reset");
  }
  std::vector<double> p(s.counts.size());
  const double denom = static_cast<double>(s.samples_seen) + static_cast<double>(s.counts.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = (static_cast<double>(s.counts[i]) + 1.0) / denom;
  return Pmf::renormalized(std::move(p));
}

struct RebuildEvent {
  std::uint64_t sample_index = 0;  ///< last sample observed before the swap
  std::uint64_t generation = 0;
  double window_l1 = 0.0;
  double expected_length = 0.0;  ///< new tree under the estimated pmf
};

inline std::ostream& operator<<(std::ostream& out, const RebuildEvent& e) {
  return out << "rebuild at sample " << e.sample_index << ", generation " << e.generation
             << ", window L1 " << e.window_l1 << ", expected length " << e.expected_length;
}

namespace detail {

inline double l1_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

}  // namespace detail

/// Window-boundary logic. The first full window always triggers a rebuild
/// (its L1 is reported against the uniform prior of the startup tree).
/// Later windows rebuild only when their histogram moved by more than the L1
/// threshold from the previous window, in which case the cumulative
/// histogram restarts from the latest window.
inline std::optional<RebuildEvent> maybe_rebuild(AdaptiveState& s) {
  const std::size_t window = s.params.resolved_window(s.cfg.bits);
  if (s.window_samples < window) return std::nullopt;

  std::vector<double> current(s.window_counts.size());
  for (std::size_t i = 0; i < current.size(); ++i) {
    current[i] = static_cast<double>(s.window_counts[i]) / static_cast<double>(s.window_samples);
  }
  bool rebuild = false;
  double l1 = 0.0;
  if (!s.previous_window) {
    const std::vector<double> uniform(current.size(), 1.0 / static_cast<double>(current.size()));
    l1 = detail::l1_distance(current, uniform);
    rebuild = true;
  } else {
    l1 = detail::l1_distance(current, *s.previous_window);
    if (l1 > s.params.l1_threshold) {
      rebuild = true;
      s.counts = s.window_counts;
      s.samples_seen = s.window_samples;
    }
  }
  s.previous_window = std::move(current);
  std::fill(s.window_counts.begin(), s.window_counts.end(), 0);
  s.window_samples = 0;
  if (!rebuild) return std::nullopt;

  const Pmf estimate = estimate_pmf(s);
  s.active_tree = build_mer_tree(estimate);
  ++s.generation;
  return RebuildEvent{s.total_observed - 1, s.generation, l1, expected_length(s.active_tree, estimate)};
}

struct AdaptiveRun {
  std::vector<Code> codes;
  std::vector<int> cycles;
  /// Tree generation each sample was converted with.
  std::vector<std::uint64_t> generation_used;
  std::vector<RebuildEvent> log;

  /// Index of the first sample converted after the first rebuild.
  std::optional<std::size_t> settled_from() const {
    if (log.empty()) return std::nullopt;
    return static_cast<std::size_t>(log.front().sample_index + 1);
  }
};

/// Converts each sample with the active tree, feeds its code back to the
/// statistics, then lets the window logic swap trees. A swap only happens
/// between conversions.
inline AdaptiveRun run_adaptive(std::span<const double> xs, AdaptiveState& state) {
  AdaptiveRun run;
  run.codes.reserve(xs.size());
  run.cycles.reserve(xs.size());
  run.generation_used.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ConversionResult r;
    try {
      r = convert_tree(xs[i], state.active_tree, state.cfg, TraceMode::Drop);
    } catch (const Error& e) {
      throw Error(e.kind(), "sample " + std::to_string(i) + ": " + e.what(), i);
    }
    run.codes.push_back(r.code);
    run.cycles.push_back(r.cycles);
    run.generation_used.push_back(state.generation);
    observe(state, r.code);
    if (auto event = maybe_rebuild(state)) run.log.push_back(*event);
  }
  return run;
}

inline AdaptiveRun run_adaptive(std::span<const double> xs, const AdcConfig& cfg,
                                const AdaptiveConfig& params = {}) {
  AdaptiveState state = new_adaptive(cfg, params);
  return run_adaptive(xs, state);
}

/// Mean of consecutive blocks of `window` samples; a trailing partial block
/// is included.
inline std::vector<double> windowed_averages(std::span<const int> cycles, std::size_t window) {
  if (window == 0) throw Error(ErrorKind::InvalidConfig, "window must be positive");
  std::vector<double> out;
  for (std::size_t start = 0; start < cycles.size(); start += window) {
    const std::size_t end = std::min(cycles.size(), start + window);
    std::uint64_t sum = 0;
    for (std::size_t i = start; i < end; ++i) sum += static_cast<std::uint64_t>(cycles[i]);
    out.push_back(static_cast<double>(sum) / static_cast<double>(end - start));
  }
  return out;
}

inline double mean_cycles(std::span<const int> cycles) {
  if (cycles.empty()) return 0.0;
  std::uint64_t sum = 0;
  for (int c : cycles) sum += static_cast<std::uint64_t>(c);
  return static_cast<double>(sum) / static_cast<double>(cycles.size());
}

}  // namespace mersar
