#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mersar/adaptive.hpp"
#include "mersar/decision_tree.hpp"
#include "mersar/error.hpp"
#include "mersar/pmf.hpp"
#include "mersar/sar_engine.hpp"
#include "mersar/signal.hpp"
#include "mersar/tree_builders.hpp"

namespace mersar {

enum class Mode { Binary, Mer, Adaptive, All };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::Binary: return "binary";
    case Mode::Mer: return "mer";
    case Mode::Adaptive: return "adaptive";
    case Mode::All: return "all";
  }
  return "unknown";
}

struct ExperimentConfig {
  std::vector<int> bits;
  /// Signal kind and parameters; the seed is taken from `seed` below.
  SignalSpec signal;
  double delta = 1.0;
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  Mode mode = Mode::All;
  /// Require the optimal-tree column; bits above kMaxOracleBits become an
  /// error instead of a skipped column.
  bool force_oracle = false;
  AdaptiveConfig adaptive;

  bool runs(Mode m) const { return mode == Mode::All || mode == m; }
};

/// Per-sample outcome of one engine mode.
struct ModeSamples {
  std::vector<Code> codes;
  std::vector<int> cycles;
};

struct ExperimentRow {
  int bits = 0;
  double entropy_bits = 0.0;
  std::optional<double> avg_cycles_binary;
  std::optional<double> avg_cycles_mer;
  std::optional<double> avg_cycles_adaptive;
  /// Adaptive average over samples converted after the first rebuild.
  std::optional<double> avg_cycles_adaptive_settled;
  double expected_len_mer = 0.0;
  std::optional<double> expected_len_optimal;
  std::size_t samples = 0;
  std::uint64_t seed = 0;

  // Artifacts for the CLI's side outputs and for tests.
  Pmf pmf = Pmf::uniform(1);
  DecisionTree binary_tree;
  DecisionTree mer_tree;
  std::optional<DecisionTree> optimal_tree;
  std::optional<DecisionTree> adaptive_final_tree;
  std::vector<double> xs;
  std::optional<ModeSamples> binary;
  std::optional<ModeSamples> mer;
  std::optional<ModeSamples> adaptive;
  std::vector<RebuildEvent> rebuild_log;

  /// Every mode that ran produced identical codes for every sample.
  bool codes_agree = true;
};

struct ExperimentReport {
  std::vector<ExperimentRow> rows;
  std::vector<std::string> warnings;
};

namespace detail {

inline Pmf experiment_pmf(const ExperimentConfig& config, const AdcConfig& cfg) {
  if (config.signal.kind == SignalKind::FromPmf) {
    if (config.signal.pmf->bits() != cfg.bits) {
      throw Error(ErrorKind::BitsMismatch,
                  "pmf has " + std::to_string(config.signal.pmf->size()) + " entries but --bits is " +
                      std::to_string(cfg.bits));
    }
    return *config.signal.pmf;
  }
  return exact_pmf(config.signal, cfg);
}

}  // namespace detail

inline ExperimentRow run_row(const ExperimentConfig& config, int bits, ExperimentReport& report) {
  const AdcConfig cfg{bits, config.delta};
  cfg.validate();
  ExperimentRow row;
  row.bits = bits;
  row.samples = config.samples;
  row.seed = config.seed;
  row.pmf = detail::experiment_pmf(config, cfg);
  row.entropy_bits = entropy(row.pmf);
  row.binary_tree = build_binary_tree(bits);
  row.mer_tree = build_mer_tree(row.pmf);
  row.expected_len_mer = expected_length(row.mer_tree, row.pmf);
  if (bits <= kMaxOracleBits) {
    row.optimal_tree = build_optimal_tree(row.pmf);
    row.expected_len_optimal = expected_length(*row.optimal_tree, row.pmf);
  } else if (config.force_oracle) {
    throw Error(ErrorKind::TooManyBits, "optimal tree requested at " + std::to_string(bits) +
                                            " bits; the limit is " + std::to_string(kMaxOracleBits));
  } else {
    report.warnings.push_back("optimal column skipped at " + std::to_string(bits) + " bits");
  }

  SignalSpec signal = config.signal;
  signal.seed = config.seed;
  row.xs = generate(signal, config.samples, cfg);

  auto run_tree = [&](const DecisionTree& tree) {
    BatchResult b = convert_batch(row.xs, tree, cfg);
    return ModeSamples{std::move(b.codes), std::move(b.cycles)};
  };
  if (config.runs(Mode::Binary)) {
    row.binary = run_tree(row.binary_tree);
    if (!row.xs.empty()) row.avg_cycles_binary = mean_cycles(row.binary->cycles);
  }
  if (config.runs(Mode::Mer)) {
    row.mer = run_tree(row.mer_tree);
    if (!row.xs.empty()) row.avg_cycles_mer = mean_cycles(row.mer->cycles);
  }
  if (config.runs(Mode::Adaptive)) {
    AdaptiveState state = new_adaptive(cfg, config.adaptive);
    AdaptiveRun run = run_adaptive(row.xs, state);
    if (!row.xs.empty()) row.avg_cycles_adaptive = mean_cycles(run.cycles);
    if (auto from = run.settled_from(); from && *from < run.cycles.size()) {
      row.avg_cycles_adaptive_settled =
          mean_cycles(std::span<const int>(run.cycles).subspan(*from));
    }
    row.adaptive_final_tree = state.active_tree;
    row.rebuild_log = std::move(run.log);
    row.adaptive = ModeSamples{std::move(run.codes), std::move(run.cycles)};
  }

  const std::vector<Code>* reference = nullptr;
  for (const auto* m : {&row.binary, &row.mer, &row.adaptive}) {
    if (!m->has_value()) continue;
    if (reference == nullptr) {
      reference = &(*m)->codes;
    } else if (*reference != (*m)->codes) {
      row.codes_agree = false;
    }
  }
  return row;
}

/// Runs every requested resolution in order.
inline ExperimentReport run_experiment(const ExperimentConfig& config) {
  if (config.bits.empty()) throw Error(ErrorKind::InvalidConfig, "no resolutions requested");
  ExperimentReport report;
  for (int bits : config.bits) report.rows.push_back(run_row(config, bits, report));
  return report;
}

// --- output formats --------------------------------------------------------

namespace detail {

inline std::string format_real(double v, int digits = 12) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_real(*v) : std::string{};
}

}  // namespace detail

inline void write_report_csv(std::ostream& out, const ExperimentReport& report) {
  out << "bits,entropy_bits,avg_cycles_binary,avg_cycles_mer,avg_cycles_adaptive,"
         "expected_len_mer,expected_len_optimal,samples,seed\n";
  for (const ExperimentRow& r : report.rows) {
    out << r.bits << ',' << detail::format_real(r.entropy_bits) << ','
        << detail::format_optional(r.avg_cycles_binary) << ','
        << detail::format_optional(r.avg_cycles_mer) << ','
        << detail::format_optional(r.avg_cycles_adaptive) << ','
        << detail::format_real(r.expected_len_mer) << ','
        << detail::format_optional(r.expected_len_optimal) << ',' << r.samples << ',' << r.seed
        << '\n';
  }
}

/// Per-sample CSV: sample_index,x,code,cycles. x is printed with 17
/// significant digits so it round-trips exactly.
inline void write_samples_csv(std::ostream& out, std::span<const double> xs, const ModeSamples& s) {
  out << "sample_index,x,code,cycles\n";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out << i << ',' << detail::format_real(xs[i], 17) << ',' << s.codes[i] << ',' << s.cycles[i]
        << '\n';
  }
}

inline void write_rebuild_log(std::ostream& out, std::span<const RebuildEvent> log) {
  for (const RebuildEvent& e : log) {
    out << "rebuild at sample " << e.sample_index << ", generation " << e.generation
        << ", window L1 " << detail::format_real(e.window_l1, 6) << ", expected length "
        << detail::format_real(e.expected_length, 6) << '\n';
  }
}

/// Walkthrough of the 2-bit example pmf (1/8, 1/8, 1/4, 1/2).
inline void run_two_bit_demo(std::ostream& out) {
  const Pmf pmf({0.125, 0.125, 0.25, 0.5});
  const DecisionTree tree = build_mer_tree(pmf);
  const auto depths = tree_depths(tree);
  const auto check = validate_tree(tree);
  out << "2-bit converter, output pmf:";
  for (std::size_t n = 0; n < pmf.size(); ++n) out << " p" << n << '=' << pmf[static_cast<Code>(n)];
  out << "\n\nmaximal entropy reduction tree:\n";
  write_tree(out, tree, "mer");
  out << "\ncomparisons per code:";
  for (std::size_t n = 0; n < depths.size(); ++n) out << " code " << n << ": " << depths[n] << (n + 1 < depths.size() ? "," : "");
  out << "\ndepths (" << depths[0];
  for (std::size_t n = 1; n < depths.size(); ++n) out << ", " << depths[n];
  out << ")\n";
  out << "average cycles " << detail::format_real(expected_length(tree, pmf)) << " (binary search: "
      << detail::format_real(expected_length(build_binary_tree(2), pmf)) << ")\n";
  out << "output entropy " << detail::format_real(entropy(pmf)) << " bits\n";
  out << "optimal alphabetic tree " << detail::format_real(expected_length(build_optimal_tree(pmf), pmf))
      << '\n';
  out << "tree check: " << (check.ok() ? "valid" : to_string(check.violation)) << '\n';
}

}  // namespace mersar
