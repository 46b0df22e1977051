#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mersar/mersar.hpp"

namespace mersar::cli {

/// "8" or the inclusive range "4..12".
inline std::vector<int> parse_bits(const std::string& text) {
  auto to_int = [&](const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw Error(ErrorKind::InvalidConfig, "bad --bits value '" + text + "'");
    }
    return std::stoi(s);
  };
  std::vector<int> out;
  const auto dots = text.find("..");
  if (dots == std::string::npos) {
    out.push_back(to_int(text));
  } else {
    const int lo = to_int(text.substr(0, dots));
    const int hi = to_int(text.substr(dots + 2));
    if (lo > hi) throw Error(ErrorKind::InvalidConfig, "empty --bits range '" + text + "'");
    for (int b = lo; b <= hi; ++b) out.push_back(b);
  }
  for (int b : out) detail::check_bits(b);
  return out;
}

inline std::vector<double> parse_reals(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != token.size()) {
      throw Error(ErrorKind::InvalidConfig, "bad " + flag + " value '" + text + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorKind::InvalidConfig, "empty " + flag + " value");
  return out;
}

struct Options {
  std::string bits;
  std::string dist;
  std::string par_db;
  std::string weights;
  std::string pmf_file;
  std::string pmf_inline;
  double delta = 1.0;
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  std::string mode = "all";
  bool oracle = false;
  std::string csv_out;
  std::string tree_out;
  std::string log_out;
  std::string report_out;
  bool dump_tree = false;
  std::size_t window = 0;
  double l1_threshold = 0.02;
};

inline ExperimentConfig to_config(const Options& o, std::ostream& err) {
  ExperimentConfig c;
  c.delta = o.delta;
  c.samples = o.samples;
  c.seed = o.seed;
  c.force_oracle = o.oracle;
  c.adaptive.window = o.window;
  c.adaptive.l1_threshold = o.l1_threshold;

  if (o.mode == "binary") c.mode = Mode::Binary;
  else if (o.mode == "mer") c.mode = Mode::Mer;
  else if (o.mode == "adaptive") c.mode = Mode::Adaptive;
  else if (o.mode == "all") c.mode = Mode::All;
  else throw Error(ErrorKind::InvalidConfig, "unknown --mode '" + o.mode + "'");

  const int pmf_sources = !o.pmf_file.empty() + !o.pmf_inline.empty() + !o.dist.empty();
  if (pmf_sources != 1) {
    throw Error(ErrorKind::InvalidConfig,
                "give exactly one of --dist, --pmf-file or --pmf-inline");
  }
  if (!o.dist.empty()) {
    if (o.bits.empty()) throw Error(ErrorKind::InvalidConfig, "--bits is required with --dist");
    c.bits = parse_bits(o.bits);
    if (o.dist == "uniform") {
      c.signal = SignalSpec::uniform(o.seed);
    } else if (o.dist == "gaussian") {
      const auto par = o.par_db.empty() ? std::vector<double>{10.0} : parse_reals(o.par_db, "--par-db");
      if (par.size() != 1) throw Error(ErrorKind::InvalidConfig, "gaussian takes one --par-db value");
      c.signal = SignalSpec::gaussian(par[0], o.seed);
    } else if (o.dist == "mixture") {
      const auto par = o.par_db.empty() ? std::vector<double>{10.0, 30.0} : parse_reals(o.par_db, "--par-db");
      const auto w = o.weights.empty() ? std::vector<double>{0.1, 0.9} : parse_reals(o.weights, "--weights");
      c.signal = SignalSpec::mixture(par, w, o.seed);
    } else {
      throw Error(ErrorKind::InvalidConfig, "unknown --dist '" + o.dist + "'");
    }
    c.signal.validate();
    return c;
  }

  LoadedPmf loaded = o.pmf_file.empty() ? parse_pmf_inline(o.pmf_inline) : load_pmf_file(o.pmf_file);
  if (loaded.sum_warning) {
    err << "warning: pmf entries sum to " << loaded.raw_sum << "; renormalized\n";
  }
  c.bits = o.bits.empty() ? std::vector<int>{loaded.pmf.bits()} : parse_bits(o.bits);
  if (c.bits.size() != 1 || c.bits.front() != loaded.pmf.bits()) {
    throw Error(ErrorKind::BitsMismatch, "pmf has " + std::to_string(loaded.pmf.size()) +
                                             " entries, which does not match --bits " + o.bits);
  }
  c.signal = SignalSpec::from_pmf(std::move(loaded.pmf), o.seed);
  return c;
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::InvalidConfig, "cannot write '" + path + "'");
  return f;
}

inline std::string suffixed(const std::string& path, int bits, Mode mode) {
  const std::filesystem::path p(path);
  std::filesystem::path out = p.parent_path() /
      (p.stem().string() + "_b" + std::to_string(bits) + "_" + to_string(mode) + p.extension().string());
  return out.string();
}

struct TreeChoice {
  const DecisionTree* tree;
  const char* builder;
};

inline TreeChoice tree_for(const ExperimentRow& row, Mode mode) {
  switch (mode) {
    case Mode::Binary: return {&row.binary_tree, "binary"};
    case Mode::Adaptive: return {&*row.adaptive_final_tree, "adaptive"};
    case Mode::Mer:
    case Mode::All: break;
  }
  return {&row.mer_tree, "mer"};
}

}  // namespace detail

inline void write_outputs(const Options& o, const ExperimentConfig& c, const ExperimentReport& report,
                          std::ostream& out, std::ostream& err) {
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';

  if (o.dump_tree || !o.tree_out.empty()) {
    std::ostringstream trees;
    for (const auto& row : report.rows) {
      const auto choice = detail::tree_for(row, c.mode);
      write_tree(trees, *choice.tree, choice.builder);
    }
    if (o.dump_tree) out << trees.str();
    if (!o.tree_out.empty()) detail::open_out(o.tree_out) << trees.str();
  }

  if (!o.csv_out.empty()) {
    std::vector<std::pair<Mode, const ModeSamples*>> runs;
    std::size_t total = 0;
    for (const auto& row : report.rows) {
      for (auto [m, s] : {std::pair{Mode::Binary, &row.binary}, std::pair{Mode::Mer, &row.mer},
                          std::pair{Mode::Adaptive, &row.adaptive}}) {
        if (s->has_value()) ++total;
      }
    }
    for (const auto& row : report.rows) {
      for (auto [m, s] : {std::pair{Mode::Binary, &row.binary}, std::pair{Mode::Mer, &row.mer},
                          std::pair{Mode::Adaptive, &row.adaptive}}) {
        if (!s->has_value()) continue;
        const std::string path = total == 1 ? o.csv_out : detail::suffixed(o.csv_out, row.bits, m);
        auto f = detail::open_out(path);
        write_samples_csv(f, row.xs, **s);
      }
    }
  }

  if (!o.log_out.empty()) {
    auto f = detail::open_out(o.log_out);
    for (const auto& row : report.rows) {
      if (report.rows.size() > 1) f << "# bits=" << row.bits << '\n';
      write_rebuild_log(f, row.rebuild_log);
    }
  }

  write_report_csv(out, report);
  if (!o.report_out.empty()) {
    auto f = detail::open_out(o.report_out);
    write_report_csv(f, report);
  }

  for (const auto& row : report.rows) {
    if (row.avg_cycles_adaptive_settled) {
      err << "bits " << row.bits << ": adaptive average after first rebuild "
          << mersar::detail::format_real(*row.avg_cycles_adaptive_settled) << " over "
          << row.rebuild_log.size() << " rebuild(s)\n";
    }
  }
}

/// Entry point shared by the executable and the tests. Returns the process
/// exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Maximal entropy reduction SAR ADC simulator"};
  Options o;
  app.add_option("--bits", o.bits, "Resolution N or inclusive range a..b");
  app.add_option("--dist", o.dist, "Input distribution: uniform, gaussian or mixture");
  app.add_option("--par-db", o.par_db, "Peak-to-RMS ratio in dB (mixture: r1,r2)");
  app.add_option("--weights", o.weights, "Mixture weights w1,w2");
  app.add_option("--pmf-file", o.pmf_file, "Output pmf, one probability per line");
  app.add_option("--pmf-inline", o.pmf_inline, "Output pmf as comma-separated values");
  app.add_option("--delta", o.delta, "Quantization step")->check(CLI::PositiveNumber);
  app.add_option("--samples", o.samples, "Samples per resolution");
  app.add_option("--seed", o.seed, "Random seed");
  app.add_option("--mode", o.mode, "binary, mer, adaptive or all");
  app.add_flag("--oracle", o.oracle, "Require the optimal-tree column");
  app.add_option("--csv-out", o.csv_out, "Per-sample CSV path");
  app.add_option("--tree-out", o.tree_out, "Tree dump path");
  app.add_option("--log-out", o.log_out, "Adaptive rebuild log path");
  app.add_option("--report-out", o.report_out, "Also write the report CSV to this path");
  app.add_flag("--dump-tree", o.dump_tree, "Print the tree dump to stdout");
  app.add_option("--window", o.window, "Adaptive statistics window (0: default)");
  app.add_option("--l1-threshold", o.l1_threshold, "Adaptive histogram change threshold");
  auto* demo = app.add_subcommand("demo", "Walk through the 2-bit example tree");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (demo->parsed()) {
      run_two_bit_demo(out);
      return 0;
    }
    const ExperimentConfig config = to_config(o, err);
    const ExperimentReport report = run_experiment(config);
    for (const auto& row : report.rows) {
      if (!row.codes_agree) {
        err << "error: engine modes disagree on output codes at " << row.bits << " bits\n";
        return 3;
      }
    }
    write_outputs(o, config, report, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace mersar::cli
