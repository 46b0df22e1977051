#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mersar/error.hpp"

namespace mersar {

/// Output code of the converter, 0 .. 2^bits - 1. Thresholds use the same
/// type and may also take the value 2^bits (the upper range edge).
using Code = std::uint32_t;

/// Largest supported resolution. A 2^20-entry pmf and a 2^20-node tree still
/// fit comfortably in memory.
inline constexpr int kMaxBits = 20;

/// Sum tolerance accepted by the validating Pmf constructor.
inline constexpr double kPmfSumTolerance = 1e-9;

/// Raw-sum deviation above which the pmf file loader flags a warning.
inline constexpr double kPmfFileWarnTolerance = 1e-3;

namespace detail {

/// Neumaier compensated summation; every probability total in the library
/// goes through this so that masses agree bit-for-bit across modules.
template <typename Range>
double compensated_sum(const Range& values) {
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

inline int bits_for_size(std::size_t n) {
  if (n < 2 || !std::has_single_bit(n)) {
    throw Error(ErrorKind::InvalidPmf,
                "pmf length " + std::to_string(n) + " is not a power of two >= 2");
  }
  const int bits = std::countr_zero(n);
  if (bits > kMaxBits) {
    throw Error(ErrorKind::TooManyBits,
                "pmf resolution " + std::to_string(bits) + " exceeds " +
                    std::to_string(kMaxBits) + " bits");
  }
  return bits;
}

inline void check_bits(int bits) {
  if (bits < 1) {
    throw Error(ErrorKind::InvalidConfig, "bits must be >= 1");
  }
  if (bits > kMaxBits) {
    throw Error(ErrorKind::TooManyBits,
                std::to_string(bits) + " bits exceeds the supported maximum of " +
                    std::to_string(kMaxBits));
  }
}

}  // namespace detail

/// Half-open ambiguity interval [lb, ub) over output codes.
struct Interval {
  Code lb = 0;
  Code ub = 0;

  constexpr std::size_t size() const { return ub - lb; }
  constexpr bool contains(Code c) const { return lb <= c && c < ub; }
  friend constexpr bool operator==(const Interval&, const Interval&) = default;
};

/// Probability vector over the 2^bits output codes.
///
/// Every constructed Pmf is normalized so that its compensated sum is exactly
/// 1.0; downstream expected-length sums then reproduce integer depths
/// exactly (a fixed-depth tree has expected length == bits).
class Pmf {
 public:
  /// Validating constructor: entries must be finite, non-negative and sum to
  /// 1 within kPmfSumTolerance.
  explicit Pmf(std::vector<double> probs) : probs_(std::move(probs)) {
    bits_ = detail::bits_for_size(probs_.size());
    check_entries();
    const double total = detail::compensated_sum(probs_);
    if (std::abs(total - 1.0) > kPmfSumTolerance) {
      throw Error(ErrorKind::InvalidPmf,
                  "probabilities sum to " + std::to_string(total) + ", not 1");
    }
    canonicalize(total);
  }

  /// Builds a Pmf from arbitrary non-negative weights (histogram counts,
  /// unnormalized densities). The weights must have positive total.
  static Pmf renormalized(std::vector<double> weights) {
    Pmf p;
    p.probs_ = std::move(weights);
    p.bits_ = detail::bits_for_size(p.probs_.size());
    p.check_entries();
    const double total = detail::compensated_sum(p.probs_);
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw Error(ErrorKind::InvalidPmf, "weights have no positive finite total");
    }
    p.canonicalize(total);
    return p;
  }

  static Pmf uniform(int bits) {
    detail::check_bits(bits);
    const std::size_t n = std::size_t{1} << bits;
    return Pmf(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  int bits() const { return bits_; }
  std::size_t size() const { return probs_.size(); }
  std::span<const double> probs() const { return probs_; }
  double operator[](Code c) const { return probs_[c]; }
  Interval full_range() const { return {0, static_cast<Code>(probs_.size())}; }

  friend bool operator==(const Pmf&, const Pmf&) = default;

 private:
  Pmf() = default;

  void check_entries() const {
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      if (!std::isfinite(probs_[i]) || probs_[i] < 0.0) {
        throw Error(ErrorKind::InvalidPmf,
                    "entry " + std::to_string(i) + " is negative or not finite");
      }
    }
  }

  void canonicalize(double total) {
    for (double& p : probs_) p /= total;
    // Push the residual into the largest entry until the compensated sum is
    // exactly one. Converges in one or two rounds in practice.
    auto largest = std::max_element(probs_.begin(), probs_.end());
    for (int round = 0; round < 8; ++round) {
      const double residual = 1.0 - detail::compensated_sum(probs_);
      if (residual == 0.0) break;
      *largest = std::max(0.0, *largest + residual);
    }
  }

  std::vector<double> probs_;
  int bits_ = 0;
};

inline void check_interval(const Pmf& pmf, const Interval& iv) {
  if (!(iv.lb < iv.ub) || iv.ub > pmf.size()) {
    throw Error(ErrorKind::InvalidInterval,
                "[" + std::to_string(iv.lb) + "," + std::to_string(iv.ub) +
                    ") is not a non-empty interval within [0," +
                    std::to_string(pmf.size()) + ")");
  }
}

/// Total probability of the codes in iv.
inline double mass(const Pmf& pmf, const Interval& iv) {
  check_interval(pmf, iv);
  return detail::compensated_sum(pmf.probs().subspan(iv.lb, iv.size()));
}

namespace detail {

inline double entropy_of(std::span<const double> probs, double scale) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) {
      const double q = p / scale;
      h -= q * std::log2(q);
    }
  }
  return h;
}

}  // namespace detail

/// Shannon entropy in bits, with 0*log2(0) taken as 0.
inline double entropy(const Pmf& pmf) {
  const double h = detail::entropy_of(pmf.probs(), 1.0);
  return std::clamp(h, 0.0, static_cast<double>(pmf.bits()));
}

/// Entropy of the pmf restricted to iv and renormalized.
inline double conditional_entropy(const Pmf& pmf, const Interval& iv) {
  const double m = mass(pmf, iv);
  if (!(m > 0.0)) {
    throw Error(ErrorKind::ZeroMassInterval,
                "interval [" + std::to_string(iv.lb) + "," + std::to_string(iv.ub) +
                    ") carries no probability mass");
  }
  const double h = detail::entropy_of(pmf.probs().subspan(iv.lb, iv.size()), m);
  return std::clamp(h, 0.0, std::log2(static_cast<double>(iv.size())));
}

/// Comparator outcome probabilities for a threshold inside an interval.
/// z = 1 means x lies below the DAC reference, i.e. the output falls in the
/// lower sub-interval [lb, threshold).
struct BranchProbabilities {
  double p_z0 = 0.0;  ///< mass of [threshold, ub), normalized
  double p_z1 = 0.0;  ///< mass of [lb, threshold), normalized
};

inline BranchProbabilities branch_probabilities(const Pmf& pmf, const Interval& iv,
                                                Code threshold) {
  check_interval(pmf, iv);
  if (!(iv.lb < threshold && threshold < iv.ub)) {
    throw Error(ErrorKind::ThresholdOutOfRange,
                "threshold " + std::to_string(threshold) + " is not strictly inside [" +
                    std::to_string(iv.lb) + "," + std::to_string(iv.ub) + ")");
  }
  const double lower = mass(pmf, {iv.lb, threshold});
  const double upper = mass(pmf, {threshold, iv.ub});
  const double total = lower + upper;
  if (!(total > 0.0)) {
    throw Error(ErrorKind::ZeroMassInterval, "split interval carries no mass");
  }
  return {upper / total, lower / total};
}

// --- text formats --------------------------------------------------------

struct LoadedPmf {
  Pmf pmf;
  double raw_sum = 0.0;
  /// Raw entries deviated from a unit sum by more than kPmfFileWarnTolerance.
  bool sum_warning = false;
};

namespace detail {

inline double parse_probability(const std::string& token, std::size_t position) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  while (used < token.size() && std::isspace(static_cast<unsigned char>(token[used]))) ++used;
  if (used == 0 || used != token.size() || !std::isfinite(v) || v < 0.0) {
    throw Error(ErrorKind::ParseError,
                "entry " + std::to_string(position) + " ('" + token +
                    "') is not a non-negative decimal");
  }
  return v;
}

inline LoadedPmf finish_loaded(std::vector<double> raw) {
  const double raw_sum = compensated_sum(raw);
  LoadedPmf out{Pmf::renormalized(std::move(raw)), raw_sum, false};
  out.sum_warning = std::abs(raw_sum - 1.0) > kPmfFileWarnTolerance;
  return out;
}

}  // namespace detail

/// Reads the pmf text format: one non-negative decimal per line, 2^N lines.
/// Blank lines are ignored.
inline LoadedPmf parse_pmf_text(std::istream& in) {
  std::vector<double> raw;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    raw.push_back(detail::parse_probability(line.substr(first, last - first + 1),
                                            raw.size()));
  }
  return detail::finish_loaded(std::move(raw));
}

inline LoadedPmf load_pmf_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::ParseError, "cannot open pmf file '" + path + "'");
  }
  return parse_pmf_text(in);
}

/// Comma-separated variant of the same format, e.g. "0.125,0.125,0.25,0.5".
inline LoadedPmf parse_pmf_inline(const std::string& csv) {
  std::vector<double> raw;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ',')) {
    const auto first = token.find_first_not_of(" \t");
    if (first == std::string::npos) {
      throw Error(ErrorKind::ParseError, "empty entry " + std::to_string(raw.size()));
    }
    const auto last = token.find_last_not_of(" \t");
    raw.push_back(detail::parse_probability(token.substr(first, last - first + 1),
                                            raw.size()));
  }
  return detail::finish_loaded(std::move(raw));
}

inline void write_pmf_text(std::ostream& out, const Pmf& pmf) {
  const auto old = out.precision(17);
  for (double p : pmf.probs()) out << p << '\n';
  out.precision(old);
}

}  // namespace mersar
