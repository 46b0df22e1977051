#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mersar/error.hpp"
#include "mersar/pmf.hpp"
#include "mersar/sar_engine.hpp"

namespace mersar {

enum class SignalKind { Uniform, Gaussian, GaussianMixture, FromPmf };

inline const char* to_string(SignalKind k) {
  switch (k) {
    case SignalKind::Uniform: return "uniform";
    case SignalKind::Gaussian: return "gaussian";
    case SignalKind::GaussianMixture: return "mixture";
    case SignalKind::FromPmf: return "pmf";
  }
  return "unknown";
}

/// Input distribution. Gaussian components are characterized by their
/// peak-to-RMS ratio against the converter's half range.
struct SignalSpec {
  SignalKind kind = SignalKind::Uniform;
  std::vector<double> par_db;
  std::vector<double> weights;
  std::uint64_t seed = 0;
  std::optional<Pmf> pmf;

  static SignalSpec uniform(std::uint64_t seed) { return {SignalKind::Uniform, {}, {}, seed, {}}; }
  static SignalSpec gaussian(double par_db, std::uint64_t seed) {
    return {SignalKind::Gaussian, {par_db}, {1.0}, seed, {}};
  }
  static SignalSpec mixture(std::vector<double> par_db, std::vector<double> weights,
                            std::uint64_t seed) {
    return {SignalKind::GaussianMixture, std::move(par_db), std::move(weights), seed, {}};
  }
  static SignalSpec from_pmf(Pmf pmf, std::uint64_t seed) {
    return {SignalKind::FromPmf, {}, {}, seed, std::move(pmf)};
  }

  void validate() const {
    switch (kind) {
      case SignalKind::Uniform:
        return;
      case SignalKind::FromPmf:
        if (!pmf) throw Error(ErrorKind::InvalidConfig, "pmf signal without a pmf");
        return;
      case SignalKind::Gaussian:
      case SignalKind::GaussianMixture:
        break;
    }
    if (par_db.empty() || par_db.size() != weights.size()) {
      throw Error(ErrorKind::InvalidConfig, "need one weight per peak-to-RMS ratio");
    }
    if (kind == SignalKind::Gaussian && par_db.size() != 1) {
      throw Error(ErrorKind::InvalidConfig, "gaussian signal takes exactly one peak-to-RMS ratio");
    }
    for (double r : par_db) {
      if (!(r > 0.0) || !std::isfinite(r)) {
        throw Error(ErrorKind::InvalidConfig, "peak-to-RMS ratio must be positive");
      }
    }
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw Error(ErrorKind::InvalidConfig, "mixture weights must be non-negative");
      }
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw Error(ErrorKind::InvalidConfig, "mixture weights must sum to 1");
    }
  }
};

/// Half range A = 2^(N-1) * delta: the "peak" of the peak-to-RMS ratio.
inline double full_scale_amplitude(const AdcConfig& cfg) {
  return std::ldexp(cfg.delta, cfg.bits - 1);
}

/// Mid-scale center (2^(N-1) - 0.5) * delta, the boundary between the two
/// middle codes, which makes the code histogram symmetric.
inline double mid_scale(const AdcConfig& cfg) {
  return dac_reference(static_cast<Code>(cfg.code_count() / 2), cfg);
}

/// sigma = A / 10^(par/20).
inline double sigma_for_par(double par_db, const AdcConfig& cfg) {
  return full_scale_amplitude(cfg) / std::pow(10.0, par_db / 20.0);
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Samples per independently seeded partition.
inline constexpr std::size_t kPartitionSize = 65536;

/// Fixed sampling pipeline: mt19937_64 words, 53-bit uniforms, Box-Muller
/// normals (cosine branch only). Nothing here depends on the
/// implementation-defined std:: distributions.
class SampleSource {
 public:
  explicit SampleSource(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

inline double clip_to_range(double x, const AdcConfig& cfg) {
  const double hi = std::nextafter(input_ceiling(cfg), -std::numeric_limits<double>::infinity());
  return std::clamp(x, input_floor(cfg), hi);
}

inline double draw(const SignalSpec& spec, const AdcConfig& cfg, SampleSource& src,
                   std::span<const double> pmf_cdf) {
  switch (spec.kind) {
    case SignalKind::Uniform: {
      const double span = input_ceiling(cfg) - input_floor(cfg);
      return clip_to_range(input_floor(cfg) + src.uniform() * span, cfg);
    }
    case SignalKind::FromPmf: {
      const double u = src.uniform();
      auto it = std::upper_bound(pmf_cdf.begin(), pmf_cdf.end(), u);
      auto code = static_cast<std::size_t>(it - pmf_cdf.begin());
      code = std::min(code, cfg.code_count() - 1);
      // u above a slightly short cdf total clamps to the last code; back off
      // to the last code that can actually occur.
      while (spec.pmf->probs()[code] == 0.0 && code > 0) --code;
      const double lo = dac_reference(static_cast<Code>(code), cfg);
      const double hi = dac_reference(static_cast<Code>(code + 1), cfg);
      const double x = lo + src.uniform() * (hi - lo);
      return clip_to_range(std::min(x, std::nextafter(hi, lo)), cfg);
    }
    case SignalKind::Gaussian:
    case SignalKind::GaussianMixture: {
      std::size_t component = 0;
      if (spec.weights.size() > 1) {
        const double u = src.uniform();
        double acc = 0.0;
        component = spec.weights.size() - 1;
        for (std::size_t k = 0; k < spec.weights.size(); ++k) {
          acc += spec.weights[k];
          if (u < acc) {
            component = k;
            break;
          }
        }
      }
      const double s = sigma_for_par(spec.par_db[component], cfg) * src.normal();
      return clip_to_range(mid_scale(cfg) + s, cfg);
    }
  }
  return 0.0;
}

}  // namespace detail

/// Draws n independent analog samples inside the converter input range.
/// Sample i belongs to partition i / 65536, whose generator is seeded with
/// splitmix64(seed ^ splitmix64(partition)), so any partition can be
/// produced independently with identical results.
inline std::vector<double> generate(const SignalSpec& spec, std::size_t n_samples,
                                    const AdcConfig& cfg) {
  cfg.validate();
  spec.validate();
  if (spec.kind == SignalKind::FromPmf && spec.pmf->bits() != cfg.bits) {
    throw Error(ErrorKind::BitsMismatch, "signal pmf and converter resolutions differ");
  }
  std::vector<double> cdf;
  if (spec.kind == SignalKind::FromPmf) {
    cdf.resize(spec.pmf->size());
    double acc = 0.0;
    for (std::size_t i = 0; i < cdf.size(); ++i) cdf[i] = (acc += spec.pmf->probs()[i]);
  }
  std::vector<double> xs;
  xs.reserve(n_samples);
  for (std::size_t part = 0; part * detail::kPartitionSize < n_samples; ++part) {
    detail::SampleSource src(detail::splitmix64(spec.seed ^ detail::splitmix64(part)));
    const std::size_t end = std::min(n_samples, (part + 1) * detail::kPartitionSize);
    for (std::size_t i = part * detail::kPartitionSize; i < end; ++i) {
      xs.push_back(detail::draw(spec, cfg, src, cdf));
    }
  }
  return xs;
}

namespace detail {

// Upper-tail probability Q(z) = Pr(Z >= z), accurate in both tails.
inline double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

inline std::vector<double> gaussian_code_masses(double sigma, const AdcConfig& cfg) {
  const std::size_t n = cfg.code_count();
  const double center = mid_scale(cfg);
  constexpr double inf = std::numeric_limits<double>::infinity();
  // Standardized cell edges; the outer edges are infinite so codes 0 and
  // n-1 absorb the clipped tails.
  std::vector<double> z(n + 1);
  z[0] = -inf;
  z[n] = inf;
  for (std::size_t k = 1; k < n; ++k) {
    z[k] = (dac_reference(static_cast<Code>(k), cfg) - center) / sigma;
  }
  std::vector<double> p(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (z[k] >= 0.0) {
      p[k] = normal_upper_tail(z[k]) - normal_upper_tail(z[k + 1]);
    } else if (z[k + 1] <= 0.0) {
      p[k] = normal_upper_tail(-z[k + 1]) - normal_upper_tail(-z[k]);
    } else {
      p[k] = 1.0 - normal_upper_tail(z[k + 1]) - normal_upper_tail(-z[k]);
    }
    p[k] = std::max(p[k], 0.0);
  }
  return p;
}

}  // namespace detail

/// Exact output-code distribution of an analytic signal, including the
/// clipped tail mass on the edge codes.
inline Pmf exact_pmf(const SignalSpec& spec, const AdcConfig& cfg) {
  cfg.validate();
  spec.validate();
  switch (spec.kind) {
    case SignalKind::Uniform:
      return Pmf::uniform(cfg.bits);
    case SignalKind::FromPmf:
      throw Error(ErrorKind::UnsupportedKind, "pmf-file signals have no analytic distribution");
    case SignalKind::Gaussian:
    case SignalKind::GaussianMixture:
      break;
  }
  std::vector<double> total(cfg.code_count(), 0.0);
  for (std::size_t c = 0; c < spec.par_db.size(); ++c) {
    const auto part = detail::gaussian_code_masses(sigma_for_par(spec.par_db[c], cfg), cfg);
    for (std::size_t k = 0; k < total.size(); ++k) total[k] += spec.weights[c] * part[k];
  }
  return Pmf::renormalized(std::move(total));
}

/// Per-component exact pmf, used to check mixture composition.
inline Pmf exact_component_pmf(double par_db, const AdcConfig& cfg) {
  return Pmf::renormalized(detail::gaussian_code_masses(sigma_for_par(par_db, cfg), cfg));
}

}  // namespace mersar
