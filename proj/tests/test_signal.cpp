#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>

#include "mersar/pmf.hpp"
#include "mersar/sar_engine.hpp"
#include "mersar/signal.hpp"

using namespace mersar;

namespace {

std::vector<double> code_histogram(const std::vector<double>& xs, const AdcConfig& cfg) {
  std::vector<double> counts(cfg.code_count(), 0.0);
  for (double x : xs) counts[quantize(x, cfg)] += 1.0;
  return counts;
}

/// Chi-square goodness-of-fit p-value, pooling cells with expected count < 5.
double chi_square_p_value(const std::vector<double>& observed, const Pmf& expected_pmf, double n) {
  double stat = 0.0;
  int cells = 0;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double e = n * expected_pmf[static_cast<Code>(k)];
    if (e < 5.0) {
      pooled_obs += observed[k];
      pooled_exp += e;
      continue;
    }
    stat += (observed[k] - e) * (observed[k] - e) / e;
    ++cells;
  }
  if (pooled_exp >= 5.0) {
    stat += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++cells;
  }
  const boost::math::chi_squared dist(cells - 1);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace

TEST(Generate, EmptyRequest) {
  EXPECT_TRUE(generate(SignalSpec::gaussian(10, 1), 0, {8, 1.0}).empty());
}

TEST(Generate, UniformHistogramWithinFourStandardErrors) {
  const AdcConfig cfg{6, 1.0};
  const std::size_t n = 100000;
  const auto counts = code_histogram(generate(SignalSpec::uniform(5), n, cfg), cfg);
  const double p = 1.0 / 64.0;
  const double se = std::sqrt(n * p * (1 - p));
  for (double c : counts) EXPECT_NEAR(c, n * p, 4 * se);
}

TEST(Generate, MatchesExactPmfByChiSquare) {
  const double n = 100000;
  const AdcConfig cfg{8, 1.0};
  for (const auto& spec : {SignalSpec::gaussian(10, 7), SignalSpec::mixture({10, 30}, {0.1, 0.9}, 7),
                           SignalSpec::uniform(7), SignalSpec::gaussian(3, 9)}) {
    const auto counts = code_histogram(generate(spec, static_cast<std::size_t>(n), cfg), cfg);
    EXPECT_GT(chi_square_p_value(counts, exact_pmf(spec, cfg), n), 0.001) << to_string(spec.kind);
  }
}

TEST(Generate, StaysInRangeAndClipsTails) {
  // 0 dB puts a third of the mass beyond full scale.
  const AdcConfig cfg{4, 0.5};
  const auto xs = generate(SignalSpec::gaussian(0.5, 3), 50000, cfg);
  for (double x : xs) ASSERT_TRUE(in_range(x, cfg));
  const Pmf exact = exact_pmf(SignalSpec::gaussian(0.5, 3), cfg);
  const auto counts = code_histogram(xs, cfg);
  EXPECT_GT(exact[0], 0.1);
  EXPECT_NEAR(counts[0] / 50000.0, exact[0], 0.01);
  EXPECT_NEAR(counts[15] / 50000.0, exact[15], 0.01);
}

TEST(Generate, DeterministicPerSeedAndPartitioned) {
  const AdcConfig cfg{10, 1.0};
  const auto spec = SignalSpec::mixture({10, 30}, {0.1, 0.9}, 42);
  const auto a = generate(spec, 70000, cfg);
  EXPECT_EQ(a, generate(spec, 70000, cfg));
  const auto prefix = generate(spec, 1000, cfg);
  EXPECT_TRUE(std::equal(prefix.begin(), prefix.end(), a.begin()));
  auto other = spec;
  other.seed = 43;
  EXPECT_NE(generate(other, 1000, cfg), prefix);
}

TEST(Generate, FromPmfHitsOnlySupportedCodes) {
  const AdcConfig cfg{3, 1.0};
  const Pmf p({0.0, 0.5, 0.0, 0.0, 0.25, 0.0, 0.25, 0.0});
  const auto counts = code_histogram(generate(SignalSpec::from_pmf(p, 1), 20000, cfg), cfg);
  for (Code k = 0; k < 8; ++k) {
    if (p[k] == 0.0) {
      EXPECT_EQ(counts[k], 0.0);
    }
  }
  EXPECT_GT(chi_square_p_value(counts, p, 20000), 0.001);
}

TEST(ExactPmf, Examples) {
  EXPECT_EQ(exact_pmf(SignalSpec::uniform(0), {2, 1.0}), Pmf::uniform(2));
  const Pmf g = exact_pmf(SignalSpec::gaussian(10, 0), {8, 1.0});
  EXPECT_LT(entropy(g), 8.0);
  EXPECT_GT(entropy(g), 6.0);
}

TEST(ExactPmf, VanishingSigmaConcentratesAtMidScale) {
  // The center sits on the edge between codes 2^(N-1)-1 and 2^(N-1).
  for (int bits : {2, 6, 10}) {
    const AdcConfig cfg{bits, 1.0};
    const Pmf p = exact_pmf(SignalSpec::gaussian(400, 0), cfg);
    const Code mid = static_cast<Code>(cfg.code_count() / 2);
    EXPECT_NEAR(p[mid - 1], 0.5, 1e-12);
    EXPECT_NEAR(p[mid], 0.5, 1e-12);
    EXPECT_NEAR(entropy(p), 1.0, 1e-9);
  }
}

TEST(ExactPmf, SymmetricAboutMidScale) {
  const AdcConfig cfg{9, 1.0};
  const Pmf p = exact_pmf(SignalSpec::mixture({10, 30}, {0.1, 0.9}, 0), cfg);
  for (Code k = 0; k < 512; ++k) EXPECT_NEAR(p[k], p[511 - k], 1e-15);
}

TEST(ExactPmf, MixtureIsWeightedSumOfComponents) {
  for (int bits : {4, 8, 12}) {
    const AdcConfig cfg{bits, 1.0};
    const Pmf mix = exact_pmf(SignalSpec::mixture({10, 30}, {0.1, 0.9}, 0), cfg);
    const Pmf a = exact_component_pmf(10, cfg);
    const Pmf b = exact_component_pmf(30, cfg);
    for (Code k = 0; k < cfg.code_count(); ++k) EXPECT_NEAR(mix[k], 0.1 * a[k] + 0.9 * b[k], 1e-12);
  }
}

TEST(ExactPmf, SigmaFollowsPeakToRmsRatio) {
  const AdcConfig cfg{8, 1.0};
  EXPECT_NEAR(sigma_for_par(10, cfg), 128.0 / std::sqrt(10.0), 1e-12);
  EXPECT_NEAR(sigma_for_par(20, cfg), 12.8, 1e-12);
  EXPECT_EQ(mid_scale(cfg), 127.5);
}

TEST(SignalSpec, Errors) {
  try {
    exact_pmf(SignalSpec::from_pmf(Pmf::uniform(2), 0), {2, 1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnsupportedKind);
  }
  EXPECT_THROW(SignalSpec::mixture({10, 30}, {0.5, 0.6}, 0).validate(), Error);
  EXPECT_THROW(SignalSpec::mixture({10}, {0.5, 0.5}, 0).validate(), Error);
  EXPECT_THROW(SignalSpec::gaussian(0.0, 0).validate(), Error);
  EXPECT_THROW(SignalSpec::gaussian(-3.0, 0).validate(), Error);
  EXPECT_THROW(generate(SignalSpec::from_pmf(Pmf::uniform(2), 0), 10, {3, 1.0}), Error);
}
