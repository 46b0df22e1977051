#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mersar/adaptive.hpp"
#include "mersar/experiment.hpp"
#include "mersar/signal.hpp"

using namespace mersar;

namespace {

const Pmf kTwoBitPmf({0.125, 0.125, 0.25, 0.5});

}  // namespace

TEST(NewAdaptive, StartsFromBinaryTree) {
  const AdaptiveState s = new_adaptive({2, 1.0});
  EXPECT_EQ(s.active_tree, build_binary_tree(2));
  EXPECT_EQ(s.active_tree.nodes.size(), 3u);
  EXPECT_EQ(s.generation, 0u);
  EXPECT_EQ(s.samples_seen, 0u);
  EXPECT_EQ(s.counts, std::vector<std::uint64_t>(4, 0));
  EXPECT_EQ(new_adaptive({1, 1.0}).active_tree.nodes.size(), 1u);
  EXPECT_EQ(new_adaptive({5, 0.1}), new_adaptive({5, 0.1}));
  EXPECT_THROW(new_adaptive({2, 1.0}, {0, -1.0}), Error);
}

TEST(Observe, CountsCodes) {
  AdaptiveState s = new_adaptive({2, 1.0});
  observe(s, 3);
  EXPECT_EQ(s.counts, (std::vector<std::uint64_t>{0, 0, 0, 1}));
  for (int i = 0; i < 99; ++i) observe(s, 3);
  EXPECT_EQ(s.counts[3], 100u);
  EXPECT_EQ(s.samples_seen, 100u);
  EXPECT_EQ(s.generation, 0u);
  EXPECT_EQ(s.active_tree, build_binary_tree(2));
  try {
    observe(s, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CodeOutOfRange);
  }
}

TEST(EstimatePmf, LaplaceSmoothing) {
  AdaptiveState s = new_adaptive({2, 1.0});
  try {
    estimate_pmf(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoSamples);
  }
  for (int i = 0; i < 4; ++i) observe(s, 3);
  EXPECT_EQ(estimate_pmf(s), Pmf({0.125, 0.125, 0.125, 0.625}));

  AdaptiveState one = new_adaptive({1, 1.0});
  for (int i = 0; i < 3; ++i) observe(one, 0);
  observe(one, 1);
  const Pmf p = estimate_pmf(one);
  EXPECT_NEAR(p[0], 4.0 / 6.0, 1e-15);
  EXPECT_NEAR(p[1], 2.0 / 6.0, 1e-15);

  AdaptiveState even = new_adaptive({3, 1.0});
  for (Code c = 0; c < 8; ++c) {
    for (int i = 0; i < 5; ++i) observe(even, c);
  }
  EXPECT_EQ(estimate_pmf(even), Pmf::uniform(3));
}

TEST(MaybeRebuild, WaitsForFullWindow) {
  AdaptiveState s = new_adaptive({2, 1.0});
  const std::size_t w = s.params.resolved_window(2);
  EXPECT_EQ(w, 4096u);
  for (std::size_t i = 0; i + 1 < w; ++i) observe(s, 3);
  const AdaptiveState before = s;
  EXPECT_FALSE(maybe_rebuild(s).has_value());
  EXPECT_EQ(s, before);
  observe(s, 3);
  const auto event = maybe_rebuild(s);
  ASSERT_TRUE(event.has_value());
  EXPECT_EQ(event->generation, 1u);
  EXPECT_EQ(event->sample_index, w - 1);
  EXPECT_EQ(s.generation, 1u);
}

TEST(MaybeRebuild, DefaultWindowScalesWithResolution) {
  EXPECT_EQ(AdaptiveConfig{}.resolved_window(8), 4096u);
  EXPECT_EQ(AdaptiveConfig{}.resolved_window(10), 16384u);
  EXPECT_EQ((AdaptiveConfig{100, 0.02}).resolved_window(10), 100u);
}

TEST(MaybeRebuild, LearnsTwoBitDistribution) {
  const AdcConfig cfg{2, 1.0};
  const auto xs = generate(SignalSpec::from_pmf(kTwoBitPmf, 2024), 10000, cfg);
  AdaptiveState s = new_adaptive(cfg);
  const AdaptiveRun run = run_adaptive(xs, s);
  ASSERT_FALSE(run.log.empty());
  EXPECT_NEAR(expected_length(s.active_tree, kTwoBitPmf), 1.75, 0.05);
  EXPECT_TRUE(validate_tree(s.active_tree).ok());
}

TEST(MaybeRebuild, NoChurnOnIdenticalWindows) {
  AdaptiveState s = new_adaptive({3, 1.0}, {64, 0.02});
  int rebuilds = 0;
  for (int window = 0; window < 2; ++window) {
    for (int i = 0; i < 64; ++i) {
      observe(s, static_cast<Code>(i % 5));
      if (maybe_rebuild(s)) ++rebuilds;
    }
  }
  EXPECT_EQ(rebuilds, 1);
  EXPECT_EQ(s.generation, 1u);
  // Without a rebuild the cumulative histogram keeps growing.
  EXPECT_EQ(s.samples_seen, 128u);
}

TEST(MaybeRebuild, ChangedWindowResetsCumulativeHistogram) {
  AdaptiveState s = new_adaptive({3, 1.0}, {64, 0.02});
  for (int i = 0; i < 64; ++i) observe(s, 0);
  ASSERT_TRUE(maybe_rebuild(s));
  for (int i = 0; i < 64; ++i) observe(s, 7);
  const auto event = maybe_rebuild(s);
  ASSERT_TRUE(event);
  EXPECT_EQ(event->generation, 2u);
  EXPECT_DOUBLE_EQ(event->window_l1, 2.0);
  EXPECT_EQ(s.counts[0], 0u);
  EXPECT_EQ(s.counts[7], 64u);
  EXPECT_EQ(s.samples_seen, 64u);
  EXPECT_EQ(tree_depths(s.active_tree)[7], 1);
}

TEST(RunAdaptive, NeverChangesOutputCodes) {
  const AdcConfig cfg{7, 0.5};
  auto xs = generate(SignalSpec::mixture({10, 30}, {0.1, 0.9}, 3), 20000, cfg);
  const auto more = generate(SignalSpec::gaussian(6, 4), 20000, cfg);
  xs.insert(xs.end(), more.begin(), more.end());
  AdaptiveState s = new_adaptive(cfg);
  const AdaptiveRun run = run_adaptive(xs, s);
  ASSERT_EQ(run.codes.size(), xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) ASSERT_EQ(run.codes[i], quantize(xs[i], cfg));
  EXPECT_GE(run.log.size(), 2u);
}

TEST(RunAdaptive, EachConversionUsesOneGeneration) {
  const AdcConfig cfg{6, 1.0};
  const auto xs = generate(SignalSpec::gaussian(15, 8), 30000, cfg);
  AdaptiveState s = new_adaptive(cfg);
  const AdaptiveRun run = run_adaptive(xs, s);
  std::size_t next_event = 0;
  std::uint64_t gen = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ASSERT_EQ(run.generation_used[i], gen) << i;
    if (next_event < run.log.size() && run.log[next_event].sample_index == i) {
      ++gen;
      EXPECT_EQ(run.log[next_event].generation, gen);
      ++next_event;
    }
  }
  EXPECT_EQ(gen, s.generation);
}

TEST(RunAdaptive, WindowedAverageDoesNotRiseAfterFirstRebuild) {
  const AdcConfig cfg{8, 1.0};
  const auto xs = generate(SignalSpec::gaussian(20, 99), 40960, cfg);
  AdaptiveState s = new_adaptive(cfg);
  const AdaptiveRun run = run_adaptive(xs, s);
  const std::size_t w = s.params.resolved_window(8);
  const std::span<const int> cycles(run.cycles);
  std::vector<double> mean, se;
  for (std::size_t start = 0; start + w <= cycles.size(); start += w) {
    const auto block = cycles.subspan(start, w);
    const double m = mean_cycles(block);
    double var = 0.0;
    for (int c : block) var += (c - m) * (c - m);
    mean.push_back(m);
    se.push_back(std::sqrt(var / (w - 1) / w));
  }
  ASSERT_GE(mean.size(), 4u);
  EXPECT_EQ(mean[0], 8.0);  // binary tree before any statistics
  EXPECT_LT(mean[1], 8.0);
  for (std::size_t k = 2; k < mean.size(); ++k) {
    const double tolerance = 2.0 * std::hypot(se[k], se[k - 1]);
    EXPECT_LE(mean[k], mean[k - 1] + tolerance) << "window " << k;
  }
}

TEST(RunAdaptive, UniformStreamKeepsFixedDepth) {
  const AdcConfig cfg{4, 1.0};
  const auto xs = generate(SignalSpec::uniform(17), 20000, cfg);
  AdaptiveState s = new_adaptive(cfg);
  const AdaptiveRun run = run_adaptive(xs, s);
  ASSERT_FALSE(run.log.empty());
  for (int c : run.cycles) ASSERT_EQ(c, 4);
}

TEST(RebuildLog, LineFormat) {
  std::ostringstream out;
  const std::vector<RebuildEvent> log{{4095, 1, 0.25, 1.75}, {8191, 2, 0.03125, 1.8}};
  write_rebuild_log(out, log);
  EXPECT_EQ(out.str(),
            "rebuild at sample 4095, generation 1, window L1 0.25, expected length 1.75\n"
            "rebuild at sample 8191, generation 2, window L1 0.03125, expected length 1.8\n");
}

TEST(WindowedAverages, Blocks) {
  const std::vector<int> c{1, 3, 2, 2, 5};
  EXPECT_EQ(windowed_averages(c, 2), (std::vector<double>{2.0, 2.0, 5.0}));
  EXPECT_THROW(windowed_averages(c, 0), Error);
}
