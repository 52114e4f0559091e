#include <gtest/gtest.h>

#include <sstream>

#include "replay.hpp"
#include "sptucker/errors.hpp"
#include "sptucker/schemes.hpp"
#include "test_support.hpp"

using namespace sptucker;
using fixtures::recount;
using fixtures::replay_lite;

namespace {

std::vector<std::size_t> sorted_loads(const Policy& p) {
  auto l = p.loads();
  std::sort(l.begin(), l.end());
  return l;
}

}  // namespace

TEST(Lite, TenSliceStageOneStopsAfterSevenSlices) {
  const auto t = fixtures::ten_slice_tensor();
  LiteTrace trace;
  lite_distribute(t, 0, 5, &trace);
  EXPECT_EQ(trace.limit, 20u);
  ASSERT_EQ(trace.stage1.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(trace.stage1[i].slice_size, 5u);
    EXPECT_EQ(trace.stage1[i].rank, static_cast<int>(i % 5));
  }
  // The eighth slice (18 elements) would push rank 2 from 5 to 23.
  EXPECT_TRUE(trace.entered_stage2);
  EXPECT_EQ(trace.sorted_slices[7], 7);
}

TEST(Lite, TenSliceStageTwoOutcome) {
  const auto t = fixtures::ten_slice_tensor();
  LiteTrace trace;
  const Policy p = lite_distribute(t, 0, 5, &trace);
  for (auto l : p.loads()) EXPECT_EQ(l, 20u);
  ASSERT_EQ(trace.stage2_slices, (std::vector<Index>{7, 8, 9}));
  EXPECT_EQ(trace.stage2_sharers[0], (std::vector<int>{0, 1}));
  EXPECT_EQ(trace.stage2_sharers[1], (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(trace.stage2_sharers[2], (std::vector<int>{3, 4}));

  const auto rc = recount(t, p.assignment, 0, 5);
  EXPECT_EQ(rc.e_max, 20);
  EXPECT_EQ(rc.r_sum, 14);
  EXPECT_EQ(rc.r_max, 4);
  EXPECT_EQ(p.assignment, replay_lite(t, 0, 5));
}

TEST(Lite, SingleRankTakesEverything) {
  const auto t = fixtures::random_tensor({6, 5, 4}, 50, 3);
  const Policy p = lite_distribute(t, 1, 1);
  for (int r : p.assignment) EXPECT_EQ(r, 0);
  const auto rc = recount(t, p.assignment, 1, 1);
  EXPECT_EQ(rc.e_max, static_cast<long long>(t.nnz()));
  EXPECT_EQ(rc.r_sum, rc.nonempty);
}

TEST(Lite, MoreRanksThanElements) {
  const auto t = fixtures::random_tensor({3, 3}, 4, 9);
  const Policy p = lite_distribute(t, 0, 10);
  for (auto l : p.loads()) EXPECT_LE(l, 1u);
}

TEST(Lite, MatchesPseudocodeReplay) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto t = seed % 2 ? fixtures::zipf_tensor({30, 20, 15}, 400, 1.3, seed)
                            : fixtures::random_tensor({12, 10, 8}, 300, seed);
    const int P = 2 + static_cast<int>(seed % 13);
    for (std::size_t n = 0; n < 3; ++n) {
      EXPECT_EQ(lite_distribute(t, n, P).assignment, replay_lite(t, n, P)) << "seed " << seed << " mode " << n;
    }
  }
}

TEST(Lite, StageOneReceiverIsLeastLoaded) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto t = fixtures::zipf_tensor({40, 25, 10}, 500, 1.1, seed);
    for (std::size_t n = 0; n < 3; ++n) {
      LiteTrace trace;
      lite_distribute(t, n, 3 + static_cast<int>(seed % 20), &trace);
      for (const auto& step : trace.stage1) EXPECT_EQ(step.load_before, step.min_load_before);
    }
  }
}

TEST(Lite, StageTwoSlicesAreNeverWhole) {
  int entered = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto t = fixtures::zipf_tensor({40, 25, 10}, 500, 1.4, seed);
    for (std::size_t n = 0; n < 3; ++n) {
      LiteTrace trace;
      lite_distribute(t, n, 4 + static_cast<int>(seed % 16), &trace);
      if (!trace.entered_stage2) continue;
      ++entered;
      for (const auto& s : trace.stage2_sharers) EXPECT_GE(s.size(), 2u);
    }
  }
  EXPECT_GT(entered, 0);
}

TEST(Lite, BoundsOnSkewedInstances) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto t = fixtures::zipf_tensor({50, 30, 20, 6}, 800, 1.2, seed);
    const int P = 2 + static_cast<int>(seed % 40);
    for (std::size_t n = 0; n < t.order(); ++n) {
      const auto rc = recount(t, lite_distribute(t, n, P).assignment, n, P);
      const long long nnz = static_cast<long long>(t.nnz());
      EXPECT_LE(rc.e_max, (nnz + P - 1) / P);
      EXPECT_LE(rc.r_sum, rc.nonempty + P);
      EXPECT_LE(rc.r_max, (rc.nonempty + P - 1) / P + 2);
    }
  }
}

TEST(Coarse, SingleRankMatchesLite) {
  const auto t = fixtures::random_tensor({6, 5, 4}, 50, 4);
  EXPECT_EQ(coarse_distribute(t, 0, 1, 42).assignment, lite_distribute(t, 0, 1).assignment);
}

TEST(Coarse, ThreeSliceEachRankOneWholeSlice) {
  const auto t = fixtures::three_slice_tensor();
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Policy p = coarse_distribute(t, 0, 3, seed);
    EXPECT_EQ(sorted_loads(p), (std::vector<std::size_t>{2, 3, 3}));
    const auto rc = recount(t, p.assignment, 0, 3);
    EXPECT_EQ(rc.r_sum, 3);
    EXPECT_EQ(rc.r_max, 1);
  }
}

TEST(Coarse, NeverSplitsASlice) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto t = fixtures::zipf_tensor({30, 20, 10}, 400, 1.0, seed);
    for (auto variant : {CoarseVariant::kContiguousBlocks, CoarseVariant::kBestFit}) {
      for (std::size_t n = 0; n < 3; ++n) {
        const int P = 2 + static_cast<int>(seed % 10);
        const auto rc = recount(t, coarse_distribute(t, n, P, seed, variant).assignment, n, P);
        EXPECT_EQ(rc.r_sum, rc.nonempty);
      }
    }
  }
}

TEST(Coarse, DominantSliceForcesImbalance) {
  const auto t = fixtures::dominant_slice_tensor(400, 20, 5);
  for (int P : {4, 8, 16}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto loads = coarse_distribute(t, 0, P, seed).loads();
      EXPECT_GE(*std::max_element(loads.begin(), loads.end()), t.nnz() / 2);
    }
  }
}

TEST(Coarse, DeterministicPerSeed) {
  const auto t = fixtures::random_tensor({20, 10, 10}, 300, 8);
  EXPECT_EQ(coarse_distribute(t, 0, 7, 99).assignment, coarse_distribute(t, 0, 7, 99).assignment);
  EXPECT_NE(coarse_distribute(t, 0, 7, 99).assignment, coarse_distribute(t, 0, 7, 100).assignment);
}

TEST(Grid, LongModeTakesAllFactors) {
  const std::vector<Index> dims = {1000, 10, 10};
  EXPECT_EQ(grid_factorize(16, dims).q, (std::vector<int>{16, 1, 1}));
}

TEST(Grid, GreedyIsOptimalForMaxRatio) {
  // Exhaustive search over ordered factorizations of 16 into three parts.
  const std::vector<Index> dims = {1000, 10, 10};
  double best = 1e300;
  for (int a = 1; a <= 16; ++a) {
    for (int b = 1; a * b <= 16; ++b) {
      if (16 % (a * b)) continue;
      const int c = 16 / (a * b);
      best = std::min(best, std::max({1000.0 / a, 10.0 / b, 10.0 / c}));
    }
  }
  const auto q = grid_factorize(16, dims).q;
  EXPECT_DOUBLE_EQ(std::max({1000.0 / q[0], 10.0 / q[1], 10.0 / q[2]}), best);
}

TEST(Grid, ProportionalDimsGiveFourByTwoByTwo) {
  const std::vector<Index> dims = {40, 20, 20};
  const auto g = grid_factorize(16, dims);
  EXPECT_EQ(g.q, (std::vector<int>{4, 2, 2}));
  EXPECT_EQ(g.to_string(), "4x2x2");
}

TEST(Grid, SingleRankAndProducts) {
  const std::vector<Index> dims = {7, 9, 11, 3};
  EXPECT_EQ(grid_factorize(1, dims).q, (std::vector<int>{1, 1, 1, 1}));
  for (int P = 1; P <= 64; ++P) EXPECT_EQ(grid_factorize(P, dims).product(), P);
}

TEST(Medium, SingleRank) {
  const auto t = fixtures::random_tensor({6, 5, 4}, 50, 2);
  const auto s = medium_distribute(t, 1, 42);
  ASSERT_TRUE(s.uni_policy());
  for (int r : s.policies.front().assignment) EXPECT_EQ(r, 0);
}

TEST(Medium, SlicesSharedByAtMostPOverQ) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = fixtures::random_tensor({40, 20, 20}, 2000, seed);
    const int P = 16;
    const auto s = medium_distribute(t, P, seed);
    ASSERT_TRUE(s.grid);
    EXPECT_EQ(s.grid->to_string(), "4x2x2");
    for (std::size_t n = 0; n < 3; ++n) {
      const auto rc = recount(t, s.policies.front().assignment, n, P);
      for (const auto& [l, sh] : rc.sharers) EXPECT_LE(static_cast<int>(sh.size()), P / s.grid->q[n]);
    }
  }
}

TEST(Schemes, ParseKindAndExternalNeedsFile) {
  EXPECT_EQ(parse_scheme_kind("lite"), SchemeKind::kLite);
  EXPECT_EQ(parse_scheme_kind("medium"), SchemeKind::kMedium);
  EXPECT_THROW(parse_scheme_kind("fine"), ConfigError);
  const auto t = fixtures::random_tensor({4, 4}, 6, 1);
  EXPECT_THROW(build_scheme(SchemeKind::kExternal, t, 2, 0), ConfigError);
  EXPECT_THROW(build_scheme(SchemeKind::kLite, t, 0, 0), ConfigError);
}

TEST(PolicyFile, RoundTripMultiPolicy) {
  const auto t = fixtures::zipf_tensor({20, 15, 10}, 200, 1.0, 4);
  const auto s = lite_scheme(t, 6);
  std::stringstream buf;
  write_policy(buf, s);
  const auto back = load_external_policy(buf, t, 6);
  ASSERT_EQ(back.policies.size(), s.policies.size());
  for (std::size_t n = 0; n < s.policies.size(); ++n) EXPECT_EQ(back.policies[n].assignment, s.policies[n].assignment);
  std::stringstream again;
  write_policy(again, back);
  std::stringstream first;
  write_policy(first, s);
  EXPECT_EQ(again.str().substr(again.str().find('\n')), first.str().substr(first.str().find('\n')));
}

TEST(PolicyFile, ZerosAndErrors) {
  const auto t = fixtures::random_tensor({4, 4}, 5, 2);
  std::stringstream zeros("0\n0\n0\n0\n0\n");
  const auto s = load_external_policy(zeros, t, 3);
  ASSERT_TRUE(s.uni_policy());
  for (int r : s.policies.front().assignment) EXPECT_EQ(r, 0);

  std::stringstream short_file("0\n0\n0\n0\n");
  EXPECT_THROW(load_external_policy(short_file, t, 3), DomainError);
  std::stringstream bad_rank("0\n0\n3\n0\n0\n");
  EXPECT_THROW(load_external_policy(bad_rank, t, 3), DomainError);
  std::stringstream out_of_order("0 0\n2 0\n");
  EXPECT_THROW(load_external_policy(out_of_order, t, 3), ParseError);
  std::stringstream junk("0\nx\n");
  EXPECT_THROW(load_external_policy(junk, t, 3), ParseError);
}
