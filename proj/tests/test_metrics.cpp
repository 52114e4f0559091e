#include <gtest/gtest.h>

#include <sstream>

#include "replay.hpp"
#include "sptucker/engine.hpp"
#include "sptucker/errors.hpp"
#include "sptucker/metrics.hpp"
#include "sptucker/reports.hpp"
#include "test_support.hpp"

using namespace sptucker;

namespace {

const std::vector<Index> kCore2 = {2, 2, 2};

DistributionScheme three_slice_lexicographic() {
  DistributionScheme s;
  s.kind = SchemeKind::kExternal;
  s.ranks = 3;
  s.policies.push_back(Policy{Policy::kUniform, 3, {0, 0, 0, 1, 1, 1, 2, 2}});
  return s;
}

}  // namespace

TEST(Metrics, ThreeSliceLexicographicPolicy) {
  const auto t = fixtures::three_slice_tensor();
  const auto r = compute_metrics(t, three_slice_lexicographic(), kCore2);
  ASSERT_EQ(r.modes.size(), 3u);
  EXPECT_EQ(r.modes[0].e_max, 3);
  EXPECT_EQ(r.modes[0].r_sum, 6);
  EXPECT_EQ(r.modes[0].r_max, 2);
  EXPECT_EQ(r.modes[0].nonempty, 3);
  EXPECT_EQ(r.modes[0].khat, 4);
  EXPECT_EQ(r.modes[0].queries, 8);
  // Three shared slices, one redundant copy each, 8 queries.
  EXPECT_EQ(r.modes[0].svd_volume, 24);
  EXPECT_EQ(r.modes[0].factor_transfer, 6);
  EXPECT_FALSE(r.modes[0].verdicts.has_value());
}

TEST(Metrics, TenSliceLiteValuesAndVerdicts) {
  const auto t = fixtures::ten_slice_tensor();
  const auto r = compute_metrics(t, lite_scheme(t, 5), kCore2);
  const auto& m = r.modes[0];
  EXPECT_EQ(m.e_max, 20);
  EXPECT_EQ(m.r_sum, 14);
  EXPECT_EQ(m.r_max, 4);
  ASSERT_TRUE(m.verdicts.has_value());
  EXPECT_EQ(m.verdicts->e_max_bound, 20);
  EXPECT_EQ(m.verdicts->r_sum_bound, 15);
  EXPECT_EQ(m.verdicts->r_max_bound, 4);
  EXPECT_TRUE(m.verdicts->all());
  EXPECT_TRUE(r.verdicts_hold());
  EXPECT_DOUBLE_EQ(m.e_imbalance, 1.0);
}

TEST(Metrics, SingleRankIsBalanced) {
  const auto t = fixtures::random_tensor({9, 8, 7}, 100, 1);
  for (const auto& s : {lite_scheme(t, 1), coarse_scheme(t, 1, 3), medium_distribute(t, 1, 3)}) {
    const auto r = compute_metrics(t, s, kCore2);
    for (const auto& m : r.modes) {
      EXPECT_EQ(m.e_max, 100);
      EXPECT_EQ(m.r_sum, m.nonempty);
      EXPECT_EQ(m.svd_volume, 0);
      EXPECT_DOUBLE_EQ(m.e_imbalance, 1.0);
      EXPECT_DOUBLE_EQ(m.r_imbalance, 1.0);
    }
  }
}

TEST(Metrics, AgreeWithBruteForceRecount) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = fixtures::zipf_tensor({30, 20, 10}, 400, 1.0 + 0.05 * static_cast<double>(seed % 5), seed);
    const int P = 2 + static_cast<int>(seed % 9);
    for (const auto& s : {lite_scheme(t, P), coarse_scheme(t, P, seed), medium_distribute(t, P, seed)}) {
      const auto r = compute_metrics(t, s, kCore2);
      for (std::size_t n = 0; n < 3; ++n) {
        const auto c = fixtures::recount(t, s.policy_for_mode(n).assignment, n, P);
        EXPECT_EQ(r.modes[n].e_max, c.e_max);
        EXPECT_EQ(r.modes[n].r_sum, c.r_sum);
        EXPECT_EQ(r.modes[n].r_max, c.r_max);
        EXPECT_EQ(r.modes[n].nonempty, c.nonempty);
        EXPECT_EQ(r.modes[n].svd_volume, r.modes[n].queries * (c.r_sum - c.nonempty));
      }
    }
  }
}

TEST(Metrics, LengthBasisUsesModeLength) {
  const auto t = fixtures::random_tensor({40, 5, 5}, 30, 2);
  const auto r = compute_metrics(t, lite_scheme(t, 4), kCore2);
  const auto& m = r.modes[0];
  EXPECT_LT(m.nonempty, 40);
  EXPECT_EQ(m.svd_volume_length_basis, m.queries * (m.r_sum - m.length));
}

TEST(Metrics, CoarsePredictsNoSvdTraffic) {
  const auto t = fixtures::zipf_tensor({50, 30, 20}, 1000, 1.2, 4);
  const auto r = compute_metrics(t, coarse_scheme(t, 8, 4), kCore2);
  for (const auto& m : r.modes) {
    EXPECT_EQ(m.r_sum, m.nonempty);
    EXPECT_EQ(m.svd_volume, 0);
  }
}

TEST(Metrics, FlopCounts) {
  const auto t = fixtures::random_tensor({6, 5, 4}, 50, 3);
  const std::vector<Index> core = {2, 3, 4};
  const auto r = compute_metrics(t, lite_scheme(t, 2), core);
  // Mode 1 keeps (3, 4): prefix products 3 and 12.
  EXPECT_EQ(r.modes[0].ttm_flops, 50 * (3 + 12));
  EXPECT_EQ(r.modes[0].khat, 12);
  EXPECT_EQ(r.modes[0].svd_oracle_flops, r.modes[0].queries * 12 * r.modes[0].r_sum);
}

TEST(Metrics, QueryOverride) {
  const auto t = fixtures::random_tensor({6, 5, 4}, 50, 3);
  const std::vector<std::int64_t> q = {3, 5, 7};
  const auto r = compute_metrics(t, lite_scheme(t, 2), kCore2, q);
  EXPECT_EQ(r.modes[1].queries, 5);
  EXPECT_THROW(compute_metrics(t, lite_scheme(t, 2), std::vector<Index>{2, 2}), ConfigError);
}

TEST(Reconciliation, UniPolicyIsExact) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto t = fixtures::zipf_tensor({30, 25, 20}, 800, 1.1, seed);
    const std::vector<Index> core = {3, 3, 3};
    for (const auto& s : {medium_distribute(t, 8, seed), medium_distribute(t, 6, seed)}) {
      HooiOptions opt;
      opt.core = core;
      opt.invocations = 1;
      DistributedHooi h(t, s, opt, random_orthonormal_factors(t.dims(), core, seed));
      const auto& rec = h.invoke();
      const auto report = compute_metrics(t, s, core);
      const auto rows = predict_vs_measured(report, rec.ledger);
      EXPECT_EQ(rows.size(), 9u);
      EXPECT_TRUE(all_exact(rows));
      for (const auto& row : rows) EXPECT_TRUE(row.predicted.has_value());
    }
  }
}

TEST(Reconciliation, MultiPolicyOmitsTransferPrediction) {
  const auto t = fixtures::zipf_tensor({30, 25, 20}, 800, 1.1, 9);
  const std::vector<Index> core = {3, 3, 3};
  const auto s = lite_scheme(t, 8);
  HooiOptions opt;
  opt.core = core;
  opt.invocations = 1;
  DistributedHooi h(t, s, opt, random_orthonormal_factors(t.dims(), core, 1));
  const auto& rec = h.invoke();
  const auto rows = predict_vs_measured(compute_metrics(t, s, core), rec.ledger);
  for (const auto& row : rows) {
    if (row.component == Component::kFactorTransfer) {
      EXPECT_FALSE(row.predicted.has_value());
    } else {
      EXPECT_TRUE(row.exact().value_or(false));
      // Lite shares at most P extra slice copies per mode.
      EXPECT_LE(row.measured, rec.ledger.mode(row.mode).queries() / 2 * 8);
    }
  }
  EXPECT_TRUE(all_exact(rows));
}

TEST(Reconciliation, RejectsMismatchedLedger) {
  const auto t = fixtures::random_tensor({6, 5, 4}, 50, 3);
  const auto r = compute_metrics(t, lite_scheme(t, 2), kCore2);
  EXPECT_THROW(predict_vs_measured(r, MessageLedger(2, 2)), ShapeError);
  EXPECT_THROW(predict_vs_measured(r, MessageLedger(3, 4)), ShapeError);
}

TEST(Reports, CsvRows) {
  const auto t = fixtures::ten_slice_tensor();
  const auto r = compute_metrics(t, lite_scheme(t, 5), kCore2);
  std::ostringstream out;
  write_csv_header(out);
  write_metrics_csv(out, "tenslice", r);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "tensor,scheme,P,mode,metric,value");
  bool saw_emax = false;
  while (std::getline(in, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5) << line;
    EXPECT_EQ(line.rfind("tenslice,lite,5,", 0), 0u) << line;
    if (line == "tenslice,lite,5,1,e_max,20") saw_emax = true;
  }
  EXPECT_TRUE(saw_emax);
}

TEST(Reports, JsonShape) {
  const auto t = fixtures::ten_slice_tensor();
  const auto r = compute_metrics(t, medium_distribute(t, 4, 1), kCore2);
  const Json j = to_json(r);
  EXPECT_EQ(j["schema_version"], kReportSchemaVersion);
  EXPECT_EQ(j["scheme"], "medium");
  ASSERT_EQ(j["modes"].size(), 3u);
  EXPECT_EQ(j["modes"][0]["mode"], 1);
  EXPECT_EQ(j["modes"][0]["e_max"], r.modes[0].e_max);
  EXPECT_TRUE(j.contains("grid"));
  EXPECT_EQ(to_json(r).dump(), j.dump());
}
