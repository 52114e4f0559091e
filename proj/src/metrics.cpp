#include "sptucker/metrics.hpp"

#include <algorithm>
#include <string>

#include "sptucker/errors.hpp"

namespace sptucker {

bool MetricsReport::verdicts_hold() const {
  return std::all_of(modes.begin(), modes.end(), [](const ModeMetrics& m) { return !m.verdicts || m.verdicts->all(); });
}

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

// Cost of one kron contribution: each stage of the outer-product build touches
// as many entries as the running prefix product.
std::int64_t kron_cost(std::span<const Index> core, std::size_t skip) {
  std::int64_t prefix = 1;
  std::int64_t cost = 0;
  for (std::size_t j = 0; j < core.size(); ++j) {
    if (j == skip) continue;
    prefix *= core[j];
    cost += prefix;
  }
  return cost;
}

}  // namespace

MetricsReport compute_metrics(const SparseTensor& t, const DistributionScheme& scheme, std::span<const Index> core,
                              std::span<const std::int64_t> queries) {
  const std::size_t N = t.order();
  if (core.size() != N) throw ConfigError("core length count does not match tensor order");
  if (!queries.empty() && queries.size() != N) throw ConfigError("query count per mode expected");
  const int P = scheme.ranks;

  MetricsReport r;
  r.scheme = std::string(to_string(scheme.kind));
  r.ranks = P;
  r.seed = scheme.seed;
  r.uni_policy = scheme.uni_policy();
  r.grid = scheme.grid;
  r.nnz = t.nnz();
  r.dims.assign(t.dims().begin(), t.dims().end());
  r.core.assign(core.begin(), core.end());

  const auto nnz = static_cast<std::int64_t>(t.nnz());
  for (std::size_t n = 0; n < N; ++n) {
    const auto& policy = scheme.policy_for_mode(n);
    if (policy.assignment.size() != t.nnz()) throw ShapeError("policy does not cover every element");
    ModeMetrics m;
    m.mode = n;
    m.length = t.dim(n);
    m.core = core[n];
    m.khat = 1;
    for (std::size_t j = 0; j < N; ++j) {
      if (j != n) m.khat *= core[j];
    }
    m.queries = queries.empty() ? 4 * core[n] : queries[n];

    std::vector<std::int64_t> load(static_cast<std::size_t>(P), 0);
    std::vector<std::int64_t> shared(static_cast<std::size_t>(P), 0);
    // Elements of each slice in id order, then distinct ranks per slice.
    const ModeSlices sl = slices(t, n);
    m.nonempty = static_cast<std::int64_t>(sl.nonempty_count());
    std::vector<int> ranks;
    for (std::size_t i = 0; i < sl.nonempty_count(); ++i) {
      ranks.clear();
      for (ElementId e : sl.members(i)) ranks.push_back(policy.assignment[e]);
      std::sort(ranks.begin(), ranks.end());
      ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
      for (int p : ranks) ++shared[static_cast<std::size_t>(p)];
      m.r_sum += static_cast<std::int64_t>(ranks.size());
    }
    for (int a : policy.assignment) ++load[static_cast<std::size_t>(a)];
    m.e_max = *std::max_element(load.begin(), load.end());
    m.r_max = *std::max_element(shared.begin(), shared.end());
    if (nnz > 0) m.e_imbalance = static_cast<double>(m.e_max) * P / static_cast<double>(nnz);
    if (m.r_sum > 0) m.r_imbalance = static_cast<double>(m.r_max) * P / static_cast<double>(m.r_sum);

    const std::int64_t redundancy = m.r_sum - m.nonempty;
    const std::int64_t length_redundancy = m.r_sum - m.length;
    m.svd_volume = m.queries * redundancy;
    m.svd_volume_length_basis = m.queries * length_redundancy;
    if (scheme.uni_policy()) {
      m.factor_transfer = m.core * redundancy;
      m.factor_transfer_length_basis = m.core * length_redundancy;
    }
    m.ttm_flops = nnz * kron_cost(core, n);
    m.svd_oracle_flops = m.queries * m.khat * m.r_sum;

    if (scheme.kind == SchemeKind::kLite) {
      LiteVerdicts v;
      v.e_max_bound = P > 0 ? ceil_div(nnz, P) : 0;
      v.r_sum_bound = m.nonempty + P;
      v.r_max_bound = ceil_div(m.nonempty, P) + 2;
      v.e_max_ok = m.e_max <= v.e_max_bound;
      v.r_sum_ok = m.r_sum <= v.r_sum_bound;
      v.r_max_ok = m.r_max <= v.r_max_bound;
      m.verdicts = v;
    }
    r.modes.push_back(std::move(m));
  }
  return r;
}

std::vector<ReconciliationRow> predict_vs_measured(const MetricsReport& report, const MessageLedger& ledger) {
  if (ledger.modes() != report.modes.size()) {
    throw ShapeError("ledger has " + std::to_string(ledger.modes()) + " modes, report has " +
                     std::to_string(report.modes.size()));
  }
  if (ledger.ranks() != report.ranks) throw ShapeError("ledger and report disagree on the rank count");
  std::vector<ReconciliationRow> rows;
  for (const auto& m : report.modes) {
    const auto& traffic = ledger.mode(m.mode);
    const std::int64_t redundancy = m.r_sum - m.nonempty;
    rows.push_back({m.mode, Component::kSvdX, traffic.x_queries * redundancy, traffic[Component::kSvdX]});
    rows.push_back({m.mode, Component::kSvdY, traffic.y_queries * redundancy, traffic[Component::kSvdY]});
    rows.push_back({m.mode, Component::kFactorTransfer, m.factor_transfer, traffic[Component::kFactorTransfer]});
  }
  return rows;
}

bool all_exact(std::span<const ReconciliationRow> rows) {
  return std::all_of(rows.begin(), rows.end(), [](const ReconciliationRow& r) { return r.exact().value_or(true); });
}

}  // namespace sptucker
