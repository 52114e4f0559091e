#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sptucker/runtime.hpp"
#include "sptucker/schemes.hpp"
#include "sptucker/tensor.hpp"

namespace sptucker {

/// Lite guarantees: E-max <= ceil(nnz/P), R-sum <= nonempty + P,
/// R-max <= ceil(nonempty/P) + 2.
struct LiteVerdicts {
  std::int64_t e_max_bound = 0;
  std::int64_t r_sum_bound = 0;
  std::int64_t r_max_bound = 0;
  bool e_max_ok = false;
  bool r_sum_ok = false;
  bool r_max_ok = false;

  bool all() const noexcept { return e_max_ok && r_sum_ok && r_max_ok; }
};

struct ModeMetrics {
  std::size_t mode = 0;
  Index length = 0;            // L_n
  std::int64_t nonempty = 0;   // nonempty slice count
  std::int64_t e_max = 0;      // max elements per rank
  std::int64_t r_sum = 0;      // total slice sharings
  std::int64_t r_max = 0;      // max shared slices per rank
  double e_imbalance = 1.0;    // e_max / (nnz / P)
  double r_imbalance = 1.0;    // r_max / (r_sum / P)

  Index core = 0;              // K_n
  Index khat = 0;              // product of the other core lengths
  std::int64_t queries = 0;    // Q_n used for the predictions

  // Predicted point-to-point units; the length basis uses L_n in place of the nonempty count.
  std::int64_t svd_volume = 0;
  std::int64_t svd_volume_length_basis = 0;
  std::optional<std::int64_t> factor_transfer;  // uni-policy only
  std::optional<std::int64_t> factor_transfer_length_basis;

  std::int64_t ttm_flops = 0;
  std::int64_t svd_oracle_flops = 0;

  std::optional<LiteVerdicts> verdicts;  // lite schemes only
};

struct MetricsReport {
  std::string scheme;
  int ranks = 1;
  std::uint64_t seed = 0;
  bool uni_policy = true;
  std::optional<GridShape> grid;
  std::size_t nnz = 0;
  std::vector<Index> dims;
  std::vector<Index> core;
  std::vector<ModeMetrics> modes;

  /// True unless some lite verdict failed.
  bool verdicts_hold() const;
};

/// Static metrics of a scheme. `queries` overrides Q_n per mode (default 4 K_n).
MetricsReport compute_metrics(const SparseTensor& t, const DistributionScheme& scheme, std::span<const Index> core,
                              std::span<const std::int64_t> queries = {});

/// One row of the predicted-vs-measured table.
struct ReconciliationRow {
  std::size_t mode = 0;
  Component component = Component::kSvdX;
  std::optional<std::int64_t> predicted;  // absent for multi-policy factor transfer
  std::int64_t measured = 0;

  std::optional<bool> exact() const {
    if (!predicted) return std::nullopt;
    return *predicted == measured;
  }
};

/// svd-x / svd-y rows use the query counts recorded in the ledger.
std::vector<ReconciliationRow> predict_vs_measured(const MetricsReport& report, const MessageLedger& ledger);

/// True when every row carrying a prediction matches it.
bool all_exact(std::span<const ReconciliationRow> rows);

}  // namespace sptucker
