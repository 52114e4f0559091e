#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sptucker/runtime.hpp"
#include "sptucker/schemes.hpp"
#include "sptucker/tensor.hpp"

namespace sptucker {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One rank's share of the mode-n penultimate matrix with empty rows dropped.
struct LocalPenultimate {
  int rank = 0;
  std::size_t mode = 0;
  RowMajorMatrix rows;               // R_n^p x Khat_n
  std::vector<Index> row_slice_ids;  // global slice index of each local row, strictly increasing

  /// Local row holding `slice`, or -1.
  std::ptrdiff_t local_row(Index slice) const;
};

/// Factor-matrix rows resident at one rank: the rows it owns plus the rows it
/// received. Reading an absent row is a logic error.
class FactorCache {
 public:
  FactorCache() = default;
  FactorCache(Index rows, Index cols);

  static FactorCache replicate(const Eigen::MatrixXd& factor);

  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  bool has(Index row) const { return present_[static_cast<std::size_t>(row)] != 0; }
  std::size_t resident_rows() const;

  void put(Index row, std::span<const double> values);
  RowRef row(Index row) const;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<double> data_;
  std::vector<unsigned char> present_;
};

/// Per-rank view of all N factor matrices.
using RankFactors = std::vector<FactorCache>;

/// Row-index mapping sigma_n plus the sharer sets it was chosen from.
struct RowOwnership {
  std::size_t mode = 0;
  int ranks = 1;
  std::vector<int> owner;                 // per slice index; empty slices get the notional owner l mod P
  std::vector<std::vector<int>> sharers;  // ascending; empty for empty slices

  std::size_t nonempty_count() const;
  std::int64_t rsum() const;
  /// Units sent per oracle query: sum over slices of (sharers - 1).
  std::int64_t redundancy() const { return rsum() - static_cast<std::int64_t>(nonempty_count()); }
};

// ---------------------------------------------------------------------------
// Penultimate construction

/// Each rank accumulates kron contributions of its elements (under the mode's
/// policy) into one local row per shared slice. Every rank reads `factors`.
std::vector<LocalPenultimate> build_local_penultimates(const SparseTensor& t, const DistributionScheme& scheme,
                                                       std::span<const Eigen::MatrixXd> factors, std::size_t mode,
                                                       const RankExecutor& exec = RankExecutor{});

/// Same, but rank p may only read rows resident in caches[p].
std::vector<LocalPenultimate> build_local_penultimates(const SparseTensor& t, const DistributionScheme& scheme,
                                                       std::span<const RankFactors> caches, std::size_t mode,
                                                       const RankExecutor& exec = RankExecutor{});

/// Local rows scattered into a full mode_length x Khat matrix.
RowMajorMatrix expand(const LocalPenultimate& local, Index mode_length);

/// Sum of all expanded local copies: the global penultimate matrix.
RowMajorMatrix assemble(std::span<const LocalPenultimate> locals, Index mode_length);

/// Greedy sigma_n: scanning slices in ascending order, each nonempty slice goes
/// to the sharer owning the fewest rows so far (ties to the lowest rank).
RowOwnership assign_row_owners(std::span<const LocalPenultimate> locals, std::size_t mode, Index mode_length,
                               int ranks);

/// Same mapping computed from the scheme's sharing structure alone.
RowOwnership assign_row_owners(const SparseTensor& t, const DistributionScheme& scheme, std::size_t mode);

// ---------------------------------------------------------------------------
// Oracle queries

/// xout = Z * xin. Non-owner sharers send their partial entry to the owner,
/// which accumulates in ascending source order. Entry l of the result is
/// resident at owner(l).
Eigen::VectorXd oracle_matvec_x(std::span<const LocalPenultimate> locals, const RowOwnership& ownership,
                                const Eigen::VectorXd& xin, MessageLedger& ledger,
                                const RankExecutor& exec = RankExecutor{});

/// yout = yin * Z. Owners send yin(l) to the other sharers; partial products
/// are summed by an (uncharged) all-reduce in rank order.
Eigen::VectorXd oracle_matvec_y(std::span<const LocalPenultimate> locals, const RowOwnership& ownership,
                                const Eigen::VectorXd& yin, MessageLedger& ledger,
                                const RankExecutor& exec = RankExecutor{});

// ---------------------------------------------------------------------------
// Lanczos bidiagonalization

enum class LanczosMode {
  kFixed,     // 2K steps (or `steps`), 4K queries
  kConverge,  // continue until the leading K Ritz pairs converge or the Krylov space is exhausted
};

struct LanczosOptions {
  LanczosMode mode = LanczosMode::kFixed;
  int steps = 0;            // fixed-mode step count; 0 means 2K
  double tolerance = 1e-11;  // converge mode: sigma_i * |last right-vector entry| <= tol * sigma_1
  std::uint64_t seed = 0;
};

struct LanczosFlags {
  bool rank_deficient = false;  // fewer than K usable directions; complement columns padded
  int padded_columns = 0;
  int restarts = 0;             // breakdowns recovered with a fresh random vector
  bool exhausted = false;       // Krylov space filled; the projection is exact
};

struct LanczosResult {
  Eigen::MatrixXd factor;           // L_n x K, orthonormal columns; row l materialised at owner(l)
  Eigen::VectorXd singular_values;  // K Ritz values, zero for padded columns
  int steps = 0;
  LanczosFlags flags;
};

/// Golub-Kahan bidiagonalization with full reorthogonalization, driven only
/// through the two oracle queries. Left vectors come from the SVD of the
/// m x (m+1) projected bidiagonal.
LanczosResult lanczos_svd(std::span<const LocalPenultimate> locals, const RowOwnership& ownership, Index rank_k,
                          const LanczosOptions& options, MessageLedger& ledger,
                          const RankExecutor& exec = RankExecutor{});

// ---------------------------------------------------------------------------
// Factor transfer

/// Ranks that need row l of F_n for later TTMs: the slice's sharers for a
/// uni-policy scheme, otherwise every rank owning an element of the slice
/// under some policy j != n.
std::vector<std::vector<int>> factor_requirements(const SparseTensor& t, const DistributionScheme& scheme,
                                                  std::size_t mode);

/// Owners send each new row to the requirers other than themselves. The
/// mode-n entry of every rank's cache is replaced by owned + received rows.
void transfer_factor_rows(const Eigen::MatrixXd& factor, const RowOwnership& ownership,
                          std::span<const std::vector<int>> requirers, std::span<RankFactors> caches,
                          MessageLedger& ledger);

// ---------------------------------------------------------------------------
// Tucker model and HOOI

struct TuckerModel {
  std::vector<Index> core_dims;
  std::vector<double> core;  // first mode fastest
  std::vector<Eigen::MatrixXd> factors;

  double core_norm_squared() const;
};

/// Seeded Gaussian L_n x K_n matrices with orthonormalised columns.
std::vector<Eigen::MatrixXd> random_orthonormal_factors(std::span<const Index> dims, std::span<const Index> core,
                                                        std::uint64_t seed);

/// G = sum_e val(e) * (F_1[l_1,:] (x) ... (x) F_N[l_N,:]), single address space.
std::vector<double> compute_core(const SparseTensor& t, std::span<const Eigen::MatrixXd> factors);

/// sqrt(max(0, |T|^2 - |G|^2)) / |T|; 0 for the zero tensor. Valid for orthonormal factors.
double fit_from_norms(double tensor_norm_sq, double core_norm_sq);
double fit(const SparseTensor& t, const TuckerModel& model);

struct HooiOptions {
  std::vector<Index> core;  // K_n per mode
  int invocations = 5;
  std::uint64_t seed = 42;
  LanczosOptions lanczos;
  bool use_old_factors = false;          // every mode of an invocation sees the factors from its start
  std::optional<double> fit_tolerance;   // stop once |fit change| falls below this
  int threads = 1;
};

struct InvocationRecord {
  MessageLedger ledger;
  std::vector<Eigen::VectorXd> singular_values;  // per mode
  std::vector<int> lanczos_steps;
  std::vector<LanczosFlags> flags;
  double fit = 0.0;  // from the last mode's Ritz values
};

/// HOOI over simulated ranks. Holds each rank's factor-row caches, the row
/// ownership per mode (fixed for the scheme) and one ledger per invocation.
class DistributedHooi {
 public:
  DistributedHooi(const SparseTensor& t, DistributionScheme scheme, HooiOptions options,
                  std::vector<Eigen::MatrixXd> initial_factors);

  /// One pass over all modes. The core is not recomputed.
  const InvocationRecord& invoke();

  /// Invokes up to options.invocations times (stopping early on fit_tolerance)
  /// and then computes the core once.
  const TuckerModel& run();

  /// Moves any missing F_1 rows to mode-1 sharers, then sums per-rank partial cores.
  const TuckerModel& finalize();

  const DistributionScheme& scheme() const noexcept { return scheme_; }
  const HooiOptions& options() const noexcept { return options_; }
  const std::vector<Eigen::MatrixXd>& factors() const noexcept { return factors_; }
  const RowOwnership& ownership(std::size_t mode) const;
  const std::vector<InvocationRecord>& records() const noexcept { return records_; }
  const MessageLedger& core_ledger() const noexcept { return core_ledger_; }
  const std::vector<RankFactors>& caches() const noexcept { return caches_; }
  const TuckerModel& model() const noexcept { return model_; }
  double final_fit() const noexcept { return final_fit_; }
  bool any_numerical_flags() const;

 private:
  const SparseTensor& tensor_;
  DistributionScheme scheme_;
  HooiOptions options_;
  RankExecutor exec_;
  std::vector<Eigen::MatrixXd> factors_;
  std::vector<RankFactors> caches_;
  std::vector<RowOwnership> ownership_;
  std::uint64_t invocation_count_ = 0;
  std::vector<std::vector<std::vector<int>>> requirements_;
  std::vector<InvocationRecord> records_;
  MessageLedger core_ledger_;
  TuckerModel model_;
  double final_fit_ = 0.0;
};

}  // namespace sptucker
