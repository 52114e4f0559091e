#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sptucker/tensor.hpp"

namespace sptucker {

enum class SchemeKind { kLite, kCoarse, kMedium, kExternal };

std::string_view to_string(SchemeKind kind);
SchemeKind parse_scheme_kind(std::string_view name);

/// Element -> rank assignment. `mode` is the zero-based mode the policy was
/// built for, or kUniform when one policy serves every mode.
struct Policy {
  static constexpr int kUniform = -1;

  int mode = kUniform;
  int ranks = 1;
  std::vector<int> assignment;

  /// Element count per rank.
  std::vector<std::size_t> loads() const;
};

/// Processor grid q_1 x ... x q_N with product P.
struct GridShape {
  std::vector<int> q;

  long long product() const;
  std::string to_string() const;  // "4x2x2"
};

struct DistributionScheme {
  SchemeKind kind = SchemeKind::kLite;
  int ranks = 1;
  std::uint64_t seed = 0;
  std::vector<Policy> policies;  // one per mode (multi-policy) or exactly one (uni-policy)
  std::optional<GridShape> grid;

  bool uni_policy() const noexcept { return policies.size() == 1; }
  const Policy& policy_for_mode(std::size_t mode) const {
    return uni_policy() ? policies.front() : policies.at(mode);
  }
};

// ---------------------------------------------------------------------------
// Lite

struct LiteStage1Step {
  Index slice = 0;
  std::size_t slice_size = 0;
  int rank = 0;
  std::size_t load_before = 0;      // receiving rank's load before the assignment
  std::size_t min_load_before = 0;  // smallest load over all ranks at that moment
};

/// Record of one Lite run, used to check the stage-1 ordering lemma and the
/// stage-2 sharing property.
struct LiteTrace {
  std::size_t limit = 0;
  std::vector<Index> sorted_slices;
  std::vector<LiteStage1Step> stage1;
  bool entered_stage2 = false;
  std::vector<Index> stage2_slices;
  std::vector<std::vector<int>> stage2_sharers;  // ranks receiving part of each stage-2 slice
};

/// Two-stage Lite policy for one mode. Slices are sorted by (size, index);
/// stage 1 deals them round-robin until one would push its bin past
/// ceil(nnz / P); stage 2 fills bins to that limit, splitting the remaining
/// slices over contiguous ranks in ascending element-id order.
Policy lite_distribute(const SparseTensor& t, std::size_t mode, int ranks, LiteTrace* trace = nullptr);

// ---------------------------------------------------------------------------
// Coarse-G

enum class CoarseVariant {
  kContiguousBlocks,  // random slice order, contiguous blocks by prefix load
  kBestFit,           // random slice order, each slice to the least-loaded rank
};

/// Whole-slice policy: nonempty slices in a seeded random order, cut into
/// contiguous blocks of roughly nnz/P elements each.
Policy coarse_distribute(const SparseTensor& t, std::size_t mode, int ranks, std::uint64_t seed,
                         CoarseVariant variant = CoarseVariant::kContiguousBlocks);

// ---------------------------------------------------------------------------
// Medium-G

/// Splits P into primes and hands each (largest first) to the mode with the
/// largest L_n / q_n; ties go to the lower mode.
GridShape grid_factorize(int ranks, std::span<const Index> dims);

/// Uni-policy grid scheme over independently permuted mode indices.
DistributionScheme medium_distribute(const SparseTensor& t, int ranks, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Scheme construction

DistributionScheme lite_scheme(const SparseTensor& t, int ranks);
DistributionScheme coarse_scheme(const SparseTensor& t, int ranks, std::uint64_t seed,
                                 CoarseVariant variant = CoarseVariant::kContiguousBlocks);

/// Builds lite / coarse / medium schemes. External schemes come from
/// load_external_policy.
DistributionScheme build_scheme(SchemeKind kind, const SparseTensor& t, int ranks, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Policy text files
//
// One line per element: "elemId rank" (zero-based element id in ingestion
// order) or just "rank". Multi-policy files carry a "# mode: n" header (one-
// based n) before each section.

void write_policy(std::ostream& out, const DistributionScheme& scheme);
void write_policy_file(const std::string& path, const DistributionScheme& scheme);

DistributionScheme load_external_policy(std::istream& in, const SparseTensor& t, int ranks);
DistributionScheme load_external_policy_file(const std::string& path, const SparseTensor& t, int ranks);

}  // namespace sptucker
