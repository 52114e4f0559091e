#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "sptucker/tensor.hpp"

namespace sptucker {

/// Traffic categories charged to the ledger. Collective all-reduces are not
/// charged: they cost the same under every distribution scheme.
enum class Component : int { kSvdX = 0, kSvdY = 1, kFactorTransfer = 2, kCoreTransfer = 3 };
inline constexpr std::size_t kComponentCount = 4;

std::string_view to_string(Component c);

struct ModeTraffic {
  std::int64_t x_queries = 0;
  std::int64_t y_queries = 0;
  std::array<std::int64_t, kComponentCount> units{};
  std::vector<std::array<std::int64_t, kComponentCount>> sent_by_rank;

  std::int64_t queries() const noexcept { return x_queries + y_queries; }
  std::int64_t operator[](Component c) const { return units[static_cast<std::size_t>(c)]; }
};

/// Point-to-point volume counters (scalar units) per mode and component.
class MessageLedger {
 public:
  MessageLedger() = default;
  MessageLedger(std::size_t modes, int ranks);

  void record_query(std::size_t mode, bool x_side);
  void record_send(std::size_t mode, Component c, int from, int to, std::int64_t units);

  std::size_t modes() const noexcept { return modes_.size(); }
  int ranks() const noexcept { return ranks_; }
  const ModeTraffic& mode(std::size_t n) const { return modes_.at(n); }
  std::int64_t total(Component c) const;

 private:
  int ranks_ = 0;
  std::vector<ModeTraffic> modes_;
};

/// Runs one work unit per simulated rank, serially or over a small thread
/// pool. Returning from for_each_rank is the barrier.
class RankExecutor {
 public:
  explicit RankExecutor(int threads = 1) : threads_(threads < 1 ? 1 : threads) {}

  int threads() const noexcept { return threads_; }
  void for_each_rank(int ranks, const std::function<void(int)>& work) const;

 private:
  int threads_;
};

/// Batched message: `slots` names what each value is for (a slice index or a
/// factor row); only `values` count as communicated units.
struct IndexedValues {
  std::vector<Index> slots;
  std::vector<double> values;
};

/// One communication round. Rank p writes only into its own outboxes before
/// the barrier; afterwards every rank reads its inbox in ascending source
/// order, which keeps accumulation order fixed.
class Exchange {
 public:
  explicit Exchange(int ranks);

  IndexedValues& outbox(int from, int to) { return boxes_[index(from, to)]; }
  const IndexedValues& message(int from, int to) const { return boxes_[index(from, to)]; }

  /// Charges every nonempty message to the ledger.
  void settle(MessageLedger& ledger, std::size_t mode, Component component) const;

  template <class F>
  void for_each_incoming(int to, F&& f) const {
    for (int from = 0; from < ranks_; ++from) {
      const auto& m = boxes_[index(from, to)];
      if (!m.values.empty() || !m.slots.empty()) f(from, m);
    }
  }

 private:
  std::size_t index(int from, int to) const {
    return static_cast<std::size_t>(from) * static_cast<std::size_t>(ranks_) + static_cast<std::size_t>(to);
  }

  int ranks_;
  std::vector<IndexedValues> boxes_;
};

}  // namespace sptucker
