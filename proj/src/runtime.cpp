#include "sptucker/runtime.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>

namespace sptucker {

std::string_view to_string(Component c) {
  switch (c) {
    case Component::kSvdX: return "svd-x";
    case Component::kSvdY: return "svd-y";
    case Component::kFactorTransfer: return "factor-transfer";
    case Component::kCoreTransfer: return "core-transfer";
  }
  return "unknown";
}

MessageLedger::MessageLedger(std::size_t modes, int ranks) : ranks_(ranks), modes_(modes) {
  for (auto& m : modes_) m.sent_by_rank.assign(static_cast<std::size_t>(ranks), {});
}

void MessageLedger::record_query(std::size_t mode, bool x_side) {
  auto& m = modes_.at(mode);
  (x_side ? m.x_queries : m.y_queries) += 1;
}

void MessageLedger::record_send(std::size_t mode, Component c, int from, int /*to*/, std::int64_t units) {
  auto& m = modes_.at(mode);
  m.units[static_cast<std::size_t>(c)] += units;
  m.sent_by_rank.at(static_cast<std::size_t>(from))[static_cast<std::size_t>(c)] += units;
}

std::int64_t MessageLedger::total(Component c) const {
  std::int64_t s = 0;
  for (const auto& m : modes_) s += m[c];
  return s;
}

void RankExecutor::for_each_rank(int ranks, const std::function<void(int)>& work) const {
  const int workers = std::min(threads_, ranks);
  if (workers <= 1) {
    for (int p = 0; p < ranks; ++p) work(p);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int p = w; p < ranks; p += workers) work(p);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

Exchange::Exchange(int ranks)
    : ranks_(ranks), boxes_(static_cast<std::size_t>(ranks) * static_cast<std::size_t>(ranks)) {}

void Exchange::settle(MessageLedger& ledger, std::size_t mode, Component component) const {
  for (int from = 0; from < ranks_; ++from) {
    for (int to = 0; to < ranks_; ++to) {
      const auto& m = boxes_[index(from, to)];
      if (!m.values.empty()) ledger.record_send(mode, component, from, to, static_cast<std::int64_t>(m.values.size()));
    }
  }
}

}  // namespace sptucker
