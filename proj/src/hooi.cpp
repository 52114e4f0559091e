#include <cmath>
#include <string>

#include "sptucker/engine.hpp"
#include "sptucker/errors.hpp"
#include "sptucker/rng.hpp"

namespace sptucker {

DistributedHooi::DistributedHooi(const SparseTensor& t, DistributionScheme scheme, HooiOptions options,
                                 std::vector<Eigen::MatrixXd> initial_factors)
    : tensor_(t),
      scheme_(std::move(scheme)),
      options_(std::move(options)),
      exec_(options_.threads),
      factors_(std::move(initial_factors)),
      core_ledger_(1, scheme_.ranks) {
  const std::size_t N = t.order();
  if (options_.core.size() != N) {
    throw ConfigError("core has " + std::to_string(options_.core.size()) + " lengths, tensor order is " +
                      std::to_string(N));
  }
  if (options_.invocations < 1) throw ConfigError("invocation count must be at least 1");
  if (scheme_.ranks < 1) throw ConfigError("rank count must be at least 1");
  if (!scheme_.uni_policy() && scheme_.policies.size() != N) throw ConfigError("multi-policy scheme needs N policies");
  for (const auto& policy : scheme_.policies) {
    if (policy.assignment.size() != t.nnz()) throw ShapeError("policy does not cover every element");
  }
  if (factors_.size() != N) throw ShapeError("need one initial factor per mode");
  for (std::size_t n = 0; n < N; ++n) {
    const Index K = options_.core[n];
    if (K < 1 || K > t.dim(n)) {
      throw ConfigError("core length " + std::to_string(K) + " for mode " + std::to_string(n + 1) +
                        " must lie in [1, " + std::to_string(t.dim(n)) + "]");
    }
    if (factors_[n].rows() != t.dim(n) || factors_[n].cols() != K) {
      throw ShapeError("initial factor " + std::to_string(n + 1) + " must be " + std::to_string(t.dim(n)) + "x" +
                       std::to_string(K));
    }
  }

  caches_.resize(static_cast<std::size_t>(scheme_.ranks));
  for (auto& rank : caches_) {
    for (const auto& f : factors_) rank.push_back(FactorCache::replicate(f));
  }
  for (std::size_t n = 0; n < N; ++n) {
    ownership_.push_back(assign_row_owners(t, scheme_, n));
    requirements_.push_back(factor_requirements(t, scheme_, n));
  }
}

const RowOwnership& DistributedHooi::ownership(std::size_t mode) const { return ownership_.at(mode); }

const InvocationRecord& DistributedHooi::invoke() {
  const std::size_t N = tensor_.order();
  InvocationRecord rec;
  rec.ledger = MessageLedger(N, scheme_.ranks);

  std::vector<RankFactors> pending;
  std::vector<Eigen::MatrixXd> pending_factors;
  if (options_.use_old_factors) {
    pending = caches_;
    pending_factors = factors_;
  }
  auto& write_caches = options_.use_old_factors ? pending : caches_;
  auto& write_factors = options_.use_old_factors ? pending_factors : factors_;

  for (std::size_t n = 0; n < N; ++n) {
    const auto locals = build_local_penultimates(tensor_, scheme_, std::span<const RankFactors>(caches_), n, exec_);
    LanczosOptions lo = options_.lanczos;
    lo.seed = derive_seed(options_.seed, {0x1A9C05, invocation_count_, n});
    auto res = lanczos_svd(locals, ownership_[n], options_.core[n], lo, rec.ledger, exec_);
    transfer_factor_rows(res.factor, ownership_[n], requirements_[n], write_caches, rec.ledger);
    write_factors[n] = std::move(res.factor);
    rec.singular_values.push_back(std::move(res.singular_values));
    rec.lanczos_steps.push_back(res.steps);
    rec.flags.push_back(res.flags);
  }
  if (options_.use_old_factors) {
    caches_ = std::move(pending);
    factors_ = std::move(pending_factors);
  }

  rec.fit = fit_from_norms(tensor_.norm_squared(), rec.singular_values.back().squaredNorm());
  ++invocation_count_;
  records_.push_back(std::move(rec));
  return records_.back();
}

const TuckerModel& DistributedHooi::run() {
  for (int i = 0; i < options_.invocations; ++i) {
    invoke();
    if (options_.fit_tolerance && records_.size() >= 2) {
      const double change = std::abs(records_.back().fit - records_[records_.size() - 2].fit);
      if (change < *options_.fit_tolerance) break;
    }
  }
  return finalize();
}

const TuckerModel& DistributedHooi::finalize() {
  const std::size_t N = tensor_.order();
  const int P = scheme_.ranks;
  core_ledger_ = MessageLedger(1, P);

  // Every rank holding an element under the mode-1 policy needs all N factor rows of
  // that element. Rows of modes 2..N are resident by the transfer requirements; F_1
  // rows may be missing at non-owner sharers.
  const auto& own = ownership_.front();
  Exchange exchange(P);
  const Eigen::MatrixXd& f1 = factors_.front();
  for (Index l = 0; l < static_cast<Index>(own.owner.size()); ++l) {
    const int owner = own.owner[static_cast<std::size_t>(l)];
    for (int s : own.sharers[static_cast<std::size_t>(l)]) {
      if (s == owner || caches_[static_cast<std::size_t>(s)][0].has(l)) continue;
      auto& box = exchange.outbox(owner, s);
      box.slots.push_back(l);
      for (Index k = 0; k < f1.cols(); ++k) box.values.push_back(f1(l, k));
    }
  }
  exchange.settle(core_ledger_, 0, Component::kCoreTransfer);
  const auto K1 = static_cast<std::size_t>(f1.cols());
  for (int p = 0; p < P; ++p) {
    exchange.for_each_incoming(p, [&](int, const IndexedValues& m) {
      for (std::size_t i = 0; i < m.slots.size(); ++i) {
        caches_[static_cast<std::size_t>(p)][0].put(m.slots[i],
                                                    std::span<const double>(m.values.data() + i * K1, K1));
      }
    });
  }

  Index total = 1;
  for (Index k : options_.core) total *= k;
  const auto& policy = scheme_.policy_for_mode(0);
  std::vector<std::vector<ElementId>> mine(static_cast<std::size_t>(P));
  for (ElementId e = 0; e < tensor_.nnz(); ++e) mine[static_cast<std::size_t>(policy.assignment[e])].push_back(e);

  std::vector<std::vector<double>> partial(static_cast<std::size_t>(P));
  exec_.for_each_rank(P, [&](int p) {
    auto& core = partial[static_cast<std::size_t>(p)];
    core.assign(static_cast<std::size_t>(total), 0.0);
    std::vector<RowRef> rows(N);
    std::vector<double> scratch;
    for (ElementId e : mine[static_cast<std::size_t>(p)]) {
      for (std::size_t j = 0; j < N; ++j) rows[j] = caches_[static_cast<std::size_t>(p)][j].row(tensor_.coord(e, j));
      accumulate_kron(tensor_.value(e), rows, core, scratch);
    }
  });

  model_ = TuckerModel{};
  model_.core_dims = options_.core;
  model_.core.assign(static_cast<std::size_t>(total), 0.0);
  for (const auto& part : partial) {
    for (std::size_t i = 0; i < part.size(); ++i) model_.core[i] += part[i];
  }
  model_.factors = factors_;
  final_fit_ = fit(tensor_, model_);
  return model_;
}

bool DistributedHooi::any_numerical_flags() const {
  for (const auto& rec : records_) {
    for (const auto& f : rec.flags) {
      if (f.rank_deficient || f.restarts > 0) return true;
    }
  }
  return false;
}

}  // namespace sptucker
