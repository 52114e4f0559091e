#include "sptucker/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "sptucker/errors.hpp"
#include "sptucker/rng.hpp"

namespace sptucker {

std::ptrdiff_t LocalPenultimate::local_row(Index slice) const {
  auto it = std::lower_bound(row_slice_ids.begin(), row_slice_ids.end(), slice);
  if (it == row_slice_ids.end() || *it != slice) return -1;
  return it - row_slice_ids.begin();
}

FactorCache::FactorCache(Index rows, Index cols)
    : rows_(rows),
      cols_(cols),
      data_(static_cast<std::size_t>(rows * cols), 0.0),
      present_(static_cast<std::size_t>(rows), 0) {}

FactorCache FactorCache::replicate(const Eigen::MatrixXd& factor) {
  FactorCache c(factor.rows(), factor.cols());
  std::vector<double> row(static_cast<std::size_t>(factor.cols()));
  for (Index l = 0; l < factor.rows(); ++l) {
    for (Index k = 0; k < factor.cols(); ++k) row[static_cast<std::size_t>(k)] = factor(l, k);
    c.put(l, row);
  }
  return c;
}

std::size_t FactorCache::resident_rows() const {
  return static_cast<std::size_t>(std::count(present_.begin(), present_.end(), 1));
}

void FactorCache::put(Index row, std::span<const double> values) {
  if (static_cast<Index>(values.size()) != cols_) throw ShapeError("factor row length mismatch");
  std::copy(values.begin(), values.end(), data_.begin() + static_cast<std::ptrdiff_t>(row * cols_));
  present_[static_cast<std::size_t>(row)] = 1;
}

RowRef FactorCache::row(Index row) const {
  if (row < 0 || row >= rows_ || !present_[static_cast<std::size_t>(row)]) {
    throw std::logic_error("factor row " + std::to_string(row) + " is not resident at this rank");
  }
  return RowRef{data_.data() + row * cols_, 1, cols_};
}

std::size_t RowOwnership::nonempty_count() const {
  return static_cast<std::size_t>(
      std::count_if(sharers.begin(), sharers.end(), [](const auto& s) { return !s.empty(); }));
}

std::int64_t RowOwnership::rsum() const {
  std::int64_t s = 0;
  for (const auto& v : sharers) s += static_cast<std::int64_t>(v.size());
  return s;
}

namespace {

void check_policy(const SparseTensor& t, const DistributionScheme& scheme, std::size_t mode) {
  if (mode >= t.order()) throw ShapeError("mode out of range");
  const auto& policy = scheme.policy_for_mode(mode);
  if (policy.assignment.size() != t.nnz()) throw ShapeError("policy does not cover every element");
}

std::vector<std::vector<ElementId>> elements_by_rank(const SparseTensor& t, const Policy& policy, int ranks) {
  std::vector<std::vector<ElementId>> out(static_cast<std::size_t>(ranks));
  for (ElementId e = 0; e < t.nnz(); ++e) {
    const int r = policy.assignment[e];
    if (r < 0 || r >= ranks) throw DomainError("element " + std::to_string(e) + " assigned to invalid rank");
    out[static_cast<std::size_t>(r)].push_back(e);
  }
  return out;
}

template <class RowSource>
std::vector<LocalPenultimate> build_impl(const SparseTensor& t, const DistributionScheme& scheme, std::size_t mode,
                                         Index khat, const RankExecutor& exec, RowSource&& row_source) {
  check_policy(t, scheme, mode);
  const int P = scheme.ranks;
  const auto owned = elements_by_rank(t, scheme.policy_for_mode(mode), P);
  std::vector<LocalPenultimate> locals(static_cast<std::size_t>(P));

  exec.for_each_rank(P, [&](int p) {
    auto& local = locals[static_cast<std::size_t>(p)];
    local.rank = p;
    local.mode = mode;
    const auto& mine = owned[static_cast<std::size_t>(p)];
    for (ElementId e : mine) local.row_slice_ids.push_back(t.coord(e, mode));
    std::sort(local.row_slice_ids.begin(), local.row_slice_ids.end());
    local.row_slice_ids.erase(std::unique(local.row_slice_ids.begin(), local.row_slice_ids.end()),
                              local.row_slice_ids.end());
    local.rows = RowMajorMatrix::Zero(static_cast<Index>(local.row_slice_ids.size()), khat);

    std::vector<RowRef> rows(t.order() - 1);
    std::vector<double> scratch;
    for (ElementId e : mine) {
      std::size_t k = 0;
      for (std::size_t j = 0; j < t.order(); ++j) {
        if (j != mode) rows[k++] = row_source(p, j, t.coord(e, j));
      }
      const auto r = local.local_row(t.coord(e, mode));
      accumulate_kron(t.value(e), rows, std::span<double>(local.rows.row(r).data(), static_cast<std::size_t>(khat)),
                      scratch);
    }
  });
  return locals;
}

void check_locals(std::span<const LocalPenultimate> locals, const RowOwnership& ownership) {
  if (static_cast<int>(locals.size()) != ownership.ranks) throw ShapeError("one local penultimate per rank expected");
  for (std::size_t p = 0; p < locals.size(); ++p) {
    if (locals[p].rank != static_cast<int>(p)) throw ShapeError("local penultimates must be ordered by rank");
    if (locals[p].mode != ownership.mode) throw ShapeError("local penultimate mode does not match ownership");
  }
}

}  // namespace

std::vector<LocalPenultimate> build_local_penultimates(const SparseTensor& t, const DistributionScheme& scheme,
                                                       std::span<const Eigen::MatrixXd> factors, std::size_t mode,
                                                       const RankExecutor& exec) {
  if (factors.size() != t.order()) throw ShapeError("need one factor per mode");
  for (std::size_t j = 0; j < t.order(); ++j) {
    if (j != mode && factors[j].rows() != t.dim(j)) {
      throw ShapeError("factor " + std::to_string(j + 1) + " has " + std::to_string(factors[j].rows()) +
                       " rows, mode length is " + std::to_string(t.dim(j)));
    }
  }
  return build_impl(t, scheme, mode, kron_length(factors, mode), exec,
                    [&](int, std::size_t j, Index l) { return row_of(factors[j], l); });
}

std::vector<LocalPenultimate> build_local_penultimates(const SparseTensor& t, const DistributionScheme& scheme,
                                                       std::span<const RankFactors> caches, std::size_t mode,
                                                       const RankExecutor& exec) {
  if (static_cast<int>(caches.size()) != scheme.ranks) throw ShapeError("need one factor cache set per rank");
  Index khat = 1;
  for (std::size_t j = 0; j < t.order(); ++j) {
    if (j != mode) khat *= caches.front().at(j).cols();
  }
  return build_impl(t, scheme, mode, khat, exec, [&](int p, std::size_t j, Index l) {
    return caches[static_cast<std::size_t>(p)][j].row(l);
  });
}

RowMajorMatrix expand(const LocalPenultimate& local, Index mode_length) {
  RowMajorMatrix full = RowMajorMatrix::Zero(mode_length, local.rows.cols());
  for (std::size_t i = 0; i < local.row_slice_ids.size(); ++i) {
    full.row(local.row_slice_ids[i]) = local.rows.row(static_cast<Index>(i));
  }
  return full;
}

RowMajorMatrix assemble(std::span<const LocalPenultimate> locals, Index mode_length) {
  if (locals.empty()) throw ShapeError("no local penultimates");
  RowMajorMatrix sum = RowMajorMatrix::Zero(mode_length, locals.front().rows.cols());
  for (const auto& local : locals) {
    for (std::size_t i = 0; i < local.row_slice_ids.size(); ++i) {
      sum.row(local.row_slice_ids[i]) += local.rows.row(static_cast<Index>(i));
    }
  }
  return sum;
}

namespace {

RowOwnership greedy_owners(std::vector<std::vector<int>> sharers, std::size_t mode, int ranks) {
  RowOwnership own;
  own.mode = mode;
  own.ranks = ranks;
  own.sharers = std::move(sharers);
  const auto L = static_cast<Index>(own.sharers.size());
  own.owner.assign(static_cast<std::size_t>(L), 0);
  std::vector<std::int64_t> owned(static_cast<std::size_t>(ranks), 0);
  for (Index l = 0; l < L; ++l) {
    auto& s = own.sharers[static_cast<std::size_t>(l)];
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    if (s.empty()) {
      own.owner[static_cast<std::size_t>(l)] = static_cast<int>(l % ranks);
      continue;
    }
    int best = s.front();
    for (int r : s) {
      if (owned[static_cast<std::size_t>(r)] < owned[static_cast<std::size_t>(best)]) best = r;
    }
    own.owner[static_cast<std::size_t>(l)] = best;
    ++owned[static_cast<std::size_t>(best)];
  }
  return own;
}

}  // namespace

RowOwnership assign_row_owners(std::span<const LocalPenultimate> locals, std::size_t mode, Index mode_length,
                               int ranks) {
  std::vector<std::vector<int>> sharers(static_cast<std::size_t>(mode_length));
  for (const auto& local : locals) {
    if (local.mode != mode) throw ShapeError("local penultimate mode does not match");
    for (Index l : local.row_slice_ids) sharers[static_cast<std::size_t>(l)].push_back(local.rank);
  }
  return greedy_owners(std::move(sharers), mode, ranks);
}

RowOwnership assign_row_owners(const SparseTensor& t, const DistributionScheme& scheme, std::size_t mode) {
  check_policy(t, scheme, mode);
  const auto& policy = scheme.policy_for_mode(mode);
  std::vector<std::vector<int>> sharers(static_cast<std::size_t>(t.dim(mode)));
  for (ElementId e = 0; e < t.nnz(); ++e) {
    sharers[static_cast<std::size_t>(t.coord(e, mode))].push_back(policy.assignment[e]);
  }
  return greedy_owners(std::move(sharers), mode, scheme.ranks);
}

Eigen::VectorXd oracle_matvec_x(std::span<const LocalPenultimate> locals, const RowOwnership& ownership,
                                const Eigen::VectorXd& xin, MessageLedger& ledger, const RankExecutor& exec) {
  check_locals(locals, ownership);
  const int P = ownership.ranks;
  std::vector<Eigen::VectorXd> partial(static_cast<std::size_t>(P));
  Exchange exchange(P);

  exec.for_each_rank(P, [&](int p) {
    const auto& local = locals[static_cast<std::size_t>(p)];
    if (local.rows.cols() != xin.size()) throw ShapeError("x query length does not match penultimate width");
    auto& part = partial[static_cast<std::size_t>(p)];
    part = local.rows * xin;
    for (std::size_t i = 0; i < local.row_slice_ids.size(); ++i) {
      const Index l = local.row_slice_ids[i];
      const int owner = ownership.owner[static_cast<std::size_t>(l)];
      if (owner == p) continue;
      auto& box = exchange.outbox(p, owner);
      box.slots.push_back(l);
      box.values.push_back(part(static_cast<Index>(i)));
    }
  });
  exchange.settle(ledger, ownership.mode, Component::kSvdX);
  ledger.record_query(ownership.mode, true);

  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Index>(ownership.owner.size()));
  exec.for_each_rank(P, [&](int q) {
    const auto& local = locals[static_cast<std::size_t>(q)];
    const auto& part = partial[static_cast<std::size_t>(q)];
    for (std::size_t i = 0; i < local.row_slice_ids.size(); ++i) {
      const Index l = local.row_slice_ids[i];
      if (ownership.owner[static_cast<std::size_t>(l)] == q) out(l) = part(static_cast<Index>(i));
    }
    exchange.for_each_incoming(q, [&](int, const IndexedValues& m) {
      for (std::size_t k = 0; k < m.slots.size(); ++k) out(m.slots[k]) += m.values[k];
    });
  });
  return out;
}

Eigen::VectorXd oracle_matvec_y(std::span<const LocalPenultimate> locals, const RowOwnership& ownership,
                                const Eigen::VectorXd& yin, MessageLedger& ledger, const RankExecutor& exec) {
  check_locals(locals, ownership);
  const int P = ownership.ranks;
  const auto L = static_cast<Index>(ownership.owner.size());
  if (yin.size() != L) throw ShapeError("y query length does not match mode length");
  Exchange exchange(P);

  exec.for_each_rank(P, [&](int q) {
    for (Index l = 0; l < L; ++l) {
      if (ownership.owner[static_cast<std::size_t>(l)] != q) continue;
      for (int s : ownership.sharers[static_cast<std::size_t>(l)]) {
        if (s == q) continue;
        auto& box = exchange.outbox(q, s);
        box.slots.push_back(l);
        box.values.push_back(yin(l));
      }
    }
  });
  exchange.settle(ledger, ownership.mode, Component::kSvdY);
  ledger.record_query(ownership.mode, false);

  std::vector<Eigen::VectorXd> partial(static_cast<std::size_t>(P));
  exec.for_each_rank(P, [&](int p) {
    const auto& local = locals[static_cast<std::size_t>(p)];
    Eigen::VectorXd y_local = Eigen::VectorXd::Zero(static_cast<Index>(local.row_slice_ids.size()));
    for (std::size_t i = 0; i < local.row_slice_ids.size(); ++i) {
      const Index l = local.row_slice_ids[i];
      if (ownership.owner[static_cast<std::size_t>(l)] == p) y_local(static_cast<Index>(i)) = yin(l);
    }
    exchange.for_each_incoming(p, [&](int, const IndexedValues& m) {
      for (std::size_t k = 0; k < m.slots.size(); ++k) {
        const auto r = local.local_row(m.slots[k]);
        if (r < 0) throw std::logic_error("received a y entry for a slice this rank does not share");
        y_local(r) = m.values[k];
      }
    });
    partial[static_cast<std::size_t>(p)] = local.rows.transpose() * y_local;
  });

  Eigen::VectorXd out = Eigen::VectorXd::Zero(locals.front().rows.cols());
  for (const auto& part : partial) out += part;
  return out;
}

std::vector<std::vector<int>> factor_requirements(const SparseTensor& t, const DistributionScheme& scheme,
                                                  std::size_t mode) {
  std::vector<std::vector<int>> req(static_cast<std::size_t>(t.dim(mode)));
  for (ElementId e = 0; e < t.nnz(); ++e) {
    auto& r = req[static_cast<std::size_t>(t.coord(e, mode))];
    if (scheme.uni_policy()) {
      r.push_back(scheme.policies.front().assignment[e]);
      continue;
    }
    for (std::size_t j = 0; j < t.order(); ++j) {
      if (j != mode) r.push_back(scheme.policies[j].assignment[e]);
    }
  }
  for (auto& r : req) {
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
  }
  return req;
}

void transfer_factor_rows(const Eigen::MatrixXd& factor, const RowOwnership& ownership,
                          std::span<const std::vector<int>> requirers, std::span<RankFactors> caches,
                          MessageLedger& ledger) {
  const int P = ownership.ranks;
  const Index L = factor.rows();
  const Index K = factor.cols();
  if (static_cast<Index>(ownership.owner.size()) != L || static_cast<Index>(requirers.size()) != L) {
    throw ShapeError("factor rows do not match the mode length");
  }
  if (static_cast<int>(caches.size()) != P) throw ShapeError("need one factor cache set per rank");

  Exchange exchange(P);
  std::vector<double> row(static_cast<std::size_t>(K));
  for (Index l = 0; l < L; ++l) {
    const int owner = ownership.owner[static_cast<std::size_t>(l)];
    for (int r : requirers[static_cast<std::size_t>(l)]) {
      if (r == owner) continue;
      auto& box = exchange.outbox(owner, r);
      box.slots.push_back(l);
      for (Index k = 0; k < K; ++k) box.values.push_back(factor(l, k));
    }
  }
  exchange.settle(ledger, ownership.mode, Component::kFactorTransfer);

  for (int p = 0; p < P; ++p) {
    FactorCache cache(L, K);
    for (Index l = 0; l < L; ++l) {
      if (ownership.owner[static_cast<std::size_t>(l)] != p) continue;
      for (Index k = 0; k < K; ++k) row[static_cast<std::size_t>(k)] = factor(l, k);
      cache.put(l, row);
    }
    exchange.for_each_incoming(p, [&](int, const IndexedValues& m) {
      for (std::size_t i = 0; i < m.slots.size(); ++i) {
        cache.put(m.slots[i], std::span<const double>(m.values.data() + i * static_cast<std::size_t>(K),
                                                      static_cast<std::size_t>(K)));
      }
    });
    caches[static_cast<std::size_t>(p)].at(ownership.mode) = std::move(cache);
  }
}

double TuckerModel::core_norm_squared() const {
  double s = 0.0;
  for (double v : core) s += v * v;
  return s;
}

std::vector<Eigen::MatrixXd> random_orthonormal_factors(std::span<const Index> dims, std::span<const Index> core,
                                                        std::uint64_t seed) {
  if (dims.size() != core.size()) throw ConfigError("core length count does not match tensor order");
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t n = 0; n < dims.size(); ++n) {
    if (core[n] < 1 || core[n] > dims[n]) {
      throw ConfigError("core length " + std::to_string(core[n]) + " for mode " + std::to_string(n + 1) +
                        " must lie in [1, " + std::to_string(dims[n]) + "]");
    }
    Rng rng(derive_seed(seed, {0xFAC7, n}));
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd g(dims[n], core[n]);
    for (Index c = 0; c < g.cols(); ++c) {
      for (Index r = 0; r < g.rows(); ++r) g(r, c) = gauss(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dims[n], core[n]);
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<double> compute_core(const SparseTensor& t, std::span<const Eigen::MatrixXd> factors) {
  if (factors.size() != t.order()) throw ShapeError("need one factor per mode");
  Index total = 1;
  for (std::size_t j = 0; j < t.order(); ++j) {
    if (factors[j].rows() != t.dim(j)) throw ShapeError("factor rows do not match mode length");
    total *= factors[j].cols();
  }
  std::vector<double> core(static_cast<std::size_t>(total), 0.0);
  std::vector<RowRef> rows(t.order());
  std::vector<double> scratch;
  for (ElementId e = 0; e < t.nnz(); ++e) {
    for (std::size_t j = 0; j < t.order(); ++j) rows[j] = row_of(factors[j], t.coord(e, j));
    accumulate_kron(t.value(e), rows, core, scratch);
  }
  return core;
}

double fit_from_norms(double tensor_norm_sq, double core_norm_sq) {
  if (tensor_norm_sq <= 0.0) return 0.0;
  return std::sqrt(std::max(0.0, tensor_norm_sq - core_norm_sq)) / std::sqrt(tensor_norm_sq);
}

double fit(const SparseTensor& t, const TuckerModel& model) {
  return fit_from_norms(t.norm_squared(), model.core_norm_squared());
}

}  // namespace sptucker
