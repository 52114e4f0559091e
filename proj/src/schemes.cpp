#include "sptucker/schemes.hpp"

#include <algorithm>
#include <numeric>

#include "sptucker/errors.hpp"
#include "sptucker/rng.hpp"

namespace sptucker {

std::string_view to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::kLite: return "lite";
    case SchemeKind::kCoarse: return "coarse";
    case SchemeKind::kMedium: return "medium";
    case SchemeKind::kExternal: return "external";
  }
  return "unknown";
}

SchemeKind parse_scheme_kind(std::string_view name) {
  if (name == "lite") return SchemeKind::kLite;
  if (name == "coarse") return SchemeKind::kCoarse;
  if (name == "medium") return SchemeKind::kMedium;
  if (name == "external") return SchemeKind::kExternal;
  throw ConfigError("unknown scheme '" + std::string(name) + "'");
}

std::vector<std::size_t> Policy::loads() const {
  std::vector<std::size_t> out(static_cast<std::size_t>(ranks), 0);
  for (int r : assignment) ++out[static_cast<std::size_t>(r)];
  return out;
}

long long GridShape::product() const {
  long long p = 1;
  for (int v : q) p *= v;
  return p;
}

std::string GridShape::to_string() const {
  std::string s;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(q[i]);
  }
  return s;
}

namespace {

void check_ranks(int ranks) {
  if (ranks < 1) throw ConfigError("rank count must be at least 1");
}

}  // namespace

Policy lite_distribute(const SparseTensor& t, std::size_t mode, int ranks, LiteTrace* trace) {
  check_ranks(ranks);
  const ModeSlices sl = slices(t, mode);
  const std::size_t nnz = t.nnz();
  const auto P = static_cast<std::size_t>(ranks);
  Policy policy{static_cast<int>(mode), ranks, std::vector<int>(nnz, -1)};

  const std::size_t limit = (nnz + P - 1) / P;
  std::vector<std::size_t> order(sl.nonempty_count());
  std::iota(order.begin(), order.end(), 0);
  // Slice indices ascend with position, so a stable sort on size breaks ties by index.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sl.size_of(a) < sl.size_of(b); });

  if (trace) {
    *trace = LiteTrace{};
    trace->limit = limit;
    for (auto i : order) trace->sorted_slices.push_back(sl.slice_index(i));
  }

  std::vector<std::size_t> load(P, 0);
  std::size_t next = 0;
  std::size_t p = 0;

  // Stage 1: round robin over small slices while they fit.
  for (; next < order.size(); ++next) {
    const std::size_t i = order[next];
    const std::size_t size = sl.size_of(i);
    if (load[p] + size > limit) break;
    if (trace) {
      trace->stage1.push_back(LiteStage1Step{sl.slice_index(i), size, static_cast<int>(p), load[p],
                                             *std::min_element(load.begin(), load.end())});
    }
    for (ElementId e : sl.members(i)) policy.assignment[e] = static_cast<int>(p);
    load[p] += size;
    p = (p + 1) % P;
  }

  // Stage 2: fill bins to the limit, splitting slices over consecutive ranks.
  if (next < order.size()) {
    if (trace) trace->entered_stage2 = true;
    p = 0;
    std::size_t consumed = 0;
    bool fresh = true;
    while (p < P && next < order.size()) {
      const std::size_t i = order[next];
      const auto members = sl.members(i);
      if (trace && fresh) {
        trace->stage2_slices.push_back(sl.slice_index(i));
        trace->stage2_sharers.emplace_back();
      }
      fresh = false;
      const std::size_t remaining = members.size() - consumed;
      const std::size_t gap = limit - load[p];
      const std::size_t take = std::min(remaining, gap);
      for (std::size_t k = consumed; k < consumed + take; ++k) policy.assignment[members[k]] = static_cast<int>(p);
      if (trace && take > 0) trace->stage2_sharers.back().push_back(static_cast<int>(p));
      load[p] += take;
      if (remaining <= gap) {
        ++next;
        consumed = 0;
        fresh = true;
      } else {
        consumed += take;
        ++p;
      }
    }
  }
  return policy;
}

Policy coarse_distribute(const SparseTensor& t, std::size_t mode, int ranks, std::uint64_t seed,
                         CoarseVariant variant) {
  check_ranks(ranks);
  const ModeSlices sl = slices(t, mode);
  const std::size_t nnz = t.nnz();
  const auto P = static_cast<std::uint64_t>(ranks);
  Policy policy{static_cast<int>(mode), ranks, std::vector<int>(nnz, -1)};

  std::vector<std::size_t> order(sl.nonempty_count());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {0xC0A25E, mode}));
  portable_shuffle(order, rng);

  if (variant == CoarseVariant::kContiguousBlocks) {
    // A slice lands in the block containing its midpoint in the prefix-load order.
    std::uint64_t prefix = 0;
    for (std::size_t i : order) {
      const std::uint64_t size = sl.size_of(i);
      const std::uint64_t block = std::min<std::uint64_t>(P - 1, ((2 * prefix + size) * P) / (2 * nnz));
      for (ElementId e : sl.members(i)) policy.assignment[e] = static_cast<int>(block);
      prefix += size;
    }
  } else {
    std::vector<std::size_t> load(P, 0);
    for (std::size_t i : order) {
      const auto target = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
      for (ElementId e : sl.members(i)) policy.assignment[e] = static_cast<int>(target);
      load[target] += sl.size_of(i);
    }
  }
  return policy;
}

GridShape grid_factorize(int ranks, std::span<const Index> dims) {
  check_ranks(ranks);
  std::vector<int> primes;
  int rest = ranks;
  for (int f = 2; static_cast<long long>(f) * f <= rest; ++f) {
    while (rest % f == 0) {
      primes.push_back(f);
      rest /= f;
    }
  }
  if (rest > 1) primes.push_back(rest);
  std::sort(primes.rbegin(), primes.rend());

  GridShape grid{std::vector<int>(dims.size(), 1)};
  for (int prime : primes) {
    std::size_t best = 0;
    for (std::size_t n = 1; n < dims.size(); ++n) {
      // dims[n] / q[n] > dims[best] / q[best], compared exactly.
      if (static_cast<long double>(dims[n]) * grid.q[best] > static_cast<long double>(dims[best]) * grid.q[n]) best = n;
    }
    grid.q[best] *= prime;
  }
  return grid;
}

DistributionScheme medium_distribute(const SparseTensor& t, int ranks, std::uint64_t seed) {
  check_ranks(ranks);
  const std::size_t order = t.order();
  GridShape grid = grid_factorize(ranks, t.dims());

  std::vector<std::vector<Index>> perm(order);
  for (std::size_t n = 0; n < order; ++n) {
    perm[n].resize(static_cast<std::size_t>(t.dim(n)));
    std::iota(perm[n].begin(), perm[n].end(), Index{0});
    Rng rng(derive_seed(seed, {0x3ED1, n}));
    portable_shuffle(perm[n], rng);
  }

  Policy policy{Policy::kUniform, ranks, std::vector<int>(t.nnz(), 0)};
  for (ElementId e = 0; e < t.nnz(); ++e) {
    long long rank = 0;
    long long stride = 1;
    for (std::size_t n = 0; n < order; ++n) {
      const Index permuted = perm[n][static_cast<std::size_t>(t.coord(e, n))];
      const long long block = static_cast<long long>(permuted) * grid.q[n] / t.dim(n);
      rank += block * stride;
      stride *= grid.q[n];
    }
    policy.assignment[e] = static_cast<int>(rank);
  }

  DistributionScheme scheme;
  scheme.kind = SchemeKind::kMedium;
  scheme.ranks = ranks;
  scheme.seed = seed;
  scheme.policies.push_back(std::move(policy));
  scheme.grid = std::move(grid);
  return scheme;
}

DistributionScheme lite_scheme(const SparseTensor& t, int ranks) {
  DistributionScheme scheme;
  scheme.kind = SchemeKind::kLite;
  scheme.ranks = ranks;
  for (std::size_t n = 0; n < t.order(); ++n) scheme.policies.push_back(lite_distribute(t, n, ranks));
  return scheme;
}

DistributionScheme coarse_scheme(const SparseTensor& t, int ranks, std::uint64_t seed, CoarseVariant variant) {
  DistributionScheme scheme;
  scheme.kind = SchemeKind::kCoarse;
  scheme.ranks = ranks;
  scheme.seed = seed;
  for (std::size_t n = 0; n < t.order(); ++n) {
    scheme.policies.push_back(coarse_distribute(t, n, ranks, seed, variant));
  }
  return scheme;
}

DistributionScheme build_scheme(SchemeKind kind, const SparseTensor& t, int ranks, std::uint64_t seed) {
  switch (kind) {
    case SchemeKind::kLite: {
      auto s = lite_scheme(t, ranks);
      s.seed = seed;
      return s;
    }
    case SchemeKind::kCoarse: return coarse_scheme(t, ranks, seed);
    case SchemeKind::kMedium: return medium_distribute(t, ranks, seed);
    case SchemeKind::kExternal: break;
  }
  throw ConfigError("external schemes are loaded from a policy file");
}

}  // namespace sptucker
