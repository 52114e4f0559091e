#include <algorithm>
#include <cmath>
#include <random>

#include "sptucker/engine.hpp"
#include "sptucker/errors.hpp"
#include "sptucker/rng.hpp"

namespace sptucker {
namespace {

constexpr double kBreakdown = 1e-12;

using Basis = std::vector<Eigen::VectorXd>;

// Two classical Gram-Schmidt passes.
void reorthogonalize(Eigen::VectorXd& x, const Basis& basis) {
  if (basis.empty()) return;
  Eigen::VectorXd coef(static_cast<Index>(basis.size()));
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < basis.size(); ++i) coef(static_cast<Index>(i)) = basis[i].dot(x);
    for (std::size_t i = 0; i < basis.size(); ++i) x -= coef(static_cast<Index>(i)) * basis[i];
  }
}

bool negligible(double a, double scale) { return a <= kBreakdown * std::max(scale, a); }

// Gaussian vector on `support` (all entries when empty), orthogonal to `basis`, unit norm.
// Returns false if no usable direction was found.
bool fresh_direction(Eigen::VectorXd& out, Index length, const std::vector<Index>& support, const Basis& basis,
                     Rng& rng) {
  std::normal_distribution<double> gauss;
  for (int attempt = 0; attempt < 8; ++attempt) {
    out = Eigen::VectorXd::Zero(length);
    if (support.empty()) {
      for (Index i = 0; i < length; ++i) out(i) = gauss(rng);
    } else {
      for (Index i : support) out(i) = gauss(rng);
    }
    const double before = out.norm();
    reorthogonalize(out, basis);
    const double after = out.norm();
    if (after > 1e-8 * before) {
      out /= after;
      return true;
    }
  }
  return false;
}

struct Bidiagonal {
  std::vector<double> alpha;  // alpha_1..alpha_m
  std::vector<double> beta;   // beta_2..beta_{m+1}

  Eigen::MatrixXd plus() const {
    const auto m = static_cast<Index>(alpha.size());
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, m + 1);
    for (Index i = 0; i < m; ++i) {
      b(i, i) = alpha[static_cast<std::size_t>(i)];
      if (static_cast<std::size_t>(i) < beta.size()) b(i, i + 1) = beta[static_cast<std::size_t>(i)];
    }
    return b;
  }
};

bool converged(const Bidiagonal& bd, Index k, double tolerance) {
  const Eigen::MatrixXd b = bd.plus();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (s.size() < k) return false;
  if (s(0) == 0.0) return true;
  const auto last = b.cols() - 1;
  for (Index i = 0; i < k; ++i) {
    if (std::abs(svd.matrixV()(last, i)) > tolerance) return false;
  }
  return true;
}

}  // namespace

LanczosResult lanczos_svd(std::span<const LocalPenultimate> locals, const RowOwnership& ownership, Index rank_k,
                          const LanczosOptions& options, MessageLedger& ledger, const RankExecutor& exec) {
  if (locals.empty()) throw ShapeError("no local penultimates");
  const auto L = static_cast<Index>(ownership.owner.size());
  const Index khat = locals.front().rows.cols();
  if (rank_k < 1 || rank_k > L) throw ConfigError("rank K must lie in [1, L_n]");

  std::vector<Index> support;
  for (Index l = 0; l < L; ++l) {
    if (!ownership.sharers[static_cast<std::size_t>(l)].empty()) support.push_back(l);
  }
  const auto udim = static_cast<std::size_t>(support.size());
  const auto vdim = static_cast<std::size_t>(khat);

  const bool fixed = options.mode == LanczosMode::kFixed;
  const int target = fixed ? (options.steps > 0 ? options.steps : static_cast<int>(2 * rank_k))
                           : static_cast<int>(udim + vdim + 2);

  Rng rng(options.seed);
  LanczosResult result;
  Basis U, V;
  Bidiagonal bd;
  double scale = 0.0;

  Eigen::VectorXd v;
  if (!fresh_direction(v, khat, {}, V, rng)) throw std::logic_error("cannot draw a start vector");
  V.push_back(v);

  int m = 0;
  while (m < target) {
    const std::size_t j = static_cast<std::size_t>(m);

    Eigen::VectorXd p = oracle_matvec_x(locals, ownership, V[j], ledger, exec);
    scale = std::max(scale, p.norm());
    if (j > 0) p -= bd.beta[j - 1] * U[j - 1];
    reorthogonalize(p, U);
    double a = p.norm();
    if (negligible(a, scale)) {
      if (U.size() >= udim || !fresh_direction(p, L, support, U, rng)) {
        result.flags.exhausted = true;
        break;
      }
      a = 0.0;
      ++result.flags.restarts;
    } else {
      p /= a;
    }
    U.push_back(p);
    bd.alpha.push_back(a);

    Eigen::VectorXd r = oracle_matvec_y(locals, ownership, U[j], ledger, exec);
    scale = std::max(scale, r.norm());
    r -= a * V[j];
    reorthogonalize(r, V);
    double b = r.norm();
    m += 1;
    if (negligible(b, scale)) {
      if (V.size() >= vdim || !fresh_direction(r, khat, {}, V, rng)) {
        bd.beta.push_back(0.0);
        result.flags.exhausted = true;
        break;
      }
      b = 0.0;
      ++result.flags.restarts;
    } else {
      r /= b;
    }
    V.push_back(r);
    bd.beta.push_back(b);

    if (!fixed && m >= rank_k && converged(bd, rank_k, options.tolerance)) break;
  }
  result.steps = m;

  const Index k = std::min<Index>(rank_k, m);
  result.factor = Eigen::MatrixXd::Zero(L, rank_k);
  result.singular_values = Eigen::VectorXd::Zero(rank_k);
  if (k > 0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(bd.plus(), Eigen::ComputeFullU);
    const auto& s = svd.singularValues();
    const Eigen::MatrixXd& P = svd.matrixU();
    for (Index c = 0; c < k; ++c) {
      Eigen::VectorXd col = Eigen::VectorXd::Zero(L);
      for (Index i = 0; i < m; ++i) col += P(i, c) * U[static_cast<std::size_t>(i)];
      result.factor.col(c) = col;
      result.singular_values(c) = s(c);
    }
    if (s(0) == 0.0 || (k == rank_k && s(rank_k - 1) <= kBreakdown * s(0))) result.flags.rank_deficient = true;
  }
  if (k < rank_k) {
    result.flags.rank_deficient = true;
    result.flags.padded_columns = static_cast<int>(rank_k - k);
    Basis cols;
    for (Index c = 0; c < k; ++c) cols.push_back(result.factor.col(c));
    for (Index c = k; c < rank_k; ++c) {
      Eigen::VectorXd extra;
      if (!fresh_direction(extra, L, {}, cols, rng)) throw std::logic_error("cannot complete the factor basis");
      result.factor.col(c) = extra;
      cols.push_back(std::move(extra));
    }
  }
  return result;
}

}  // namespace sptucker
