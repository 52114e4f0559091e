#include "sptucker/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <string>

#include "sptucker/errors.hpp"

namespace sptucker::oracle {

DenseMatrix DenseMatrix::identity(std::int64_t n) {
  DenseMatrix m(n, n);
  for (std::int64_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols, rows);
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

double DenseMatrix::frobenius() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.rows) {
    throw ShapeError("cannot multiply " + std::to_string(a.rows) + "x" + std::to_string(a.cols) + " by " +
                     std::to_string(b.rows) + "x" + std::to_string(b.cols));
  }
  DenseMatrix c(a.rows, b.cols);
  for (std::int64_t i = 0; i < a.rows; ++i) {
    for (std::int64_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::int64_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

DenseTensor::DenseTensor(std::vector<std::int64_t> d) : dims(std::move(d)) {
  std::int64_t total = 1;
  for (auto x : dims) total *= x;
  values.assign(static_cast<std::size_t>(total), 0.0);
}

std::size_t DenseTensor::offset(std::span<const std::int64_t> idx) const {
  std::size_t off = 0;
  std::size_t stride = 1;
  for (std::size_t j = 0; j < dims.size(); ++j) {
    off += static_cast<std::size_t>(idx[j]) * stride;
    stride *= static_cast<std::size_t>(dims[j]);
  }
  return off;
}

double DenseTensor::norm_squared() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return s;
}

namespace {

std::int64_t env_cap() {
  if (const char* s = std::getenv("TUCKER_DENSE_CAP")) {
    char* end = nullptr;
    const long long v = std::strtoll(s, &end, 10);
    if (end != s && *end == '\0' && v > 0) return v;
    throw ConfigError(std::string("TUCKER_DENSE_CAP must be a positive integer, got '") + s + "'");
  }
  return 0;
}

// Advances a first-mode-fastest multi-index; false once it wraps.
bool next_index(std::vector<std::int64_t>& idx, std::span<const std::int64_t> dims) {
  for (std::size_t j = 0; j < dims.size(); ++j) {
    if (++idx[j] < dims[j]) return true;
    idx[j] = 0;
  }
  return false;
}

std::int64_t product(std::span<const std::int64_t> dims) {
  std::int64_t p = 1;
  for (auto d : dims) p *= d;
  return p;
}

// Column of the unfolding for a full index, recomputed from scratch.
std::int64_t column_of(std::span<const std::int64_t> idx, std::span<const std::int64_t> dims, std::size_t mode) {
  std::int64_t col = 0;
  std::int64_t stride = 1;
  for (std::size_t j = 0; j < dims.size(); ++j) {
    if (j == mode) continue;
    col += idx[j] * stride;
    stride *= dims[j];
  }
  return col;
}

void check_cap(std::span<const std::int64_t> dims) {
  const std::int64_t total = product(dims);
  if (total > dense_cap()) {
    throw ConfigError("dense tensor of " + std::to_string(total) + " entries exceeds the cap of " +
                      std::to_string(dense_cap()));
  }
}

}  // namespace

std::int64_t dense_cap() {
  const auto v = env_cap();
  return v > 0 ? v : 10'000'000;
}

std::int64_t svd_side_cap() {
  const auto v = env_cap();
  return v > 0 ? v : 2000;
}

DenseTensor densify(const SparseTensor& t) {
  std::vector<std::int64_t> dims(t.dims().begin(), t.dims().end());
  check_cap(dims);
  DenseTensor d(dims);
  std::vector<std::int64_t> idx(t.order());
  for (ElementId e = 0; e < t.nnz(); ++e) {
    for (std::size_t j = 0; j < t.order(); ++j) idx[j] = t.coord(e, j);
    d.at(idx) += t.value(e);
  }
  return d;
}

DenseMatrix dense_unfold(const DenseTensor& t, std::size_t mode) {
  if (mode >= t.dims.size()) throw ShapeError("mode out of range");
  check_cap(t.dims);
  const std::int64_t L = t.dims[mode];
  DenseMatrix m(L, L == 0 ? 0 : product(t.dims) / L);
  std::vector<std::int64_t> idx(t.dims.size(), 0);
  if (t.values.empty()) return m;
  do {
    m(idx[mode], column_of(idx, t.dims, mode)) = t.at(idx);
  } while (next_index(idx, t.dims));
  return m;
}

DenseTensor dense_refold(const DenseMatrix& m, std::size_t mode, std::span<const std::int64_t> dims) {
  if (mode >= dims.size() || m.rows != dims[mode] || m.rows * m.cols != product(dims)) {
    throw ShapeError("matrix shape does not match the tensor dims");
  }
  DenseTensor t(std::vector<std::int64_t>(dims.begin(), dims.end()));
  std::vector<std::int64_t> idx(dims.size(), 0);
  if (t.values.empty()) return t;
  do {
    t.at(idx) = m(idx[mode], column_of(idx, dims, mode));
  } while (next_index(idx, dims));
  return t;
}

DenseTensor dense_ttm(const DenseTensor& t, std::size_t mode, const DenseMatrix& a) {
  if (mode >= t.dims.size()) throw ShapeError("mode out of range");
  if (a.cols != t.dims[mode]) {
    throw ShapeError("TTM matrix has " + std::to_string(a.cols) + " columns, mode length is " +
                     std::to_string(t.dims[mode]));
  }
  auto dims = t.dims;
  dims[mode] = a.rows;
  return dense_refold(multiply(a, dense_unfold(t, mode)), mode, dims);
}

DenseTensor dense_ttm_chain(const DenseTensor& t, std::size_t skip, std::span<const DenseMatrix> factors) {
  if (factors.size() != t.dims.size()) throw ShapeError("need one factor per mode");
  DenseTensor out = t;
  for (std::size_t j = 0; j < t.dims.size(); ++j) {
    if (j == skip) continue;
    out = dense_ttm(out, j, factors[j].transpose());
  }
  return out;
}

void normalize_signs(DenseMatrix& columns) {
  for (std::int64_t c = 0; c < columns.cols; ++c) {
    for (std::int64_t r = 0; r < columns.rows; ++r) {
      const double v = columns(r, c);
      if (std::abs(v) <= 1e-12) continue;
      if (v < 0) {
        for (std::int64_t k = 0; k < columns.rows; ++k) columns(k, c) = -columns(k, c);
      }
      break;
    }
  }
}

namespace {

using Columns = std::vector<std::vector<double>>;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Adds standard-basis directions orthogonalized against `cols` until it has `want` columns.
void complete_basis(Columns& cols, std::size_t length, std::size_t want) {
  for (std::size_t e = 0; e < length && cols.size() < want; ++e) {
    std::vector<double> x(length, 0.0);
    x[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : cols) {
        const double c = dot(q, x);
        for (std::size_t i = 0; i < length; ++i) x[i] -= c * q[i];
      }
    }
    const double nrm = std::sqrt(dot(x, x));
    if (nrm < 1e-8) continue;
    for (double& v : x) v /= nrm;
    cols.push_back(std::move(x));
  }
}

DenseSvd jacobi_tall(const DenseMatrix& a) {
  const auto m = static_cast<std::size_t>(a.rows);
  const auto n = static_cast<std::size_t>(a.cols);
  Columns w(n, std::vector<double>(m));
  Columns v(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) w[j][i] = a(static_cast<std::int64_t>(i), static_cast<std::int64_t>(j));
    v[j][j] = 1.0;
  }

  constexpr double eps = 2.220446049250313e-16;
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double alpha = dot(w[i], w[i]);
        const double beta = dot(w[j], w[j]);
        const double gamma = dot(w[i], w[j]);
        if (alpha == 0.0 || beta == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t k = 0; k < m; ++k) {
          const double x = w[i][k];
          const double y = w[j][k];
          w[i][k] = c * x - s * y;
          w[j][k] = s * x + c * y;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double x = v[i][k];
          const double y = v[j][k];
          v[i][k] = c * x - s * y;
          v[j][k] = s * x + c * y;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(dot(w[j], w[j]));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });
  const double top = n > 0 ? sigma[order.front()] : 0.0;

  DenseSvd out;
  out.s.resize(n);
  out.v = DenseMatrix(static_cast<std::int64_t>(n), static_cast<std::int64_t>(n));
  Columns left;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t j = order[r];
    out.s[r] = sigma[j];
    for (std::size_t k = 0; k < n; ++k) out.v(static_cast<std::int64_t>(k), static_cast<std::int64_t>(r)) = v[j][k];
    if (sigma[j] > 1e-14 * top && sigma[j] > 0.0) {
      std::vector<double> u = w[j];
      for (double& x : u) x /= sigma[j];
      left.push_back(std::move(u));
    }
  }
  complete_basis(left, m, n);
  out.u = DenseMatrix(static_cast<std::int64_t>(m), static_cast<std::int64_t>(n));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < m; ++k) out.u(static_cast<std::int64_t>(k), static_cast<std::int64_t>(r)) = left[r][k];
  }
  return out;
}

// Sign convention on the left vectors, mirrored on the right ones.
void fix_signs(DenseSvd& svd) {
  for (std::int64_t c = 0; c < svd.u.cols; ++c) {
    for (std::int64_t r = 0; r < svd.u.rows; ++r) {
      const double x = svd.u(r, c);
      if (std::abs(x) <= 1e-12) continue;
      if (x < 0) {
        for (std::int64_t k = 0; k < svd.u.rows; ++k) svd.u(k, c) = -svd.u(k, c);
        for (std::int64_t k = 0; k < svd.v.rows; ++k) svd.v(k, c) = -svd.v(k, c);
      }
      break;
    }
  }
}

}  // namespace

DenseSvd dense_svd(const DenseMatrix& m) {
  const auto cap = svd_side_cap();
  if (m.rows > cap || m.cols > cap) {
    throw ConfigError("matrix " + std::to_string(m.rows) + "x" + std::to_string(m.cols) + " exceeds the SVD cap of " +
                      std::to_string(cap));
  }
  DenseSvd out;
  if (m.rows >= m.cols) {
    out = jacobi_tall(m);
  } else {
    DenseSvd t = jacobi_tall(m.transpose());
    out.s = std::move(t.s);
    out.u = std::move(t.v);
    out.v = std::move(t.u);
  }
  fix_signs(out);
  return out;
}

DenseMatrix leading_left_vectors(const DenseSvd& svd, std::int64_t k) {
  const std::int64_t rows = svd.u.rows;
  if (k > rows) throw ConfigError("cannot take more left vectors than rows");
  Columns cols;
  for (std::int64_t c = 0; c < std::min(k, svd.u.cols); ++c) {
    std::vector<double> x(static_cast<std::size_t>(rows));
    for (std::int64_t r = 0; r < rows; ++r) x[static_cast<std::size_t>(r)] = svd.u(r, c);
    cols.push_back(std::move(x));
  }
  complete_basis(cols, static_cast<std::size_t>(rows), static_cast<std::size_t>(k));
  DenseMatrix out(rows, k);
  for (std::int64_t c = 0; c < k; ++c) {
    for (std::int64_t r = 0; r < rows; ++r) out(r, c) = cols[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)];
  }
  return out;
}

double dense_fit(const DenseTensor& t, const DenseTensor& core) {
  const double tn = t.norm_squared();
  if (tn <= 0.0) return 0.0;
  return std::sqrt(std::max(0.0, tn - core.norm_squared())) / std::sqrt(tn);
}

DenseHooiResult dense_hooi(const DenseTensor& t, std::span<const std::int64_t> core, std::vector<DenseMatrix> init,
                           int invocations) {
  const std::size_t N = t.dims.size();
  if (core.size() != N || init.size() != N) throw ShapeError("need one core length and one factor per mode");
  if (invocations < 1) throw ConfigError("invocation count must be at least 1");
  for (std::size_t n = 0; n < N; ++n) {
    if (init[n].rows != t.dims[n] || init[n].cols != core[n]) throw ShapeError("initial factor shape mismatch");
  }
  DenseHooiResult r;
  r.factors = std::move(init);
  for (int it = 0; it < invocations; ++it) {
    r.singular_values.assign(N, {});
    for (std::size_t n = 0; n < N; ++n) {
      const DenseMatrix z = dense_unfold(dense_ttm_chain(t, n, r.factors), n);
      const DenseSvd svd = dense_svd(z);
      r.factors[n] = leading_left_vectors(svd, core[n]);
      for (std::int64_t k = 0; k < core[n]; ++k) {
        r.singular_values[n].push_back(k < static_cast<std::int64_t>(svd.s.size()) ? svd.s[static_cast<std::size_t>(k)]
                                                                                    : 0.0);
      }
    }
    r.core = dense_ttm_chain(t, N, r.factors);
    r.fit_history.push_back(dense_fit(t, r.core));
  }
  return r;
}

}  // namespace sptucker::oracle
