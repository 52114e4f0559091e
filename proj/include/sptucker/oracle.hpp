#pragma once

// Brute-force dense reference for small tensors. Deliberately independent of
// the engine: no Eigen, no shared kernels beyond the sparse input type.

#include <cstdint>
#include <span>
#include <vector>

#include "sptucker/tensor.hpp"

namespace sptucker::oracle {

struct DenseMatrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<double> values;  // row-major

  DenseMatrix() = default;
  DenseMatrix(std::int64_t r, std::int64_t c) : rows(r), cols(c), values(static_cast<std::size_t>(r * c), 0.0) {}

  static DenseMatrix identity(std::int64_t n);

  double& operator()(std::int64_t r, std::int64_t c) { return values[static_cast<std::size_t>(r * cols + c)]; }
  double operator()(std::int64_t r, std::int64_t c) const { return values[static_cast<std::size_t>(r * cols + c)]; }

  DenseMatrix transpose() const;
  double frobenius() const;
};

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b);

struct DenseTensor {
  std::vector<std::int64_t> dims;
  std::vector<double> values;  // first mode fastest

  DenseTensor() = default;
  explicit DenseTensor(std::vector<std::int64_t> d);

  std::size_t offset(std::span<const std::int64_t> idx) const;
  double& at(std::span<const std::int64_t> idx) { return values[offset(idx)]; }
  double at(std::span<const std::int64_t> idx) const { return values[offset(idx)]; }
  double norm_squared() const;
};

/// Densification cap on prod(dims); 10^7 unless TUCKER_DENSE_CAP is set.
std::int64_t dense_cap();
/// Largest matrix side accepted by dense_svd; 2000 unless TUCKER_DENSE_CAP is set.
std::int64_t svd_side_cap();

DenseTensor densify(const SparseTensor& t);

/// L_n x prod_{j != n} L_j, columns in lexicographic order with the lowest kept mode fastest.
DenseMatrix dense_unfold(const DenseTensor& t, std::size_t mode);
DenseTensor dense_refold(const DenseMatrix& m, std::size_t mode, std::span<const std::int64_t> dims);

/// Mode-n product with A (K x L_n).
DenseTensor dense_ttm(const DenseTensor& t, std::size_t mode, const DenseMatrix& a);

/// T x_j F_j^T over every mode j != skip. Pass skip >= order to include all modes.
DenseTensor dense_ttm_chain(const DenseTensor& t, std::size_t skip, std::span<const DenseMatrix> factors);

struct DenseSvd {
  DenseMatrix u;  // rows x r, orthonormal columns
  std::vector<double> s;  // r = min(rows, cols), non-increasing
  DenseMatrix v;  // cols x r
};

/// One-sided Jacobi. The first nonzero entry of every left vector is positive.
DenseSvd dense_svd(const DenseMatrix& m);

/// Leading k left vectors, completed with standard-basis Gram-Schmidt if k
/// exceeds the available columns.
DenseMatrix leading_left_vectors(const DenseSvd& svd, std::int64_t k);

struct DenseHooiResult {
  std::vector<DenseMatrix> factors;
  DenseTensor core;
  std::vector<double> fit_history;  // one entry per invocation
  std::vector<std::vector<double>> singular_values;  // last invocation, leading K_n per mode
};

DenseHooiResult dense_hooi(const DenseTensor& t, std::span<const std::int64_t> core,
                           std::vector<DenseMatrix> init, int invocations);

double dense_fit(const DenseTensor& t, const DenseTensor& core);

/// Flips each column so its first entry with magnitude above 1e-12 is positive.
void normalize_signs(DenseMatrix& columns);

}  // namespace sptucker::oracle
