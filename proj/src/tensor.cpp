#include "sptucker/tensor.hpp"

#include <cmath>
#include <numeric>
#include <unordered_map>

#include "sptucker/errors.hpp"

namespace sptucker {

namespace {

struct CoordHash {
  std::size_t order;
  const std::vector<Index>* coords;

  std::size_t operator()(std::size_t e) const {
    std::size_t h = 1469598103934665603ull;
    for (std::size_t j = 0; j < order; ++j) {
      h ^= static_cast<std::size_t>((*coords)[e * order + j]) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
  }
};

struct CoordEq {
  std::size_t order;
  const std::vector<Index>* coords;

  bool operator()(std::size_t a, std::size_t b) const {
    for (std::size_t j = 0; j < order; ++j) {
      if ((*coords)[a * order + j] != (*coords)[b * order + j]) return false;
    }
    return true;
  }
};

}  // namespace

SparseTensor::SparseTensor(std::vector<Index> dims, const std::vector<Element>& elements)
    : dims_(std::move(dims)) {
  std::vector<Index> flat;
  std::vector<double> values;
  flat.reserve(elements.size() * dims_.size());
  values.reserve(elements.size());
  for (const auto& e : elements) {
    if (e.coords.size() != dims_.size()) {
      throw ShapeError("element has " + std::to_string(e.coords.size()) + " coordinates, tensor order is " +
                       std::to_string(dims_.size()));
    }
    flat.insert(flat.end(), e.coords.begin(), e.coords.end());
    values.push_back(e.value);
  }
  build(std::move(flat), std::move(values));
}

SparseTensor::SparseTensor(std::vector<Index> dims, std::vector<Index> flat_coords, std::vector<double> values)
    : dims_(std::move(dims)) {
  if (flat_coords.size() != values.size() * dims_.size()) {
    throw ShapeError("coordinate array length does not match nnz * order");
  }
  build(std::move(flat_coords), std::move(values));
}

void SparseTensor::build(std::vector<Index> flat, std::vector<double> values) {
  const std::size_t n = dims_.size();
  if (n < 2) throw ShapeError("tensor order must be at least 2");
  for (Index d : dims_) {
    if (d < 1) throw ShapeError("mode lengths must be positive");
  }
  for (std::size_t e = 0; e < values.size(); ++e) {
    if (!std::isfinite(values[e])) {
      throw DomainError("element " + std::to_string(e) + " has a non-finite value");
    }
    for (std::size_t j = 0; j < n; ++j) {
      Index c = flat[e * n + j];
      if (c < 0 || c >= dims_[j]) {
        throw DomainError("element " + std::to_string(e) + " coordinate " + std::to_string(c + 1) +
                          " out of range [1, " + std::to_string(dims_[j]) + "] in mode " + std::to_string(j + 1));
      }
    }
  }

  // Merge duplicates into the first occurrence, keeping ingestion order.
  std::unordered_map<std::size_t, std::size_t, CoordHash, CoordEq> first(
      values.size() * 2 + 1, CoordHash{n, &flat}, CoordEq{n, &flat});
  coords_.reserve(flat.size());
  values_.reserve(values.size());
  for (std::size_t e = 0; e < values.size(); ++e) {
    auto [it, inserted] = first.try_emplace(e, values_.size());
    if (inserted) {
      coords_.insert(coords_.end(), flat.begin() + static_cast<std::ptrdiff_t>(e * n),
                     flat.begin() + static_cast<std::ptrdiff_t>((e + 1) * n));
      values_.push_back(values[e]);
    } else {
      values_[it->second] += values[e];
    }
  }
}

double SparseTensor::norm_squared() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

ModeSlices::ModeSlices(std::size_t mode, Index mode_length, std::vector<Index> slice_ids,
                       std::vector<std::size_t> offsets, std::vector<ElementId> members)
    : mode_(mode),
      mode_length_(mode_length),
      slice_ids_(std::move(slice_ids)),
      offsets_(std::move(offsets)),
      members_(std::move(members)) {}

ModeSlices slices(const SparseTensor& t, std::size_t mode) {
  if (mode >= t.order()) {
    throw ShapeError("mode " + std::to_string(mode + 1) + " out of range for order-" + std::to_string(t.order()) +
                     " tensor");
  }
  const Index len = t.dim(mode);
  std::vector<std::size_t> counts(static_cast<std::size_t>(len) + 1, 0);
  for (ElementId e = 0; e < t.nnz(); ++e) ++counts[static_cast<std::size_t>(t.coord(e, mode)) + 1];
  std::partial_sum(counts.begin(), counts.end(), counts.begin());

  // Counting sort keeps element ids ascending within each slice.
  std::vector<ElementId> sorted(t.nnz());
  std::vector<std::size_t> cursor(counts.begin(), counts.end() - 1);
  for (ElementId e = 0; e < t.nnz(); ++e) sorted[cursor[static_cast<std::size_t>(t.coord(e, mode))]++] = e;

  std::vector<Index> ids;
  std::vector<std::size_t> offsets{0};
  for (Index l = 0; l < len; ++l) {
    auto lo = counts[static_cast<std::size_t>(l)];
    auto hi = counts[static_cast<std::size_t>(l) + 1];
    if (hi > lo) {
      ids.push_back(l);
      offsets.push_back(hi);
    }
  }
  return ModeSlices(mode, len, std::move(ids), std::move(offsets), std::move(sorted));
}

Index unfolding_column(std::span<const Index> coords, std::size_t mode, std::span<const Index> dims) {
  Index column = 0;
  Index stride = 1;
  for (std::size_t j = 0; j < dims.size(); ++j) {
    if (j == mode) continue;
    column += coords[j] * stride;
    stride *= dims[j];
  }
  return column;
}

void accumulate_kron(double value, std::span<const RowRef> rows, std::span<double> out,
                     std::vector<double>& scratch) {
  Index total = 1;
  for (const auto& r : rows) total *= r.length;
  if (static_cast<Index>(out.size()) != total) throw ShapeError("kron output length mismatch");
  if (value == 0.0) return;

  // Build the outer product in place, doubling up from the scaled first row.
  scratch.resize(static_cast<std::size_t>(total));
  scratch[0] = value;
  Index len = 1;
  for (const auto& r : rows) {
    for (Index c = r.length - 1; c >= 0; --c) {
      const double f = r[c];
      double* dst = scratch.data() + c * len;
      for (Index k = len - 1; k >= 0; --k) dst[k] = scratch[static_cast<std::size_t>(k)] * f;
    }
    len *= r.length;
  }
  for (Index k = 0; k < total; ++k) out[static_cast<std::size_t>(k)] += scratch[static_cast<std::size_t>(k)];
}

Index kron_length(std::span<const Eigen::MatrixXd> factors, std::size_t skip_mode) {
  Index len = 1;
  for (std::size_t j = 0; j < factors.size(); ++j) {
    if (j != skip_mode) len *= factors[j].cols();
  }
  return len;
}

Eigen::VectorXd kron_contribution(const Element& e, std::size_t skip_mode,
                                  std::span<const Eigen::MatrixXd> factors) {
  if (e.coords.size() != factors.size()) {
    throw ShapeError("element order " + std::to_string(e.coords.size()) + " does not match " +
                     std::to_string(factors.size()) + " factors");
  }
  if (skip_mode >= factors.size()) throw ShapeError("skip mode out of range");
  std::vector<RowRef> rows;
  for (std::size_t j = 0; j < factors.size(); ++j) {
    if (j == skip_mode) continue;
    if (e.coords[j] < 0 || e.coords[j] >= factors[j].rows()) {
      throw ShapeError("coordinate " + std::to_string(e.coords[j] + 1) + " exceeds factor " + std::to_string(j + 1) +
                       " row count " + std::to_string(factors[j].rows()));
    }
    rows.push_back(row_of(factors[j], e.coords[j]));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(kron_length(factors, skip_mode));
  std::vector<double> scratch;
  accumulate_kron(e.value, rows, std::span<double>(out.data(), static_cast<std::size_t>(out.size())), scratch);
  return out;
}

}  // namespace sptucker
