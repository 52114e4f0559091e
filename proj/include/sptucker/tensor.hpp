#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sptucker {

using Index = std::int64_t;
using ElementId = std::size_t;

/// One nonzero. Coordinates are zero-based here; the .tns text format is one-based.
struct Element {
  std::vector<Index> coords;
  double value = 0.0;
};

/// Coordinate-format sparse tensor.
///
/// Elements are stored in ingestion order (the element id is the position) with
/// duplicate coordinates merged by summation into the first occurrence. The
/// object is immutable after construction.
class SparseTensor {
 public:
  SparseTensor() = default;

  /// Validates and merges duplicates. Throws DomainError for out-of-range
  /// coordinates or non-finite values and ShapeError for bad dims.
  SparseTensor(std::vector<Index> dims, const std::vector<Element>& elements);

  /// Same as above with coordinates given as a flat nnz x order array.
  SparseTensor(std::vector<Index> dims, std::vector<Index> flat_coords, std::vector<double> values);

  std::size_t order() const noexcept { return dims_.size(); }
  std::size_t nnz() const noexcept { return values_.size(); }
  std::span<const Index> dims() const noexcept { return dims_; }
  Index dim(std::size_t mode) const { return dims_.at(mode); }

  std::span<const Index> coords(ElementId e) const {
    return {coords_.data() + e * order(), order()};
  }
  Index coord(ElementId e, std::size_t mode) const { return coords_[e * order() + mode]; }
  double value(ElementId e) const { return values_[e]; }
  std::span<const double> values() const noexcept { return values_; }

  double norm_squared() const;

 private:
  void build(std::vector<Index> flat_coords, std::vector<double> values);

  std::vector<Index> dims_;
  std::vector<Index> coords_;
  std::vector<double> values_;
};

/// Mode-n slices in compressed form: nonempty slice indices ascending, each
/// with its member element ids ascending. Empty slices are omitted; the mode
/// length is kept separately.
class ModeSlices {
 public:
  ModeSlices(std::size_t mode, Index mode_length, std::vector<Index> slice_ids,
             std::vector<std::size_t> offsets, std::vector<ElementId> members);

  std::size_t mode() const noexcept { return mode_; }
  Index mode_length() const noexcept { return mode_length_; }
  std::size_t nonempty_count() const noexcept { return slice_ids_.size(); }

  Index slice_index(std::size_t i) const { return slice_ids_[i]; }
  std::span<const Index> slice_indices() const noexcept { return slice_ids_; }
  std::span<const ElementId> members(std::size_t i) const {
    return {members_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::size_t size_of(std::size_t i) const { return offsets_[i + 1] - offsets_[i]; }

 private:
  std::size_t mode_;
  Index mode_length_;
  std::vector<Index> slice_ids_;
  std::vector<std::size_t> offsets_;
  std::vector<ElementId> members_;
};

/// Groups element ids by their coordinate along `mode`.
ModeSlices slices(const SparseTensor& t, std::size_t mode);

/// Zero-based column of the mode-n unfolding holding an element at `coords`
/// (zero-based): sum over j != n of coords[j] * prod_{i != n, i < j} dims[i].
Index unfolding_column(std::span<const Index> coords, std::size_t mode, std::span<const Index> dims);

/// Strided view of one factor-matrix row.
struct RowRef {
  const double* data = nullptr;
  Index stride = 1;
  Index length = 0;

  double operator[](Index c) const { return data[c * stride]; }
};

inline RowRef row_of(const Eigen::MatrixXd& m, Index row) {
  return RowRef{m.data() + row, m.rows(), m.cols()};
}

/// Accumulates value * (rows[0] (x) rows[1] (x) ...) into `out`. The first row
/// varies fastest: entry (c_1, ..., c_r) lands at sum_j c_j prod_{i<j} len_i.
/// `scratch` is reused between calls to avoid allocation.
void accumulate_kron(double value, std::span<const RowRef> rows, std::span<double> out,
                     std::vector<double>& scratch);

/// Product of factor column counts over all modes except `skip_mode`.
Index kron_length(std::span<const Eigen::MatrixXd> factors, std::size_t skip_mode);

/// The contribution of one element to row coords[n] of the mode-n penultimate
/// matrix. `factors[n]` is ignored and may be empty.
Eigen::VectorXd kron_contribution(const Element& e, std::size_t skip_mode,
                                  std::span<const Eigen::MatrixXd> factors);

// .tns text format

/// Reads FROSTT-style coordinate text. Lines starting with '#' are comments,
/// except an optional "# dims: d1 ... dN" header which fixes the mode lengths.
SparseTensor ingest_tns(std::istream& in);
SparseTensor ingest_tns_string(const std::string& text);
SparseTensor ingest_tns_file(const std::string& path);

/// Writes one-based coordinates with a dims header.
void write_tns(std::ostream& out, const SparseTensor& t);

}  // namespace sptucker
