#include <gtest/gtest.h>

#include <sstream>

#include "sptucker/errors.hpp"
#include "sptucker/tensor.hpp"
#include "test_support.hpp"

using namespace sptucker;

TEST(Ingest, ReadsCoordinatesAndInfersDims) {
  const auto t = ingest_tns_string("1 1 1 2.0\n2 1 3 -1.0\n");
  ASSERT_EQ(t.order(), 3u);
  EXPECT_EQ(t.nnz(), 2u);
  EXPECT_EQ(std::vector<Index>(t.dims().begin(), t.dims().end()), (std::vector<Index>{2, 1, 3}));
  EXPECT_EQ(t.coord(1, 2), 2);
  EXPECT_DOUBLE_EQ(t.value(1), -1.0);
}

TEST(Ingest, MergesDuplicatesBySummation) {
  const auto t = ingest_tns_string("1 1 1 2.0\n1 1 1 3.0\n");
  ASSERT_EQ(t.nnz(), 1u);
  EXPECT_DOUBLE_EQ(t.value(0), 5.0);
}

TEST(Ingest, DimsHeaderOverridesMaxima) {
  const auto t = ingest_tns_string("# a comment\n# dims: 4 5 6\n1 2 3 1.5\n");
  EXPECT_EQ(t.dim(0), 4);
  EXPECT_EQ(t.dim(2), 6);
}

TEST(Ingest, MalformedLineReportsLineNumber) {
  try {
    ingest_tns_string("1 1 1 2.0\n1 x 1 2.0\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(ingest_tns_string("1 1 1 2.0\n1 1 2.0\n"), ParseError);
}

TEST(Ingest, RejectsZeroCoordinateAndNonFinite) {
  EXPECT_THROW(ingest_tns_string("0 1 1 2.0\n"), DomainError);
  EXPECT_THROW(ingest_tns_string("1 1 1 nan\n"), DomainError);
  EXPECT_THROW(ingest_tns_string("1 1 1 inf\n"), DomainError);
  EXPECT_THROW(ingest_tns_string("# dims: 2 2 2\n3 1 1 1.0\n"), DomainError);
}

TEST(Ingest, WriteReadRoundTrip) {
  const auto t = fixtures::random_tensor({4, 3, 5}, 20, 7);
  std::ostringstream out;
  write_tns(out, t);
  const auto back = ingest_tns_string(out.str());
  ASSERT_EQ(back.nnz(), t.nnz());
  for (ElementId e = 0; e < t.nnz(); ++e) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(back.coord(e, j), t.coord(e, j));
    EXPECT_DOUBLE_EQ(back.value(e), t.value(e));
  }
}

TEST(Ingest, MissingFileIsIoError) { EXPECT_THROW(ingest_tns_file("/nonexistent/x.tns"), IoError); }

TEST(Slices, ThreeSliceFirstMode) {
  const auto t = fixtures::three_slice_tensor();
  const auto s = slices(t, 0);
  ASSERT_EQ(s.nonempty_count(), 3u);
  auto ids = [&](std::size_t i) { return std::vector<ElementId>(s.members(i).begin(), s.members(i).end()); };
  EXPECT_EQ(ids(0), (std::vector<ElementId>{0, 2, 5}));
  EXPECT_EQ(ids(1), (std::vector<ElementId>{1, 6}));
  EXPECT_EQ(ids(2), (std::vector<ElementId>{3, 4, 7}));
}

TEST(Slices, ConstantModeGivesOneSlice) {
  const auto t = fixtures::random_tensor({1, 6, 5}, 15, 3);
  const auto s = slices(t, 0);
  ASSERT_EQ(s.nonempty_count(), 1u);
  EXPECT_EQ(s.size_of(0), t.nnz());
}

TEST(Slices, PartitionElementsExactly) {
  const auto t = fixtures::random_tensor({5, 4, 6, 3}, 120, 11);
  for (std::size_t n = 0; n < t.order(); ++n) {
    const auto s = slices(t, n);
    std::vector<int> seen(t.nnz(), 0);
    std::vector<std::size_t> recount(static_cast<std::size_t>(t.dim(n)), 0);
    for (ElementId e = 0; e < t.nnz(); ++e) ++recount[static_cast<std::size_t>(t.coord(e, n))];
    for (std::size_t i = 0; i < s.nonempty_count(); ++i) {
      EXPECT_EQ(s.size_of(i), recount[static_cast<std::size_t>(s.slice_index(i))]);
      for (ElementId e : s.members(i)) {
        EXPECT_EQ(t.coord(e, n), s.slice_index(i));
        ++seen[e];
      }
    }
    for (int c : seen) EXPECT_EQ(c, 1);
  }
  EXPECT_THROW(slices(t, 4), ShapeError);
}

TEST(Unfolding, OriginMapsToFirstColumn) {
  const std::vector<Index> dims = {3, 4, 5};
  const std::vector<Index> zero = {0, 0, 0};
  for (std::size_t n = 0; n < 3; ++n) EXPECT_EQ(unfolding_column(zero, n, dims), 0);
}

TEST(Unfolding, WorkedColumn) {
  // One-based (2,3,4) in a 3x4x5 tensor, mode 1.
  const std::vector<Index> dims = {3, 4, 5};
  const std::vector<Index> c = {1, 2, 3};
  EXPECT_EQ(unfolding_column(c, 0, dims), 14);
}

TEST(Unfolding, ColumnsEnumerateFibersLexicographically) {
  const std::vector<Index> dims = {2, 3, 2};
  for (std::size_t n = 0; n < 3; ++n) {
    // Enumerate fibers with the lowest kept mode fastest and check they come out 0, 1, 2, ...
    std::vector<std::size_t> kept;
    for (std::size_t j = 0; j < 3; ++j) {
      if (j != n) kept.push_back(j);
    }
    Index expected = 0;
    for (Index b = 0; b < dims[kept[1]]; ++b) {
      for (Index a = 0; a < dims[kept[0]]; ++a) {
        for (Index r = 0; r < dims[n]; ++r) {
          std::vector<Index> c(3);
          c[n] = r;
          c[kept[0]] = a;
          c[kept[1]] = b;
          EXPECT_EQ(unfolding_column(c, n, dims), expected);
        }
        ++expected;
      }
    }
  }
}

TEST(Kron, WorkedContribution) {
  std::vector<Eigen::MatrixXd> f(3);
  f[1] = Eigen::MatrixXd::Zero(1, 2);
  f[1](0, 0) = 1.0;
  f[2] = Eigen::MatrixXd::Zero(1, 2);
  f[2](0, 1) = 1.0;
  const Element e{{0, 0, 0}, 2.0};
  const Eigen::VectorXd c = kron_contribution(e, 0, f);
  ASSERT_EQ(c.size(), 4);
  EXPECT_EQ(c, Eigen::Vector4d(0, 0, 2, 0));
}

TEST(Kron, OrderingMatchesUnfolding) {
  // Rows that are unit vectors select exactly one cell; its position must
  // agree with the unfolding column of the (c2, c3) grid.
  const std::vector<Index> grid = {1, 3, 4};
  for (Index a = 0; a < 3; ++a) {
    for (Index b = 0; b < 4; ++b) {
      std::vector<Eigen::MatrixXd> f(3);
      f[1] = Eigen::MatrixXd::Zero(1, 3);
      f[1](0, a) = 1.0;
      f[2] = Eigen::MatrixXd::Zero(1, 4);
      f[2](0, b) = 1.0;
      const Eigen::VectorXd c = kron_contribution(Element{{0, 0, 0}, 1.0}, 0, f);
      const std::vector<Index> coords = {0, a, b};
      Eigen::Index hot = -1;
      c.maxCoeff(&hot);
      EXPECT_EQ(hot, unfolding_column(coords, 0, grid));
    }
  }
}

TEST(Kron, ZeroValueAndOnes) {
  std::vector<Eigen::MatrixXd> f = {Eigen::MatrixXd::Ones(2, 2), Eigen::MatrixXd::Ones(2, 3),
                                    Eigen::MatrixXd::Ones(2, 2)};
  EXPECT_TRUE(kron_contribution(Element{{1, 1, 1}, 0.0}, 1, f).isZero());
  const Eigen::VectorXd c = kron_contribution(Element{{1, 0, 1}, 3.0}, 1, f);
  ASSERT_EQ(c.size(), 4);
  f[1] = Eigen::MatrixXd::Ones(2, 2);
  f[0] = Eigen::MatrixXd::Ones(2, 3);
  const Eigen::VectorXd six = kron_contribution(Element{{1, 0, 1}, 3.0}, 1, f);
  ASSERT_EQ(six.size(), 6);
  for (Eigen::Index i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(six(i), 3.0);
}

TEST(Kron, Multilinear) {
  Rng rng(5);
  std::normal_distribution<double> g;
  std::vector<Eigen::MatrixXd> f(4);
  for (auto& m : f) {
    m = Eigen::MatrixXd(3, 2);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  }
  const Element e{{2, 1, 0, 2}, 1.7};
  const Eigen::VectorXd base = kron_contribution(e, 2, f);
  f[3].row(2) *= -2.5;
  const Eigen::VectorXd scaled = kron_contribution(e, 2, f);
  EXPECT_LE((scaled - (-2.5) * base).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Kron, ShapeMismatchThrows) {
  std::vector<Eigen::MatrixXd> f = {Eigen::MatrixXd::Ones(2, 2), Eigen::MatrixXd::Ones(2, 2)};
  EXPECT_THROW(kron_contribution(Element{{0, 0, 0}, 1.0}, 0, f), ShapeError);
}

TEST(Tensor, ConstructionValidates) {
  EXPECT_THROW(SparseTensor({3}, std::vector<Element>{}), ShapeError);
  EXPECT_THROW(SparseTensor({3, 0}, std::vector<Element>{}), ShapeError);
  EXPECT_THROW(SparseTensor({2, 2}, std::vector<Element>{{{2, 0}, 1.0}}), DomainError);
  const SparseTensor t({2, 2}, std::vector<Element>{{{1, 1}, 3.0}, {{0, 1}, 4.0}});
  EXPECT_DOUBLE_EQ(t.norm_squared(), 25.0);
}
