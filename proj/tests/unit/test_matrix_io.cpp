#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "sbm/matrix_io.hpp"
#include "support/oracles.hpp"

using namespace sbm;

namespace {

std::vector<Coord> coords(const SparseMatrix& a) { return {a.elements().begin(), a.elements().end()}; }

}  // namespace

TEST(MatrixMarket, GeneralTwoByTwo) {
    const auto data = read_matrix_market(
        "%%MatrixMarket matrix coordinate real general\n"
        "2 2 2\n"
        "1 1 1.0\n"
        "2 2 3.5\n");
    EXPECT_EQ(data.matrix.rows(), 2u);
    EXPECT_EQ(data.matrix.cols(), 2u);
    EXPECT_EQ(data.matrix.nnz_stored(), 2u);
    EXPECT_EQ(coords(data.matrix), (std::vector<Coord>{{0, 0}, {1, 1}}));
    EXPECT_EQ(data.values, (std::vector<double>{1.0, 3.5}));
    EXPECT_EQ(data.info.field, ValueField::Real);
}

TEST(MatrixMarket, SymmetricStoresLowerTriangle) {
    const auto a = parse_matrix_market(
        "%%MatrixMarket matrix coordinate real symmetric\n"
        "3 3 3\n"
        "1 1 2\n"
        "3 1 2\n"
        "3 3 2\n");
    EXPECT_EQ(a.nnz_stored(), 3u);
    // (1,1), (3,1), (1,3), (3,3)
    EXPECT_EQ(a.nnz_all(), 4u);
    for (const auto& e : a.elements()) EXPECT_GE(e.row, e.col);
    EXPECT_EQ(lower_bound(a, Precision::Double), 192u);
}

TEST(MatrixMarket, UpperTriangleEntriesAreMirrored) {
    const auto a = parse_matrix_market(
        "%%MatrixMarket matrix coordinate real symmetric\n"
        "3 3 1\n"
        "1 3 4\n");
    EXPECT_EQ(coords(a), (std::vector<Coord>{{2, 0}}));
}

// Frozen from scipy.io.mmread + sum_duplicates + eliminate_zeros on the same text:
// nnz 3, [(0,0,2.0), (1,1,4.0), (2,0,-1.0)].
TEST(MatrixMarket, DuplicatesSummedExplicitZeroDropped) {
    const auto data = read_matrix_market(
        "%%MatrixMarket matrix coordinate real general\n"
        "3 3 5\n"
        "1 1 2.0\n"
        "2 2 1.5\n"
        "1 2 0.0\n"
        "2 2 2.5\n"
        "3 1 -1.0\n");
    EXPECT_EQ(data.matrix.nnz_stored(), 3u);
    EXPECT_EQ(coords(data.matrix), (std::vector<Coord>{{0, 0}, {1, 1}, {2, 0}}));
    EXPECT_EQ(data.values, (std::vector<double>{2.0, 4.0, -1.0}));
}

TEST(MatrixMarket, PatternAndIntegerFields) {
    const auto pattern = read_matrix_market(
        "%%MatrixMarket matrix coordinate pattern general\n"
        "% kind: graph problem\n"
        "2 3 2\n"
        "1 3\n"
        "2 1\n");
    EXPECT_EQ(pattern.info.field, ValueField::Pattern);
    EXPECT_EQ(pattern.info.kind, "graph problem");
    EXPECT_EQ(pattern.matrix.nnz_stored(), 2u);

    const auto integer = read_matrix_market(
        "%%MatrixMarket matrix coordinate integer general\n"
        "1 1 1\n"
        "1 1 +7\n");
    EXPECT_EQ(integer.info.field, ValueField::Integer);
    EXPECT_EQ(integer.values, (std::vector<double>{7.0}));
}

TEST(MatrixMarket, HeaderCommentsAndCaseInsensitiveBanner) {
    const auto data = read_matrix_market(
        "%%matrixmarket MATRIX Coordinate Real General\n"
        "%-------------------------------------------------------------------------------\n"
        "% name: HB/tiny\n"
        "% kind: structural problem\n"
        "\n"
        "2 2 1\n"
        "2 1 1e-3\n");
    EXPECT_EQ(data.info.name, "HB/tiny");
    EXPECT_EQ(data.info.kind, "structural problem");
    EXPECT_EQ(data.matrix.nnz_stored(), 1u);
}

TEST(MatrixMarket, Errors) {
    EXPECT_THROW(parse_matrix_market("2 2 1\n1 1 1\n"), MatrixMarketError);
    EXPECT_THROW(parse_matrix_market("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n"),
                 UnsupportedMatrixError);
    EXPECT_THROW(parse_matrix_market("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n"),
                 UnsupportedMatrixError);
    EXPECT_THROW(parse_matrix_market("%%MatrixMarket matrix coordinate real hermitian\n1 1 1\n1 1 1\n"),
                 UnsupportedMatrixError);
    EXPECT_THROW(parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n"),
                 MatrixMarketError);
    EXPECT_THROW(parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n"),
                 MatrixMarketError);
    EXPECT_THROW(parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1\n"),
                 MatrixMarketError);
    EXPECT_THROW(parse_matrix_market("%%MatrixMarket matrix coordinate real symmetric\n2 3 1\n1 1 1\n"),
                 MatrixMarketError);
    try {
        parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n0 1 1\n");
        FAIL();
    } catch (const MatrixMarketError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(MatrixMarket, MissingFileReportsPath) {
    try {
        read_matrix_market_file("/nonexistent/a.mtx");
        FAIL();
    } catch (const std::exception& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/a.mtx"), std::string::npos);
    }
}

TEST(MatrixMarket, WriteReadRoundTrip) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 30; ++t) {
        const bool sym = t % 2 == 1;
        const auto n = static_cast<std::uint32_t>(5 + t * 3);
        auto m = oracle::random_matrix(rng, n, sym ? n : n + 4, 0.05, sym);
        std::ostringstream out;
        write_matrix_market(out, m.matrix, m.values);
        const auto back = read_matrix_market(out.str());
        EXPECT_EQ(back.matrix, m.matrix);
        EXPECT_EQ(back.values, m.values);

        std::ostringstream pattern;
        write_matrix_market(pattern, m.matrix);
        EXPECT_EQ(parse_matrix_market(pattern.str()), m.matrix);
    }
}

TEST(SparseMatrix, FromSortedValidates) {
    EXPECT_THROW(SparseMatrix::from_sorted(2, 2, Symmetry::General, {{1, 0}, {0, 0}}), std::invalid_argument);
    EXPECT_THROW(SparseMatrix::from_sorted(2, 2, Symmetry::General, {{0, 0}, {0, 0}}), std::invalid_argument);
    EXPECT_THROW(SparseMatrix::from_sorted(2, 2, Symmetry::General, {{2, 0}}), std::invalid_argument);
    EXPECT_THROW(SparseMatrix::from_sorted(2, 2, Symmetry::Symmetric, {{0, 1}}), std::invalid_argument);
    const auto a = SparseMatrix::from_coords(3, 3, Symmetry::Symmetric, {{0, 2}, {2, 0}, {1, 1}});
    EXPECT_EQ(coords(a), (std::vector<Coord>{{1, 1}, {2, 0}}));
    EXPECT_EQ(a.diagonal_count(), 1u);
    EXPECT_EQ(a.nnz_all(), 3u);
}

TEST(ReferenceQuantities, Csr32AndLowerBound) {
    std::vector<Coord> diag;
    for (Index i = 0; i < 16; ++i) diag.push_back({i, i});
    const auto id = SparseMatrix::from_sorted(16, 16, Symmetry::General, diag);
    EXPECT_EQ(csr32_footprint(id, Precision::Single), 1568u);
    EXPECT_EQ(lower_bound(id, Precision::Single), 512u);

    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
        const auto m = oracle::random_matrix(rng, 40 + t, 30 + 2 * t, 0.03, false).matrix;
        for (auto p : {Precision::Single, Precision::Double}) {
            EXPECT_EQ(csr32_footprint(m, p), oracle::csr32(m, bits_of(p)));
            EXPECT_LE(lower_bound(m, p), csr32_footprint(m, p));
        }
    }
}

TEST(ReferenceQuantities, Density) {
    std::vector<Coord> full, diag;
    for (Index i = 0; i < 10; ++i)
        for (Index j = 0; j < 10; ++j) full.push_back({i, j});
    for (Index i = 0; i < 16; ++i) diag.push_back({i, i});
    auto d = density(SparseMatrix::from_sorted(10, 10, Symmetry::General, full));
    EXPECT_DOUBLE_EQ(d.all, 100.0);
    EXPECT_DOUBLE_EQ(d.stored, 100.0);
    d = density(SparseMatrix::from_sorted(10, 10, Symmetry::General, {}));
    EXPECT_DOUBLE_EQ(d.all, 0.0);
    EXPECT_DOUBLE_EQ(d.stored, 0.0);
    d = density(SparseMatrix::from_sorted(16, 16, Symmetry::General, diag));
    EXPECT_DOUBLE_EQ(d.all, 6.25);
    EXPECT_DOUBLE_EQ(d.stored, 6.25);

    const auto sym = SparseMatrix::from_sorted(2, 2, Symmetry::Symmetric, {{1, 0}});
    d = density(sym);
    EXPECT_DOUBLE_EQ(d.all, 50.0);
    EXPECT_DOUBLE_EQ(d.stored, 25.0);
}

TEST(ReferenceQuantities, RowUniformity) {
    std::vector<Coord> diag;
    for (Index i = 0; i < 16; ++i) diag.push_back({i, i});
    EXPECT_DOUBLE_EQ(row_uniformity(SparseMatrix::from_sorted(16, 16, Symmetry::General, diag)).all, 0.0);

    const auto a = SparseMatrix::from_sorted(2, 4, Symmetry::General, {{0, 0}, {0, 1}, {0, 2}, {0, 3}});
    const auto u = row_uniformity(a);
    EXPECT_DOUBLE_EQ(u.all, 50.0);
    EXPECT_DOUBLE_EQ(u.stored, 50.0);

    // Stored rows {1, 1}; mirrored rows {2, 1} -> prnnz {100, 50}.
    const auto sym = SparseMatrix::from_sorted(2, 2, Symmetry::Symmetric, {{0, 0}, {1, 0}});
    const auto s = row_uniformity(sym);
    EXPECT_DOUBLE_EQ(s.stored, 0.0);
    EXPECT_DOUBLE_EQ(s.all, 25.0);
}
