#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sbm {

using Index = std::uint32_t;
using Count = std::uint64_t;
using Bits = std::uint64_t;

enum class Symmetry : std::uint8_t { General = 0, Symmetric = 1 };

/// Floating-point precision of stored values; the enumerator value is the bit width.
enum class Precision : std::uint8_t { Single = 32, Double = 64 };

constexpr unsigned bits_of(Precision p) noexcept { return static_cast<unsigned>(p); }

/// Throws std::invalid_argument unless b is 32 or 64.
Precision precision_from_bits(unsigned b);

struct Coord {
    Index row = 0;
    Index col = 0;

    friend auto operator<=>(const Coord&, const Coord&) = default;
};

/// Nonzero pattern of a sparse matrix in stored-element form.
///
/// Elements are unique and sorted by (row, col). Symmetric matrices keep only
/// the lower triangle (row >= col), diagonal included.
class SparseMatrix {
public:
    SparseMatrix() = default;

    /// Normalizes an arbitrary coordinate list: reflects symmetric entries into
    /// the lower triangle, sorts and drops duplicates.
    static SparseMatrix from_coords(Index rows, Index cols, Symmetry symmetry,
                                    std::vector<Coord> coords);

    /// Adopts an already-normalized list; throws std::invalid_argument if any
    /// invariant is violated.
    static SparseMatrix from_sorted(Index rows, Index cols, Symmetry symmetry,
                                    std::vector<Coord> coords);

    Index rows() const noexcept { return rows_; }
    Index cols() const noexcept { return cols_; }
    Symmetry symmetry() const noexcept { return symmetry_; }
    bool symmetric() const noexcept { return symmetry_ == Symmetry::Symmetric; }
    std::span<const Coord> elements() const noexcept { return elements_; }
    Count nnz_stored() const noexcept { return elements_.size(); }
    Count nnz_all() const noexcept;
    Count diagonal_count() const noexcept { return diagonal_; }
    bool empty() const noexcept { return elements_.empty(); }

    friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

private:
    SparseMatrix(Index rows, Index cols, Symmetry symmetry, std::vector<Coord> coords);

    Index rows_ = 0;
    Index cols_ = 0;
    Symmetry symmetry_ = Symmetry::General;
    std::vector<Coord> elements_;
    Count diagonal_ = 0;
};

enum class ValueField : std::uint8_t { Real, Integer, Pattern };

std::string_view to_string(ValueField field);
std::string_view to_string(Symmetry symmetry);

/// Header facts of a Matrix Market file. `name` and `kind` come from the
/// "% name:" and "% kind:" comment lines used by the SuiteSparse collection.
struct MatrixMarketInfo {
    ValueField field = ValueField::Real;
    std::string name;
    std::string kind;
};

/// Parsed matrix plus one value per stored element (pattern files get 1.0).
struct MatrixMarketData {
    SparseMatrix matrix;
    std::vector<double> values;
    MatrixMarketInfo info;
};

class MatrixMarketError : public std::runtime_error {
public:
    MatrixMarketError(const std::string& what, std::size_t line);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Raised for valid Matrix Market content this library does not model
/// (complex, hermitian, skew-symmetric, dense array format).
class UnsupportedMatrixError : public MatrixMarketError {
public:
    UnsupportedMatrixError(const std::string& kind, std::size_t line);
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

MatrixMarketData read_matrix_market(std::string_view text);
MatrixMarketData read_matrix_market(std::istream& in);
MatrixMarketData read_matrix_market_file(const std::filesystem::path& path);

/// Positions only.
SparseMatrix parse_matrix_market(std::string_view text);

/// Writes a coordinate file; an empty `values` span produces a pattern file.
void write_matrix_market(std::ostream& out, const SparseMatrix& matrix,
                         std::span<const double> values = {});

// Matrix-level reference quantities.

/// Whole-matrix CSR with 32-bit row pointers (m+1) and 32-bit column indices.
Bits csr32_footprint(const SparseMatrix& matrix, Precision precision);

/// nnz_stored * b.
Bits lower_bound(const SparseMatrix& matrix, Precision precision);

/// A quantity measured over all logical nonzeros and over stored ones only.
struct VariantPair {
    double all = 0.0;
    double stored = 0.0;

    friend bool operator==(const VariantPair&, const VariantPair&) = default;
};

/// Nonzero density in percent.
VariantPair density(const SparseMatrix& matrix);

/// Population standard deviation of per-row nonzero counts relative to the
/// row length, in percent.
VariantPair row_uniformity(const SparseMatrix& matrix);

}  // namespace sbm
