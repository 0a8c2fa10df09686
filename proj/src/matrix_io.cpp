#include "sbm/matrix_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <sstream>

namespace sbm {

Precision precision_from_bits(unsigned b) {
    if (b == 32) return Precision::Single;
    if (b == 64) return Precision::Double;
    throw std::invalid_argument("precision must be 32 or 64 bits, got " + std::to_string(b));
}

// ---------------------------------------------------------------------------
// SparseMatrix

SparseMatrix::SparseMatrix(Index rows, Index cols, Symmetry symmetry, std::vector<Coord> coords)
    : rows_(rows), cols_(cols), symmetry_(symmetry), elements_(std::move(coords)) {
    diagonal_ = static_cast<Count>(std::count_if(elements_.begin(), elements_.end(),
                                                 [](const Coord& c) { return c.row == c.col; }));
}

SparseMatrix SparseMatrix::from_coords(Index rows, Index cols, Symmetry symmetry,
                                       std::vector<Coord> coords) {
    if (symmetry == Symmetry::Symmetric) {
        for (auto& c : coords) {
            if (c.row < c.col) std::swap(c.row, c.col);
        }
    }
    std::sort(coords.begin(), coords.end());
    coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    return from_sorted(rows, cols, symmetry, std::move(coords));
}

SparseMatrix SparseMatrix::from_sorted(Index rows, Index cols, Symmetry symmetry,
                                       std::vector<Coord> coords) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("matrix dimensions must be positive");
    if (symmetry == Symmetry::Symmetric && rows != cols)
        throw std::invalid_argument("symmetric matrix must be square");
    for (std::size_t i = 0; i < coords.size(); ++i) {
        const auto& c = coords[i];
        if (c.row >= rows || c.col >= cols)
            throw std::invalid_argument("element coordinate outside matrix");
        if (symmetry == Symmetry::Symmetric && c.row < c.col)
            throw std::invalid_argument("symmetric matrix element above the diagonal");
        if (i > 0 && !(coords[i - 1] < c))
            throw std::invalid_argument("elements not strictly sorted");
    }
    return SparseMatrix(rows, cols, symmetry, std::move(coords));
}

Count SparseMatrix::nnz_all() const noexcept {
    if (symmetry_ == Symmetry::General) return nnz_stored();
    return 2 * nnz_stored() - diagonal_;
}

std::string_view to_string(ValueField field) {
    switch (field) {
        case ValueField::Real: return "real";
        case ValueField::Integer: return "integer";
        case ValueField::Pattern: return "pattern";
    }
    return "?";
}

std::string_view to_string(Symmetry symmetry) {
    return symmetry == Symmetry::Symmetric ? "symmetric" : "general";
}

// ---------------------------------------------------------------------------
// Matrix Market reader

MatrixMarketError::MatrixMarketError(const std::string& what, std::size_t line)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

UnsupportedMatrixError::UnsupportedMatrixError(const std::string& kind, std::size_t line)
    : MatrixMarketError("unsupported Matrix Market kind '" + kind + "'", line), kind_(kind) {}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return out;
}

bool is_space(char ch) { return ch == ' ' || ch == '\t' || ch == '\r' || ch == '\v' || ch == '\f'; }

std::string_view next_token(std::string_view& s) {
    std::size_t i = 0;
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    auto tok = s.substr(i, j - i);
    s.remove_prefix(j);
    return tok;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

class LineReader {
public:
    explicit LineReader(std::string_view text) : text_(text) {}

    bool next(std::string_view& line) {
        if (pos_ >= text_.size()) return false;
        auto end = text_.find('\n', pos_);
        if (end == std::string_view::npos) end = text_.size();
        line = text_.substr(pos_, end - pos_);
        pos_ = end + 1;
        ++number_;
        return true;
    }

    std::size_t number() const { return number_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t number_ = 0;
};

template <typename T>
T parse_unsigned(std::string_view tok, std::size_t line, const char* what) {
    T value{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size())
        throw MatrixMarketError(std::string("invalid ") + what + " '" + std::string(tok) + "'", line);
    return value;
}

double parse_value(std::string_view tok, std::size_t line) {
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (tok.empty() || ptr != tok.data() + tok.size() ||
        (ec != std::errc{} && ec != std::errc::result_out_of_range))
        throw MatrixMarketError("invalid value '" + std::string(tok) + "'", line);
    return value;
}

struct Entry {
    Coord coord;
    double value;
};

}  // namespace

MatrixMarketData read_matrix_market(std::string_view text) {
    LineReader reader(text);
    std::string_view line;
    if (!reader.next(line)) throw MatrixMarketError("empty input", 0);

    auto banner = line;
    if (lower(next_token(banner)) != "%%matrixmarket")
        throw MatrixMarketError("missing %%MatrixMarket banner", reader.number());
    const auto object = lower(next_token(banner));
    const auto format = lower(next_token(banner));
    const auto field = lower(next_token(banner));
    const auto symmetry = lower(next_token(banner));
    if (object != "matrix") throw UnsupportedMatrixError(object.empty() ? "<missing object>" : object, 1);
    if (format == "array") throw UnsupportedMatrixError("array", 1);
    if (format != "coordinate") throw MatrixMarketError("malformed header: format '" + format + "'", 1);

    MatrixMarketData data;
    if (field == "real" || field == "double") {
        data.info.field = ValueField::Real;
    } else if (field == "integer") {
        data.info.field = ValueField::Integer;
    } else if (field == "pattern") {
        data.info.field = ValueField::Pattern;
    } else if (field == "complex") {
        throw UnsupportedMatrixError("complex", 1);
    } else {
        throw MatrixMarketError("malformed header: field '" + field + "'", 1);
    }

    Symmetry sym;
    if (symmetry == "general") {
        sym = Symmetry::General;
    } else if (symmetry == "symmetric") {
        sym = Symmetry::Symmetric;
    } else if (symmetry == "skew-symmetric" || symmetry == "hermitian") {
        throw UnsupportedMatrixError(symmetry, 1);
    } else {
        throw MatrixMarketError("malformed header: symmetry '" + symmetry + "'", 1);
    }

    // Comments, then the size line.
    std::size_t m = 0, n = 0, declared = 0;
    bool have_size = false;
    while (reader.next(line)) {
        auto t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '%') {
            t.remove_prefix(1);
            t = trim(t);
            if (t.starts_with("name:")) data.info.name = std::string(trim(t.substr(5)));
            else if (t.starts_with("kind:")) data.info.kind = std::string(trim(t.substr(5)));
            continue;
        }
        auto rest = t;
        m = parse_unsigned<std::size_t>(next_token(rest), reader.number(), "row count");
        n = parse_unsigned<std::size_t>(next_token(rest), reader.number(), "column count");
        declared = parse_unsigned<std::size_t>(next_token(rest), reader.number(), "entry count");
        if (!trim(rest).empty()) throw MatrixMarketError("trailing data on size line", reader.number());
        have_size = true;
        break;
    }
    if (!have_size) throw MatrixMarketError("missing size line", reader.number());
    if (m == 0 || n == 0) throw MatrixMarketError("matrix dimensions must be positive", reader.number());
    if (m > std::numeric_limits<Index>::max() || n > std::numeric_limits<Index>::max())
        throw MatrixMarketError("matrix dimensions exceed 32-bit indices", reader.number());
    if (sym == Symmetry::Symmetric && m != n)
        throw MatrixMarketError("symmetric matrix must be square", reader.number());

    std::vector<Entry> entries;
    entries.reserve(std::min<std::size_t>(declared, text.size() / 4 + 1));
    std::size_t seen = 0;
    const bool pattern = data.info.field == ValueField::Pattern;
    while (reader.next(line)) {
        auto rest = line;
        auto row_tok = next_token(rest);
        if (row_tok.empty() || row_tok.front() == '%') continue;
        if (seen == declared) throw MatrixMarketError("more entries than declared", reader.number());
        const auto r = parse_unsigned<std::size_t>(row_tok, reader.number(), "row index");
        const auto c = parse_unsigned<std::size_t>(next_token(rest), reader.number(), "column index");
        if (r < 1 || r > m || c < 1 || c > n)
            throw MatrixMarketError("index (" + std::to_string(r) + ", " + std::to_string(c) +
                                        ") out of range",
                                    reader.number());
        double value = 1.0;
        if (!pattern) {
            auto tok = next_token(rest);
            if (tok.empty()) throw MatrixMarketError("missing value", reader.number());
            value = parse_value(tok, reader.number());
        }
        if (!trim(rest).empty()) throw MatrixMarketError("trailing data on entry line", reader.number());
        ++seen;
        if (value == 0.0) continue;
        Coord coord{static_cast<Index>(r - 1), static_cast<Index>(c - 1)};
        if (sym == Symmetry::Symmetric && coord.row < coord.col) std::swap(coord.row, coord.col);
        entries.push_back({coord, value});
    }
    if (seen != declared)
        throw MatrixMarketError("expected " + std::to_string(declared) + " entries, found " +
                                    std::to_string(seen),
                                reader.number());

    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.coord < b.coord; });
    std::vector<Coord> coords;
    coords.reserve(entries.size());
    data.values.reserve(entries.size());
    for (const auto& e : entries) {
        if (!coords.empty() && coords.back() == e.coord) {
            data.values.back() += e.value;  // duplicates are assembled
            continue;
        }
        coords.push_back(e.coord);
        data.values.push_back(e.value);
    }
    data.matrix = SparseMatrix::from_sorted(static_cast<Index>(m), static_cast<Index>(n), sym,
                                            std::move(coords));
    return data;
}

MatrixMarketData read_matrix_market(std::istream& in) {
    std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return read_matrix_market(std::string_view(text));
}

MatrixMarketData read_matrix_market_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MatrixMarketError("cannot open " + path.string(), 0);
    std::string text;
    in.seekg(0, std::ios::end);
    text.resize(static_cast<std::size_t>(in.tellg()));
    in.seekg(0);
    in.read(text.data(), static_cast<std::streamsize>(text.size()));
    try {
        return read_matrix_market(std::string_view(text));
    } catch (const UnsupportedMatrixError&) {
        throw;
    } catch (const MatrixMarketError& e) {
        throw MatrixMarketError(path.string() + ": " + e.what(), 0);
    }
}

SparseMatrix parse_matrix_market(std::string_view text) {
    return std::move(read_matrix_market(text).matrix);
}

void write_matrix_market(std::ostream& out, const SparseMatrix& matrix,
                         std::span<const double> values) {
    if (!values.empty() && values.size() != matrix.nnz_stored())
        throw std::invalid_argument("value count does not match stored elements");
    out << "%%MatrixMarket matrix coordinate " << (values.empty() ? "pattern" : "real") << ' '
        << to_string(matrix.symmetry()) << '\n';
    out << matrix.rows() << ' ' << matrix.cols() << ' ' << matrix.nnz_stored() << '\n';
    const auto elements = matrix.elements();
    char buf[64];
    for (std::size_t i = 0; i < elements.size(); ++i) {
        out << elements[i].row + 1 << ' ' << elements[i].col + 1;
        if (!values.empty()) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, values[i]);
            out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Reference quantities

Bits csr32_footprint(const SparseMatrix& matrix, Precision precision) {
    const Bits nnz = matrix.nnz_stored();
    return nnz * bits_of(precision) + nnz * 32 + (Bits{matrix.rows()} + 1) * 32;
}

Bits lower_bound(const SparseMatrix& matrix, Precision precision) {
    return matrix.nnz_stored() * bits_of(precision);
}

VariantPair density(const SparseMatrix& matrix) {
    const double cells = static_cast<double>(matrix.rows()) * static_cast<double>(matrix.cols());
    return {static_cast<double>(matrix.nnz_all()) / cells * 100.0,
            static_cast<double>(matrix.nnz_stored()) / cells * 100.0};
}

namespace {

double population_stddev_percent(std::span<const Count> counts, Index row_length) {
    const double n = static_cast<double>(row_length);
    double mean = 0.0;
    for (auto c : counts) mean += static_cast<double>(c) / n * 100.0;
    mean /= static_cast<double>(counts.size());
    double acc = 0.0;
    for (auto c : counts) {
        const double d = static_cast<double>(c) / n * 100.0 - mean;
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(counts.size()));
}

}  // namespace

VariantPair row_uniformity(const SparseMatrix& matrix) {
    std::vector<Count> stored(matrix.rows(), 0);
    for (const auto& c : matrix.elements()) ++stored[c.row];
    VariantPair out;
    out.stored = population_stddev_percent(stored, matrix.cols());
    if (!matrix.symmetric()) {
        out.all = out.stored;
        return out;
    }
    auto all = stored;
    for (const auto& c : matrix.elements()) {
        if (c.row != c.col) ++all[c.col];
    }
    out.all = population_stddev_percent(all, matrix.cols());
    return out;
}

}  // namespace sbm
