#include "spai/matrix_market.hpp"

#include "spai/error.hpp"
#include "spai/io_util.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace spai {

namespace {

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

} // namespace

SparseMatrix read_matrix_market(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty Matrix Market stream");
    ++line_no;

    std::istringstream header(line);
    std::string banner, object, format, field, symmetry;
    header >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket") throw ParseError("missing %%MatrixMarket banner", line_no);
    object = lowercase(object);
    format = lowercase(format);
    field = lowercase(field);
    symmetry = lowercase(symmetry);
    if (object != "matrix") throw ParseError("unsupported object '" + object + "'", line_no);
    if (format != "coordinate") throw ParseError("only coordinate format is supported", line_no);
    if (field != "real" && field != "double" && field != "integer")
        throw ParseError("unsupported field '" + field + "'", line_no);
    const bool is_symmetric = symmetry == "symmetric";
    if (!is_symmetric && symmetry != "general")
        throw ParseError("unsupported symmetry '" + symmetry + "'", line_no);

    // Skip comments to the size line.
    std::size_t n_rows = 0, n_cols = 0, n_entries = 0;
    bool have_size = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '%' || blank(line)) continue;
        std::istringstream size_line(line);
        long long r = -1, c = -1, e = -1;
        if (!(size_line >> r >> c >> e) || r < 0 || c < 0 || e < 0)
            throw ParseError("malformed size line", line_no);
        n_rows = static_cast<std::size_t>(r);
        n_cols = static_cast<std::size_t>(c);
        n_entries = static_cast<std::size_t>(e);
        have_size = true;
        break;
    }
    if (!have_size) throw ParseError("missing size line", line_no);
    if (is_symmetric && n_rows != n_cols) throw ParseError("symmetric matrix must be square", line_no);

    std::vector<Triplet> triplets;
    triplets.reserve(is_symmetric ? 2 * n_entries : n_entries);
    std::size_t read = 0;
    while (read < n_entries && std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '%' || blank(line)) continue;
        std::istringstream entry(line);
        long long i = 0, j = 0;
        std::string value_text;
        if (!(entry >> i >> j >> value_text)) throw ParseError("malformed entry", line_no);
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(value_text.data(), value_text.data() + value_text.size(), value);
        if (ec != std::errc{} || ptr != value_text.data() + value_text.size())
            throw ParseError("malformed value '" + value_text + "'", line_no);
        if (i < 1 || j < 1 || static_cast<std::size_t>(i) > n_rows || static_cast<std::size_t>(j) > n_cols)
            throw ParseError("index (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range", line_no);
        const auto r = static_cast<std::size_t>(i - 1);
        const auto c = static_cast<std::size_t>(j - 1);
        if (is_symmetric && c > r) throw ParseError("symmetric file stores an upper-triangle entry", line_no);
        triplets.push_back({r, c, value});
        if (is_symmetric && r != c) triplets.push_back({c, r, value});
        ++read;
    }
    if (read != n_entries)
        throw ParseError("expected " + std::to_string(n_entries) + " entries, found " + std::to_string(read));

    try {
        return SparseMatrix::from_triplets(n_rows, n_cols, std::move(triplets), DuplicatePolicy::reject);
    } catch (const Error& e) {
        throw ParseError(e.what());
    }
}

SparseMatrix read_matrix_market(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return read_matrix_market(in);
}

void write_matrix_market(const SparseMatrix& a, std::ostream& out, MatrixMarketSymmetry symmetry) {
    const bool sym = symmetry == MatrixMarketSymmetry::symmetric;
    if (sym) {
        if (!a.pattern().is_symmetric()) throw Error("write_matrix_market: pattern is not symmetric");
        for (const auto& t : a.triplets())
            if (a.at(t.col, t.row) != t.value) throw Error("write_matrix_market: values are not symmetric");
    }
    std::size_t count = 0;
    for (const auto& t : a.triplets())
        if (!sym || t.col <= t.row) ++count;

    out << "%%MatrixMarket matrix coordinate real " << (sym ? "symmetric" : "general") << '\n';
    out << a.rows() << ' ' << a.cols() << ' ' << count << '\n';
    char buf[64];
    for (const auto& t : a.triplets()) {
        if (sym && t.col > t.row) continue;
        const auto res = std::to_chars(buf, buf + sizeof(buf), t.value, std::chars_format::general, 17);
        out << (t.row + 1) << ' ' << (t.col + 1) << ' ' << std::string_view(buf, res.ptr - buf) << '\n';
    }
}

void write_matrix_market(const SparseMatrix& a, const std::filesystem::path& path, MatrixMarketSymmetry symmetry) {
    write_atomically(path, [&](std::ostream& out) { write_matrix_market(a, out, symmetry); });
}

} // namespace spai
