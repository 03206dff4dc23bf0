#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "knadi/errors.hpp"
#include "knadi/types.hpp"

// Matrix Market ingestion and export: coordinate and array formats, real
// entries, general or symmetric storage. Output carries 17 significant
// digits so a write/read round trip preserves every bit of a double.

namespace knadi {

struct MarketMatrix {
    bool is_sparse = true;
    SpMat sparse;
    Mat dense;

    Eigen::Index rows() const { return is_sparse ? sparse.rows() : dense.rows(); }
    Eigen::Index cols() const { return is_sparse ? sparse.cols() : dense.cols(); }
    Mat to_dense() const { return is_sparse ? Mat(sparse) : dense; }
    SpMat to_sparse() const { return is_sparse ? sparse : SpMat(dense.sparseView()); }
};

namespace detail {

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline ParseError parse_fail(const std::string& path, int line, const std::string& what) {
    return ParseError(path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace detail

inline MarketMatrix read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");
    std::string line;
    int lineno = 0;

    if (!std::getline(in, line)) throw detail::parse_fail(path, 1, "empty file");
    ++lineno;
    std::istringstream hs(line);
    std::string banner, object, format, field, symmetry;
    hs >> banner >> object >> format >> field >> symmetry;
    if (detail::lower(banner) != "%%matrixmarket")
        throw detail::parse_fail(path, lineno, "missing %%MatrixMarket banner");
    if (detail::lower(object) != "matrix")
        throw detail::parse_fail(path, lineno, "only matrix objects are supported");
    format = detail::lower(format);
    field = detail::lower(field);
    symmetry = detail::lower(symmetry);
    const bool coordinate = format == "coordinate";
    if (!coordinate && format != "array")
        throw detail::parse_fail(path, lineno, "unknown format '" + format + "'");
    if (field != "real" && field != "integer")
        throw UnsupportedField(path + ": field '" + field + "' not supported (real/integer only)");
    const bool symmetric = symmetry == "symmetric";
    if (!symmetric && symmetry != "general")
        throw UnsupportedField(path + ": symmetry '" + symmetry + "' not supported (general/symmetric only)");

    auto next_data = [&]() -> bool {
        while (std::getline(in, line)) {
            ++lineno;
            std::size_t pos = line.find_first_not_of(" \t\r");
            if (pos == std::string::npos || line[pos] == '%') continue;
            return true;
        }
        return false;
    };
    if (!next_data()) throw detail::parse_fail(path, lineno, "missing size line");

    std::istringstream ss(line);
    long rows = 0, cols = 0, nnz = 0;
    MarketMatrix out;
    out.is_sparse = coordinate;
    if (coordinate) {
        if (!(ss >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0)
            throw detail::parse_fail(path, lineno, "bad coordinate size line");
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(symmetric ? 2 * nnz : nnz));
        for (long e = 0; e < nnz; ++e) {
            if (!next_data()) throw detail::parse_fail(path, lineno, "unexpected end of entries");
            std::istringstream es(line);
            long i = 0, j = 0;
            double v = 0.0;
            if (!(es >> i >> j >> v)) throw detail::parse_fail(path, lineno, "bad entry line");
            if (i < 1 || i > rows || j < 1 || j > cols)
                throw detail::parse_fail(path, lineno, "index out of range");
            trip.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1), v);
            if (symmetric && i != j) trip.emplace_back(static_cast<int>(j - 1), static_cast<int>(i - 1), v);
        }
        out.sparse.resize(rows, cols);
        out.sparse.setFromTriplets(trip.begin(), trip.end());
    } else {
        if (!(ss >> rows >> cols) || rows < 0 || cols < 0)
            throw detail::parse_fail(path, lineno, "bad array size line");
        out.dense = Mat::Zero(rows, cols);
        auto read_value = [&](double& v) {
            if (!next_data()) throw detail::parse_fail(path, lineno, "unexpected end of array data");
            std::istringstream es(line);
            if (!(es >> v)) throw detail::parse_fail(path, lineno, "bad array value");
        };
        if (symmetric) {
            if (rows != cols) throw detail::parse_fail(path, lineno, "symmetric array must be square");
            for (long j = 0; j < cols; ++j)
                for (long i = j; i < rows; ++i) {  // lower triangle, column-major
                    double v;
                    read_value(v);
                    out.dense(i, j) = v;
                    out.dense(j, i) = v;
                }
        } else {
            for (long j = 0; j < cols; ++j)
                for (long i = 0; i < rows; ++i) {
                    double v;
                    read_value(v);
                    out.dense(i, j) = v;
                }
        }
    }
    return out;
}

inline void write_matrix_market(const std::string& path, const SpMat& A) {
    std::ofstream out(path);
    if (!out) throw Error("write_matrix_market: cannot open " + path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
    char buf[80];
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it) {
            std::snprintf(buf, sizeof buf, "%ld %ld %.16e\n", static_cast<long>(it.row() + 1),
                          static_cast<long>(it.col() + 1), it.value());
            out << buf;
        }
    if (!out) throw Error("write_matrix_market: write failed for " + path);
}

inline void write_matrix_market(const std::string& path, const Mat& A) {
    std::ofstream out(path);
    if (!out) throw Error("write_matrix_market: cannot open " + path);
    out << "%%MatrixMarket matrix array real general\n";
    out << A.rows() << ' ' << A.cols() << '\n';
    char buf[48];
    for (Eigen::Index j = 0; j < A.cols(); ++j)
        for (Eigen::Index i = 0; i < A.rows(); ++i) {
            std::snprintf(buf, sizeof buf, "%.16e\n", A(i, j));
            out << buf;
        }
    if (!out) throw Error("write_matrix_market: write failed for " + path);
}

}  // namespace knadi
