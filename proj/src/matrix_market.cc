#include "cqrrpt/matrix_market.hh"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace cqrrpt {

void write_matrix_market(std::ostream &os, const DenseMatrix &m, MatrixMarketFormat fmt) {
    os.precision(17);
    if (fmt == MatrixMarketFormat::array) {
        os << "%%MatrixMarket matrix array real general\n";
        os << m.rows() << " " << m.cols() << "\n";
        for (int64_t j = 0; j < m.cols(); ++j)
            for (int64_t i = 0; i < m.rows(); ++i) os << m(i, j) << "\n";
    } else {
        int64_t nnz = 0;
        for (size_t i = 0; i < m.size(); ++i)
            if (m.data()[i] != 0.0) ++nnz;
        os << "%%MatrixMarket matrix coordinate real general\n";
        os << m.rows() << " " << m.cols() << " " << nnz << "\n";
        for (int64_t j = 0; j < m.cols(); ++j)
            for (int64_t i = 0; i < m.rows(); ++i)
                if (m(i, j) != 0.0) os << i + 1 << " " << j + 1 << " " << m(i, j) << "\n";
    }
}

void write_matrix_market(const std::string &path, const DenseMatrix &m, MatrixMarketFormat fmt) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_matrix_market: cannot open " + path);
    write_matrix_market(os, m, fmt);
}

DenseMatrix read_matrix_market(std::istream &is) {
    std::string header;
    if (!std::getline(is, header))
        throw std::runtime_error("read_matrix_market: empty input");
    std::istringstream hs(header);
    std::string banner, object, format, field, symmetry;
    hs >> banner >> object >> format >> field >> symmetry;
    auto lower = [](std::string s) {
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
        return s;
    };
    if (banner != "%%MatrixMarket" || lower(object) != "matrix")
        throw std::runtime_error("read_matrix_market: not a Matrix Market matrix");
    format = lower(format);
    if (lower(field) != "real" || lower(symmetry) != "general")
        throw std::runtime_error("read_matrix_market: only real general matrices are supported");

    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line[0] != '%') break;
    }
    std::istringstream sizes(line);
    if (format == "array") {
        int64_t rows, cols;
        if (!(sizes >> rows >> cols))
            throw std::runtime_error("read_matrix_market: bad size line");
        DenseMatrix m(rows, cols);
        for (int64_t j = 0; j < cols; ++j)
            for (int64_t i = 0; i < rows; ++i)
                if (!(is >> m(i, j)))
                    throw std::runtime_error("read_matrix_market: truncated array data");
        return m;
    }
    if (format == "coordinate") {
        int64_t rows, cols, nnz;
        if (!(sizes >> rows >> cols >> nnz))
            throw std::runtime_error("read_matrix_market: bad size line");
        DenseMatrix m(rows, cols);
        for (int64_t t = 0; t < nnz; ++t) {
            int64_t i, j;
            double v;
            if (!(is >> i >> j >> v))
                throw std::runtime_error("read_matrix_market: truncated coordinate data");
            if (i < 1 || i > rows || j < 1 || j > cols)
                throw std::runtime_error("read_matrix_market: entry index out of range");
            m(i - 1, j - 1) = v;
        }
        return m;
    }
    throw std::runtime_error("read_matrix_market: unknown format " + format);
}

DenseMatrix read_matrix_market(const std::string &path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("read_matrix_market: cannot open " + path);
    return read_matrix_market(is);
}

} // namespace cqrrpt
