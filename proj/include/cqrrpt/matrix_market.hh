#ifndef cqrrpt_matrix_market_hh
#define cqrrpt_matrix_market_hh

#include <iosfwd>
#include <string>

#include "cqrrpt/dense_matrix.hh"

namespace cqrrpt {

enum class MatrixMarketFormat { array, coordinate };

// Matrix Market exchange format, real general, array and coordinate variants.
// Coordinate output stores the nonzero entries only.
void write_matrix_market(std::ostream &os, const DenseMatrix &m,
                         MatrixMarketFormat fmt = MatrixMarketFormat::array);
void write_matrix_market(const std::string &path, const DenseMatrix &m,
                         MatrixMarketFormat fmt = MatrixMarketFormat::array);

DenseMatrix read_matrix_market(std::istream &is);
DenseMatrix read_matrix_market(const std::string &path);

} // namespace cqrrpt

#endif
