#include "fedfac/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace fedfac {

StandardizeResult column_standardize(const DenseMatrix& z) {
  const std::size_t n = z.rows();
  const std::size_t d = z.cols();
  if (n < 2) {
    throw std::invalid_argument("column_standardize: need at least 2 rows");
  }
  StandardizeResult out;
  out.values = DenseMatrix(n, d);
  out.zero_variance.assign(d, 0);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += z(i, j);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = z(i, j) - mean;
      ss += c * c;
    }
    const double var = ss / static_cast<double>(n - 1);
    if (var <= 0.0) {
      out.zero_variance[j] = 1;
      for (std::size_t i = 0; i < n; ++i) out.values(i, j) = 0.0;
      continue;
    }
    const double inv_sd = 1.0 / std::sqrt(var);
    for (std::size_t i = 0; i < n; ++i) out.values(i, j) = (z(i, j) - mean) * inv_sd;
  }
  return out;
}

DenseMatrix correlation_matrix(const DenseMatrix& standardized) {
  if (standardized.rows() < 2) {
    throw std::invalid_argument("correlation_matrix: need at least 2 rows");
  }
  DenseMatrix r = standardized.transpose_times_self();
  const double inv = 1.0 / static_cast<double>(standardized.rows() - 1);
  for (double& v : r.values()) v *= inv;
  return r;
}

}  // namespace fedfac
