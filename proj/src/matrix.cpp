#include "fedfac/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace fedfac {

DenseMatrix DenseMatrix::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  DenseMatrix m(rows.size(), rows.size() == 0 ? 0 : rows.begin()->size());
  std::size_t r = 0;
  for (const auto& row : rows) {
    if (row.size() != m.cols()) {
      throw std::invalid_argument("from_rows: ragged row lengths");
    }
    std::size_t c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

DenseMatrix DenseMatrix::multiply(const DenseMatrix& rhs) const {
  if (cols_ != rhs.rows_) {
    throw std::invalid_argument("multiply: inner dimensions disagree");
  }
  DenseMatrix out(rows_, rhs.cols_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t k = 0; k < cols_; ++k) {
      const double a = (*this)(i, k);
      if (a == 0.0) continue;
      const double* rhs_row = rhs.values_.data() + k * rhs.cols_;
      double* out_row = out.values_.data() + i * rhs.cols_;
      for (std::size_t j = 0; j < rhs.cols_; ++j) out_row[j] += a * rhs_row[j];
    }
  }
  return out;
}

DenseMatrix DenseMatrix::transpose_times_self() const {
  DenseMatrix out(cols_, cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    const double* row = values_.data() + r * cols_;
    for (std::size_t i = 0; i < cols_; ++i) {
      const double a = row[i];
      if (a == 0.0) continue;
      double* out_row = out.values_.data() + i * cols_;
      for (std::size_t j = i; j < cols_; ++j) out_row[j] += a * row[j];
    }
  }
  for (std::size_t i = 0; i < cols_; ++i) {
    for (std::size_t j = 0; j < i; ++j) out(i, j) = out(j, i);
  }
  return out;
}

std::vector<double> DenseMatrix::multiply_vector(std::span<const double> x) const {
  if (x.size() != cols_) {
    throw std::invalid_argument("multiply_vector: length mismatch");
  }
  std::vector<double> out(rows_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    const double* row = values_.data() + r * cols_;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols_; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
  return out;
}

double DenseMatrix::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double DenseMatrix::max_asymmetry() const {
  if (rows_ != cols_) {
    throw std::invalid_argument("max_asymmetry: matrix is not square");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = i + 1; j < cols_; ++j) {
      m = std::max(m, std::abs((*this)(i, j) - (*this)(j, i)));
    }
  }
  return m;
}

bool DenseMatrix::is_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

DenseMatrix cholesky_lower(const DenseMatrix& matrix) {
  if (matrix.rows() != matrix.cols()) {
    throw std::invalid_argument("cholesky_lower: matrix is not square");
  }
  const std::size_t n = matrix.rows();
  DenseMatrix lower(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = matrix(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= lower(j, k) * lower(j, k);
    if (diag <= 0.0) {
      throw std::runtime_error("cholesky_lower: matrix is not positive definite");
    }
    lower(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      double acc = matrix(i, j);
      for (std::size_t k = 0; k < j; ++k) acc -= lower(i, k) * lower(j, k);
      lower(i, j) = acc / lower(j, j);
    }
  }
  return lower;
}

}  // namespace fedfac
