#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace fedfac {

/// Row-major dense real matrix. The shared currency of all numeric code in
/// this project; values are immutable by convention once a matrix has been
/// handed off to another module.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  DenseMatrix transposed() const;
  DenseMatrix multiply(const DenseMatrix& rhs) const;

  /// Z^T Z without materializing the transpose.
  DenseMatrix transpose_times_self() const;

  std::vector<double> multiply_vector(std::span<const double> x) const;

  double max_abs() const;
  /// max |a_ij - a_ji| over a square matrix.
  double max_asymmetry() const;
  bool is_finite() const;

  bool operator==(const DenseMatrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// Throws std::runtime_error if a pivot underflows.
DenseMatrix cholesky_lower(const DenseMatrix& matrix);

}  // namespace fedfac
