#pragma once

#include <cstdint>
#include <vector>

#include "fedfac/matrix.hpp"

namespace fedfac {

struct StandardizeResult {
  DenseMatrix values;
  /// One flag per column; true for columns whose sample variance is zero.
  /// Flagged columns are filled with zeros instead of being divided by 0.
  std::vector<std::uint8_t> zero_variance;
};

/// Center every column to sample mean 0 and scale to sample standard
/// deviation 1 (denominator n-1). Requires at least two rows.
StandardizeResult column_standardize(const DenseMatrix& z);

/// Sample correlation matrix of an already standardized matrix:
/// R = Z^T Z / (n - 1).
DenseMatrix correlation_matrix(const DenseMatrix& standardized);

}  // namespace fedfac
