#pragma once

#include <vector>

#include "fedfac/matrix.hpp"

namespace fedfac {

/// Full spectrum of a symmetric matrix. Eigenvalues are sorted
/// non-increasing and eigenvectors() column j pairs with eigenvalues()[j];
/// the columns form an orthonormal set.
struct EigenResult {
  std::vector<double> eigenvalues;
  DenseMatrix eigenvectors;
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
/// Throws std::invalid_argument for non-square, non-finite, or asymmetric
/// input (tolerance 1e-10 relative to the largest entry) and
/// std::runtime_error if the sweep cap is reached before convergence.
EigenResult sym_eig(const DenseMatrix& matrix);

}  // namespace fedfac
