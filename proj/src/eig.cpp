#include "fedfac/eig.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fedfac {
namespace {

double offdiag_norm(const DenseMatrix& a) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = i + 1; j < a.cols(); ++j) sum += a(i, j) * a(i, j);
  }
  return std::sqrt(2.0 * sum);
}

}  // namespace

EigenResult sym_eig(const DenseMatrix& matrix) {
  if (matrix.rows() != matrix.cols()) {
    throw std::invalid_argument("sym_eig: matrix is not square");
  }
  if (!matrix.is_finite()) {
    throw std::invalid_argument("sym_eig: matrix has non-finite entries");
  }
  const std::size_t n = matrix.rows();
  const double scale = std::max(1.0, matrix.max_abs());
  if (n > 1 && matrix.max_asymmetry() > 1e-10 * scale) {
    throw std::invalid_argument("sym_eig: matrix is not symmetric");
  }

  DenseMatrix a = matrix;
  DenseMatrix v = DenseMatrix::identity(n);
  if (n == 0) return {{}, v};

  constexpr int kMaxSweeps = 64;
  const double target = 1e-14 * scale * static_cast<double>(n);
  bool converged = false;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    if (offdiag_norm(a) <= target) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        // Skip rotations that cannot change the diagonal at double precision.
        const double app = a(p, p);
        const double aqq = a(q, q);
        if (std::abs(apq) < 1e-17 * (std::abs(app) + std::abs(aqq))) {
          continue;
        }
        const double theta = 0.5 * (aqq - app) / apq;
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (k != p && k != q) {
            const double akp = a(k, p);
            const double akq = a(k, q);
            a(k, p) = akp - s * (akq + tau * akp);
            a(p, k) = a(k, p);
            a(k, q) = akq + s * (akp - tau * akq);
            a(q, k) = a(k, q);
          }
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = vkp - s * (vkq + tau * vkp);
          v(k, q) = vkq + s * (vkp - tau * vkq);
        }
      }
    }
    if (offdiag_norm(a) <= target) converged = true;
  }
  if (!converged) {
    throw std::runtime_error("sym_eig: Jacobi sweeps did not converge for " +
                             std::to_string(n) + "x" + std::to_string(n) +
                             " matrix");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&a](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  EigenResult result;
  result.eigenvalues.resize(n);
  result.eigenvectors = DenseMatrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    result.eigenvalues[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) {
      result.eigenvectors(i, j) = v(i, order[j]);
    }
  }
  return result;
}

}  // namespace fedfac
