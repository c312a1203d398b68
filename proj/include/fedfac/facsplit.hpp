#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedfac/matrix.hpp"

namespace fedfac {

/// Threshold rule for splitting units by communality.
enum class TauKind {
  kQuantile,        // empirical quantile of the communality vector
  kAbsolute,        // fixed cut value
  kAllPersonalized, // "+infinity": every unit client-specific
  kAllShared,       // "-infinity": every unit shared (plain averaging)
};

struct TauSpec {
  TauKind kind = TauKind::kQuantile;
  double value = 0.5;  // quantile level or absolute cut, by kind

  static TauSpec quantile(double q) { return {TauKind::kQuantile, q}; }
  static TauSpec absolute(double v) { return {TauKind::kAbsolute, v}; }
  static TauSpec all_personalized() { return {TauKind::kAllPersonalized, 0.0}; }
  static TauSpec all_shared() { return {TauKind::kAllShared, 0.0}; }
};

struct FactorConfig {
  double kappa = 0.85;     // cumulative variability threshold for the factor count
  TauSpec tau;             // communality split rule
  std::size_t max_iter = 100;
  double tol = 1e-4;       // convergence tolerance on the uniqueness diagonal
};

/// Estimated factor loadings for one layer's unit columns.
struct LoadingMatrix {
  DenseMatrix loadings;        // units x factors
  std::size_t factors = 0;     // effective factor count (may shrink, see flag)
  std::vector<double> psi;     // diagonal of the uniqueness matrix
  std::size_t iterations_used = 0;
  bool converged = false;
  bool reduced_factors = false;  // fewer positive eigenvalues than requested
  bool heywood = false;          // some communality exceeded 1 and was clipped
};

/// Shared/personalized assignment of one layer's hidden units.
struct Partition {
  std::size_t layer_id = 0;
  std::vector<std::uint8_t> zeta;             // 1 = shared
  std::vector<std::size_t> shared_indices;
  std::vector<std::size_t> personalized_indices;
  std::vector<double> nu;                     // communalities, clipped to [0,1]
  double resolved_tau = 0.0;
  std::size_t factors = 0;

  std::size_t units() const { return zeta.size(); }
  bool shared(std::size_t j) const { return zeta[j] != 0; }

  static Partition uniform(std::size_t layer_id, std::size_t units, bool shared);
};

/// Stack K client weight matrices (each d_in x d_units, one column per unit)
/// into the factor-analysis input of shape (d_in * K) x d_units; rows are
/// client-major.
DenseMatrix assemble_input_matrix(std::span<const DenseMatrix> client_weights);

/// Smallest m whose cumulative variability ratio reaches kappa. Negative
/// eigenvalues are clipped to zero before the ratio is formed.
std::size_t select_num_factors(std::span<const double> eigenvalues, double kappa);

/// Iterated principal-factor estimation of the loading matrix from a
/// correlation matrix with unit diagonal.
LoadingMatrix estimate_loadings(const DenseMatrix& correlation, std::size_t factors,
                                const FactorConfig& cfg);

/// nu_j = sum_m a_jm^2, clipped into [0,1].
std::vector<double> communalities(const LoadingMatrix& lm);

Partition threshold_split(std::span<const double> nu, const TauSpec& tau);

/// Full pipeline: assemble -> standardize -> correlation -> factor count ->
/// loadings -> communalities -> split. Zero-variance unit columns get nu = 0
/// and are therefore personalized.
Partition decompose(std::span<const DenseMatrix> client_weights,
                    const FactorConfig& cfg);

}  // namespace fedfac
