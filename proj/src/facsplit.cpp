#include "fedfac/facsplit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fedfac/eig.hpp"
#include "fedfac/stats.hpp"

namespace fedfac {
namespace {

// Loadings from the top positive eigenpairs: columns sqrt(gamma_j) * u_j.
// Returns the number of positive eigenpairs actually used.
std::size_t loadings_from_spectrum(const EigenResult& eig, std::size_t factors,
                                   DenseMatrix& out) {
  const std::size_t n = eig.eigenvalues.size();
  std::size_t usable = 0;
  while (usable < factors && usable < n && eig.eigenvalues[usable] > 0.0) ++usable;
  out = DenseMatrix(n, usable);
  for (std::size_t m = 0; m < usable; ++m) {
    const double scale = std::sqrt(eig.eigenvalues[m]);
    for (std::size_t j = 0; j < n; ++j) out(j, m) = scale * eig.eigenvectors(j, m);
  }
  return usable;
}

double quantile_linear(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace

Partition Partition::uniform(std::size_t layer_id, std::size_t units, bool shared) {
  Partition p;
  p.layer_id = layer_id;
  p.zeta.assign(units, shared ? 1 : 0);
  p.nu.assign(units, 0.0);
  for (std::size_t j = 0; j < units; ++j) {
    (shared ? p.shared_indices : p.personalized_indices).push_back(j);
  }
  p.resolved_tau = shared ? -0.1 : 0.1;
  return p;
}

DenseMatrix assemble_input_matrix(std::span<const DenseMatrix> client_weights) {
  if (client_weights.size() < 2) {
    throw std::invalid_argument(
        "assemble_input_matrix: need at least 2 clients for cross-client variation");
  }
  const std::size_t d_in = client_weights.front().rows();
  const std::size_t units = client_weights.front().cols();
  for (const auto& w : client_weights) {
    if (w.rows() != d_in || w.cols() != units) {
      throw std::invalid_argument("assemble_input_matrix: client shapes disagree");
    }
  }
  DenseMatrix z(d_in * client_weights.size(), units);
  for (std::size_t c = 0; c < client_weights.size(); ++c) {
    const DenseMatrix& w = client_weights[c];
    for (std::size_t r = 0; r < d_in; ++r) {
      for (std::size_t j = 0; j < units; ++j) z(c * d_in + r, j) = w(r, j);
    }
  }
  return z;
}

std::size_t select_num_factors(std::span<const double> eigenvalues, double kappa) {
  if (!(kappa > 0.0 && kappa <= 1.0)) {
    throw std::invalid_argument("select_num_factors: kappa must lie in (0,1]");
  }
  double total = 0.0;
  for (double g : eigenvalues) total += std::max(0.0, g);
  if (total <= 0.0) {
    throw std::invalid_argument("select_num_factors: spectrum has no positive mass");
  }
  double acc = 0.0;
  for (std::size_t m = 0; m < eigenvalues.size(); ++m) {
    acc += std::max(0.0, eigenvalues[m]);
    if (acc / total >= kappa - 1e-15) return m + 1;
  }
  return eigenvalues.size();
}

LoadingMatrix estimate_loadings(const DenseMatrix& correlation, std::size_t factors,
                                const FactorConfig& cfg) {
  const std::size_t n = correlation.rows();
  if (n != correlation.cols()) {
    throw std::invalid_argument("estimate_loadings: correlation matrix not square");
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (std::abs(correlation(j, j) - 1.0) > 1e-6) {
      throw std::invalid_argument("estimate_loadings: diagonal must be 1");
    }
  }
  if (factors == 0 || factors > n) {
    throw std::invalid_argument("estimate_loadings: factor count out of range");
  }

  LoadingMatrix lm;
  lm.factors = factors;

  // Initialize from the correlation matrix itself.
  auto eig = sym_eig(correlation);
  std::size_t used = loadings_from_spectrum(eig, factors, lm.loadings);
  if (used < factors) lm.reduced_factors = true;
  lm.factors = used;

  std::vector<double> psi(n, 0.0);
  auto refresh_psi = [&](std::vector<double>& out) {
    for (std::size_t j = 0; j < n; ++j) {
      double communality = 0.0;
      for (std::size_t m = 0; m < lm.loadings.cols(); ++m) {
        communality += lm.loadings(j, m) * lm.loadings(j, m);
      }
      out[j] = correlation(j, j) - communality;
    }
  };
  refresh_psi(psi);

  for (std::size_t iter = 1; iter <= cfg.max_iter; ++iter) {
    lm.iterations_used = iter;
    // Reduced correlation: replace the diagonal with current communalities.
    DenseMatrix reduced = correlation;
    for (std::size_t j = 0; j < n; ++j) reduced(j, j) = correlation(j, j) - psi[j];
    eig = sym_eig(reduced);
    used = loadings_from_spectrum(eig, factors, lm.loadings);
    if (used < factors) {
      lm.reduced_factors = true;
      lm.factors = used;
      if (used == 0) break;  // nothing positive left; keep previous psi
    }
    std::vector<double> next_psi(n, 0.0);
    refresh_psi(next_psi);
    double delta = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      delta = std::max(delta, std::abs(next_psi[j] - psi[j]));
    }
    psi = std::move(next_psi);
    if (delta < cfg.tol) {
      lm.converged = true;
      break;
    }
  }

  lm.psi = psi;
  for (std::size_t j = 0; j < n; ++j) {
    double communality = 0.0;
    for (std::size_t m = 0; m < lm.loadings.cols(); ++m) {
      communality += lm.loadings(j, m) * lm.loadings(j, m);
    }
    if (communality > 1.0 + 1e-6) lm.heywood = true;
  }
  return lm;
}

std::vector<double> communalities(const LoadingMatrix& lm) {
  std::vector<double> nu(lm.loadings.rows(), 0.0);
  for (std::size_t j = 0; j < lm.loadings.rows(); ++j) {
    double acc = 0.0;
    for (std::size_t m = 0; m < lm.loadings.cols(); ++m) {
      acc += lm.loadings(j, m) * lm.loadings(j, m);
    }
    nu[j] = std::clamp(acc, 0.0, 1.0);
  }
  return nu;
}

Partition threshold_split(std::span<const double> nu, const TauSpec& tau) {
  if (nu.empty()) throw std::invalid_argument("threshold_split: empty communalities");
  double cut = 0.0;
  switch (tau.kind) {
    case TauKind::kQuantile: {
      if (!(tau.value > 0.0 && tau.value < 1.0)) {
        throw std::invalid_argument("threshold_split: quantile must lie in (0,1)");
      }
      cut = quantile_linear(std::vector<double>(nu.begin(), nu.end()), tau.value);
      break;
    }
    case TauKind::kAbsolute:
      cut = tau.value;
      break;
    case TauKind::kAllPersonalized:
      cut = *std::max_element(nu.begin(), nu.end()) + 0.1;
      break;
    case TauKind::kAllShared:
      cut = *std::min_element(nu.begin(), nu.end()) - 0.1;
      break;
  }
  Partition p;
  p.nu.assign(nu.begin(), nu.end());
  p.zeta.resize(nu.size());
  p.resolved_tau = cut;
  for (std::size_t j = 0; j < nu.size(); ++j) {
    const bool shared = nu[j] >= cut;
    p.zeta[j] = shared ? 1 : 0;
    (shared ? p.shared_indices : p.personalized_indices).push_back(j);
  }
  return p;
}

Partition decompose(std::span<const DenseMatrix> client_weights,
                    const FactorConfig& cfg) {
  const DenseMatrix z = assemble_input_matrix(client_weights);
  const auto standardized = column_standardize(z);
  const std::size_t units = z.cols();

  std::vector<std::size_t> live;
  for (std::size_t j = 0; j < units; ++j) {
    if (!standardized.zero_variance[j]) live.push_back(j);
  }
  std::vector<double> nu(units, 0.0);
  std::size_t factors = 0;
  if (!live.empty()) {
    DenseMatrix z_live(z.rows(), live.size());
    for (std::size_t r = 0; r < z.rows(); ++r) {
      for (std::size_t k = 0; k < live.size(); ++k) {
        z_live(r, k) = standardized.values(r, live[k]);
      }
    }
    const DenseMatrix r = correlation_matrix(z_live);
    const auto eig = sym_eig(r);
    factors = select_num_factors(eig.eigenvalues, cfg.kappa);
    const auto lm = estimate_loadings(r, factors, cfg);
    factors = lm.factors;
    const auto live_nu = communalities(lm);
    for (std::size_t k = 0; k < live.size(); ++k) nu[live[k]] = live_nu[k];
  }
  Partition p = threshold_split(nu, cfg.tau);
  p.factors = factors;
  return p;
}

}  // namespace fedfac
