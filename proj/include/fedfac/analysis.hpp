#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedfac/datagen.hpp"
#include "fedfac/model.hpp"

namespace fedfac {

double digamma(double x);

/// One-dimensional Kozachenko-Leonenko differential entropy estimate:
/// psi(n) - psi(k) + ln 2 + mean_i ln eps_i, where eps_i is the distance
/// from sample i to its k-th nearest neighbor. Distances below 1e-12 are
/// lifted to 1e-12 so duplicated values cannot produce log 0.
double knn_entropy(std::span<const double> samples, std::size_t k);

enum class ProbeStatistic { kMean, kMedian };

/// Per-neuron dispersion of representations across clients. Floor applied
/// to degenerate (all-equal) estimates.
struct EntropyReport {
  std::vector<double> entropy;  // one value per probed neuron
  std::size_t k = 0;
  ProbeStatistic statistic = ProbeStatistic::kMean;
};

constexpr double kEntropyFloor = -50.0;

/// For every unit of the given hidden layer: summarize its activation over
/// each client's probe rows into one scalar per client, then estimate the
/// entropy of those scalars across clients.
EntropyReport neuron_entropy_report(std::span<const SplitParams> client_models,
                                    std::span<const DenseMatrix> probes,
                                    std::size_t layer, std::size_t k,
                                    ProbeStatistic statistic = ProbeStatistic::kMean);

/// Fraction of positions on which the two assignments agree.
double stability_fraction(std::span<const std::uint8_t> zeta_prev,
                          std::span<const std::uint8_t> zeta_curr);

/// Sum n_c * acc_c / sum n_c.
double weighted_accuracy(std::span<const std::size_t> sizes,
                         std::span<const double> accuracies);

}  // namespace fedfac
