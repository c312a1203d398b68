#include "fedfac/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedfac {

double digamma(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("digamma: x must be positive");
  double value = 0.0;
  while (x < 6.0) {
    value -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  value += std::log(x) - 0.5 * inv;
  value -= inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 -
                   inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
  return value;
}

double knn_entropy(std::span<const double> samples, std::size_t k) {
  const std::size_t n = samples.size();
  if (k < 1 || n <= k) {
    throw std::invalid_argument("knn_entropy: need n > k >= 1");
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());

  double log_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // k-th nearest neighbor in one dimension: expand a window around i in
    // the sorted order, taking the closer side first.
    std::size_t lo = i;
    std::size_t hi = i;
    double eps = 0.0;
    for (std::size_t step = 0; step < k; ++step) {
      const double left = lo > 0 ? sorted[i] - sorted[lo - 1] : -1.0;
      const double right = hi + 1 < n ? sorted[hi + 1] - sorted[i] : -1.0;
      if (left >= 0.0 && (right < 0.0 || left <= right)) {
        eps = left;
        --lo;
      } else {
        eps = right;
        ++hi;
      }
    }
    log_sum += std::log(std::max(eps, 1e-12));
  }
  return digamma(static_cast<double>(n)) - digamma(static_cast<double>(k)) +
         std::log(2.0) + log_sum / static_cast<double>(n);
}

EntropyReport neuron_entropy_report(std::span<const SplitParams> client_models,
                                    std::span<const DenseMatrix> probes,
                                    std::size_t layer, std::size_t k,
                                    ProbeStatistic statistic) {
  const std::size_t clients = client_models.size();
  if (clients != probes.size()) {
    throw std::invalid_argument("neuron_entropy_report: models/probes mismatch");
  }
  if (clients < k + 2) {
    throw std::invalid_argument("neuron_entropy_report: need at least k+2 clients");
  }
  const auto& cfg = client_models.front().cfg;
  if (layer >= cfg.hidden_count()) {
    throw std::invalid_argument("neuron_entropy_report: layer out of range");
  }
  const std::size_t width = cfg.hidden_width(layer);

  // per_client(c, u) = summary of unit u's activation on client c's probe.
  DenseMatrix per_client(clients, width);
  for (std::size_t c = 0; c < clients; ++c) {
    const DenseMatrix& probe = probes[c];
    if (probe.rows() == 0) {
      throw std::invalid_argument("neuron_entropy_report: empty probe set");
    }
    // Propagate the probe through the earlier layers of this client's model.
    DenseMatrix act = probe;
    for (std::size_t l = 0; l <= layer; ++l) {
      const DenseMatrix& w = client_models[c].hidden[l];
      DenseMatrix next(act.rows(), w.rows());
      for (std::size_t i = 0; i < act.rows(); ++i) {
        const auto xi = act.row(i);
        for (std::size_t u = 0; u < w.rows(); ++u) {
          double z = 0.0;
          const auto wu = w.row(u);
          for (std::size_t j = 0; j < wu.size(); ++j) z += wu[j] * xi[j];
          next(i, u) = z >= 0.0 ? z : 0.0;
        }
      }
      act = std::move(next);
    }
    for (std::size_t u = 0; u < width; ++u) {
      if (statistic == ProbeStatistic::kMean) {
        double mean = 0.0;
        for (std::size_t i = 0; i < act.rows(); ++i) mean += act(i, u);
        per_client(c, u) = mean / static_cast<double>(act.rows());
      } else {
        std::vector<double> column(act.rows());
        for (std::size_t i = 0; i < act.rows(); ++i) column[i] = act(i, u);
        std::sort(column.begin(), column.end());
        const std::size_t mid = column.size() / 2;
        per_client(c, u) = column.size() % 2 == 1
                               ? column[mid]
                               : 0.5 * (column[mid - 1] + column[mid]);
      }
    }
  }

  EntropyReport report;
  report.k = k;
  report.statistic = statistic;
  report.entropy.resize(width);
  std::vector<double> column(clients);
  for (std::size_t u = 0; u < width; ++u) {
    for (std::size_t c = 0; c < clients; ++c) column[c] = per_client(c, u);
    report.entropy[u] = std::max(knn_entropy(column, k), kEntropyFloor);
  }
  return report;
}

double stability_fraction(std::span<const std::uint8_t> zeta_prev,
                          std::span<const std::uint8_t> zeta_curr) {
  if (zeta_prev.size() != zeta_curr.size() || zeta_prev.empty()) {
    throw std::invalid_argument("stability_fraction: length mismatch");
  }
  std::size_t same = 0;
  for (std::size_t i = 0; i < zeta_prev.size(); ++i) {
    if ((zeta_prev[i] != 0) == (zeta_curr[i] != 0)) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(zeta_prev.size());
}

double weighted_accuracy(std::span<const std::size_t> sizes,
                         std::span<const double> accuracies) {
  if (sizes.empty() || sizes.size() != accuracies.size()) {
    throw std::invalid_argument("weighted_accuracy: empty or mismatched inputs");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0) throw std::invalid_argument("weighted_accuracy: zero weight");
    num += static_cast<double>(sizes[i]) * accuracies[i];
    den += static_cast<double>(sizes[i]);
  }
  return num / den;
}

}  // namespace fedfac
