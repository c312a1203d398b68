#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "fedfac/facsplit.hpp"
#include "fedfac/matrix.hpp"
#include "fedfac/rng.hpp"

namespace fedfac {

enum class LossKind { kQuadratic, kBinaryCrossEntropy };

/// Bias-free ReLU network with a scalar linear head. Hidden layers listed in
/// the split set carry a shared/personalized partition of their units; the
/// head is always globally shared.
struct ModelConfig {
  std::vector<std::size_t> layer_widths;  // input, hidden..., output(=1)
  LossKind loss = LossKind::kQuadratic;
  /// Scale each head unit's contribution by 1/sqrt(size of its group) on the
  /// last hidden layer (1/sqrt(width) when that layer is unsplit).
  bool scale_by_sqrt_width = true;
  bool train_output_weights = false;
  double init_scale = 1.0;

  std::size_t input_dim() const { return layer_widths.front(); }
  std::size_t hidden_count() const { return layer_widths.size() - 2; }
  std::size_t hidden_width(std::size_t l) const { return layer_widths[l + 1]; }
  void validate() const;
};

/// One participant's full parameter set: hidden weight matrices (one row per
/// unit), head weights, and the partition of each split layer.
struct SplitParams {
  ModelConfig cfg;
  std::vector<DenseMatrix> hidden;       // hidden[l]: width(l) x fan_in(l)
  std::vector<double> head;              // length = last hidden width
  std::map<std::size_t, Partition> partitions;  // keyed by hidden layer index
  long long client_id = -1;

  /// Per-unit multiplier applied between the last hidden layer and the head.
  std::vector<double> head_scales() const;
};

struct ParamDeltas {
  std::vector<DenseMatrix> hidden;
  std::vector<double> head;
};
using ParamGradients = ParamDeltas;

/// Fresh parameters; weights ~ N(0, init_scale^2), head entries uniform on
/// {-1,+1}. split_layers entries must be valid hidden-layer indices.
SplitParams init_params(const ModelConfig& cfg,
                        const std::vector<std::size_t>& split_layers,
                        const std::map<std::size_t, Partition>& partition_init,
                        RngStream& rng);

double forward(const SplitParams& params, std::span<const double> x);
std::vector<double> batch_forward(const SplitParams& params, const DenseMatrix& x);

double sigmoid(double z);
/// Predicted probability of class 1: sigmoid(h) under BCE, raw h otherwise.
double predict_probability(const SplitParams& params, std::span<const double> x);
std::vector<double> batch_probabilities(const SplitParams& params, const DenseMatrix& x);

double loss(const SplitParams& params, const DenseMatrix& x, std::span<const double> y);
double accuracy(const SplitParams& params, const DenseMatrix& x, std::span<const double> y);

/// Mean-over-batch gradients of the local objective by backpropagation.
/// The ReLU indicator is taken active at exactly zero.
ParamGradients local_gradients(const SplitParams& params, const DenseMatrix& x,
                               std::span<const double> y);

/// G epochs of mini-batch gradient descent; batch_size 0 means full batch.
/// Returns accumulated deltas (final minus initial) for every parameter.
ParamDeltas run_local_epochs(SplitParams& params, const DenseMatrix& x,
                             std::span<const double> y, std::size_t epochs,
                             std::size_t batch_size, double eta_local,
                             RngStream& rng);

struct GramDiagnostics {
  DenseMatrix h_shared;
  DenseMatrix h_personalized;
  double lambda_shared = 0.0;
  double lambda_personalized = 0.0;
  std::size_t mc_samples = 0;
  DenseMatrix standard_error;  // entrywise MC standard errors (limit estimate)
  bool norm_warning = false;   // some input row had Euclidean norm > 1
  bool empty_personalized = false;
};

/// Finite-width Gram matrices of a split first layer: the shared kernel
/// averages indicator products over shared units, the personalized kernel
/// over personalized units restricted to within-client blocks.
GramDiagnostics gram_matrices(const DenseMatrix& x,
                              std::span<const std::size_t> sample_client,
                              const DenseMatrix& first_layer,
                              const Partition& partition);

/// Monte-Carlo estimate of the limiting kernels under w ~ N(0, I). The
/// personalized kernel is the within-client restriction of the shared one.
GramDiagnostics ntk_limit_estimate(const DenseMatrix& x,
                                   std::span<const std::size_t> sample_client,
                                   std::size_t mc_samples, RngStream& rng);

}  // namespace fedfac
