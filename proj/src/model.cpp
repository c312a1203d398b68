#include "fedfac/model.hpp"

#include "fedfac/eig.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedfac {
namespace {

constexpr double kProbClamp = 1e-12;

double relu(double z) { return z >= 0.0 ? z : 0.0; }

// The paper's indicator convention: active at exactly zero.
double relu_mask(double z) { return z >= 0.0 ? 1.0 : 0.0; }

struct ForwardCache {
  std::vector<DenseMatrix> pre;          // pre-activations per hidden layer
  std::vector<DenseMatrix> activations;  // activations[0] is the input
  std::vector<double> outputs;
};

ForwardCache run_forward(const SplitParams& params, const DenseMatrix& x) {
  const std::size_t layers = params.hidden.size();
  ForwardCache cache;
  cache.pre.resize(layers);
  cache.activations.resize(layers + 1);
  cache.activations[0] = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const DenseMatrix& w = params.hidden[l];
    const DenseMatrix& in = cache.activations[l];
    DenseMatrix pre(in.rows(), w.rows());
    for (std::size_t i = 0; i < in.rows(); ++i) {
      const auto xi = in.row(i);
      for (std::size_t u = 0; u < w.rows(); ++u) {
        const auto wu = w.row(u);
        double acc = 0.0;
        for (std::size_t k = 0; k < wu.size(); ++k) acc += wu[k] * xi[k];
        pre(i, u) = acc;
      }
    }
    DenseMatrix act(pre.rows(), pre.cols());
    for (std::size_t i = 0; i < pre.values().size(); ++i) {
      act.values()[i] = relu(pre.values()[i]);
    }
    cache.pre[l] = std::move(pre);
    cache.activations[l + 1] = std::move(act);
  }
  const auto scales = params.head_scales();
  const DenseMatrix& last = cache.activations[layers];
  cache.outputs.assign(last.rows(), 0.0);
  for (std::size_t i = 0; i < last.rows(); ++i) {
    double acc = 0.0;
    const auto row = last.row(i);
    for (std::size_t u = 0; u < row.size(); ++u) {
      acc += scales[u] * params.head[u] * row[u];
    }
    cache.outputs[i] = acc;
  }
  return cache;
}

ParamGradients backward(const SplitParams& params, const ForwardCache& cache,
                        std::span<const double> dloss_dh) {
  const std::size_t layers = params.hidden.size();
  const std::size_t n = dloss_dh.size();
  const auto scales = params.head_scales();

  ParamGradients grads;
  grads.hidden.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    grads.hidden[l] = DenseMatrix(params.hidden[l].rows(), params.hidden[l].cols());
  }
  grads.head.assign(params.head.size(), 0.0);

  const DenseMatrix& last = cache.activations[layers];
  if (params.cfg.train_output_weights) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = last.row(i);
      for (std::size_t u = 0; u < row.size(); ++u) {
        grads.head[u] += dloss_dh[i] * scales[u] * row[u];
      }
    }
  }

  DenseMatrix d_act(n, params.head.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t u = 0; u < params.head.size(); ++u) {
      d_act(i, u) = dloss_dh[i] * scales[u] * params.head[u];
    }
  }

  for (std::size_t l = layers; l-- > 0;) {
    const DenseMatrix& pre = cache.pre[l];
    const DenseMatrix& in = cache.activations[l];
    const DenseMatrix& w = params.hidden[l];
    DenseMatrix d_pre(n, w.rows());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t u = 0; u < w.rows(); ++u) {
        d_pre(i, u) = d_act(i, u) * relu_mask(pre(i, u));
      }
    }
    DenseMatrix& gw = grads.hidden[l];
    for (std::size_t i = 0; i < n; ++i) {
      const auto xi = in.row(i);
      for (std::size_t u = 0; u < w.rows(); ++u) {
        const double g = d_pre(i, u);
        if (g == 0.0) continue;
        auto grow = gw.row(u);
        for (std::size_t k = 0; k < xi.size(); ++k) grow[k] += g * xi[k];
      }
    }
    if (l > 0) {
      DenseMatrix d_prev(n, in.cols());
      for (std::size_t i = 0; i < n; ++i) {
        auto out = d_prev.row(i);
        for (std::size_t u = 0; u < w.rows(); ++u) {
          const double g = d_pre(i, u);
          if (g == 0.0) continue;
          const auto wu = w.row(u);
          for (std::size_t k = 0; k < wu.size(); ++k) out[k] += g * wu[k];
        }
      }
      d_act = std::move(d_prev);
    }
  }
  return grads;
}

std::vector<double> loss_gradient_wrt_outputs(const ModelConfig& cfg,
                                              std::span<const double> outputs,
                                              std::span<const double> y) {
  const double inv_n = 1.0 / static_cast<double>(outputs.size());
  std::vector<double> g(outputs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (cfg.loss == LossKind::kQuadratic) {
      g[i] = (outputs[i] - y[i]) * inv_n;
    } else {
      g[i] = (sigmoid(outputs[i]) - y[i]) * inv_n;
    }
  }
  return g;
}

double predicted_label_from_output(const ModelConfig& cfg, double h) {
  if (cfg.loss == LossKind::kBinaryCrossEntropy) return h > 0.0 ? 1.0 : 0.0;
  return h > 0.5 ? 1.0 : 0.0;
}

}  // namespace

void ModelConfig::validate() const {
  if (layer_widths.size() < 3) {
    throw std::invalid_argument("model: need input, at least one hidden layer, output");
  }
  if (layer_widths.back() != 1) {
    throw std::invalid_argument("model: output width must be 1");
  }
  for (std::size_t w : layer_widths) {
    if (w == 0) throw std::invalid_argument("model: zero layer width");
  }
  if (init_scale < 0.0) throw std::invalid_argument("model: init_scale must be >= 0");
}

std::vector<double> SplitParams::head_scales() const {
  const std::size_t last = cfg.hidden_count() - 1;
  const std::size_t width = cfg.hidden_width(last);
  std::vector<double> scales(width, 1.0);
  if (!cfg.scale_by_sqrt_width) return scales;
  const auto it = partitions.find(last);
  if (it == partitions.end()) {
    const double s = 1.0 / std::sqrt(static_cast<double>(width));
    std::fill(scales.begin(), scales.end(), s);
    return scales;
  }
  const Partition& part = it->second;
  const std::size_t shared = part.shared_indices.size();
  const std::size_t personalized = part.personalized_indices.size();
  const double s_shared = shared > 0 ? 1.0 / std::sqrt(static_cast<double>(shared)) : 0.0;
  const double s_pers =
      personalized > 0 ? 1.0 / std::sqrt(static_cast<double>(personalized)) : 0.0;
  for (std::size_t u = 0; u < width; ++u) {
    scales[u] = part.shared(u) ? s_shared : s_pers;
  }
  return scales;
}

SplitParams init_params(const ModelConfig& cfg,
                        const std::vector<std::size_t>& split_layers,
                        const std::map<std::size_t, Partition>& partition_init,
                        RngStream& rng) {
  cfg.validate();
  SplitParams params;
  params.cfg = cfg;
  const std::size_t layers = cfg.hidden_count();
  for (std::size_t l : split_layers) {
    if (l >= layers) {
      throw std::invalid_argument(
          "init_params: split set names a non-hidden layer; the output layer is "
          "always shared");
    }
    const auto it = partition_init.find(l);
    if (it == partition_init.end()) {
      throw std::invalid_argument("init_params: split layer has no partition");
    }
    if (it->second.units() != cfg.hidden_width(l)) {
      throw std::invalid_argument("init_params: partition size disagrees with width");
    }
    params.partitions[l] = it->second;
  }
  params.hidden.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    auto layer_rng = rng.child("layer", static_cast<std::int64_t>(l));
    params.hidden[l] = DenseMatrix(cfg.hidden_width(l), cfg.layer_widths[l]);
    layer_rng.fill_normal(params.hidden[l], cfg.init_scale);
  }
  auto head_rng = rng.child("head", 0);
  params.head.resize(cfg.hidden_width(layers - 1));
  for (double& a : params.head) a = head_rng.sign();
  return params;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double forward(const SplitParams& params, std::span<const double> x) {
  if (x.size() != params.cfg.input_dim()) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  DenseMatrix m(1, x.size());
  std::copy(x.begin(), x.end(), m.values().begin());
  return run_forward(params, m).outputs.front();
}

std::vector<double> batch_forward(const SplitParams& params, const DenseMatrix& x) {
  if (x.cols() != params.cfg.input_dim()) {
    throw std::invalid_argument("batch_forward: input dimension mismatch");
  }
  return run_forward(params, x).outputs;
}

double predict_probability(const SplitParams& params, std::span<const double> x) {
  const double h = forward(params, x);
  return params.cfg.loss == LossKind::kBinaryCrossEntropy ? sigmoid(h) : h;
}

std::vector<double> batch_probabilities(const SplitParams& params, const DenseMatrix& x) {
  auto h = batch_forward(params, x);
  if (params.cfg.loss == LossKind::kBinaryCrossEntropy) {
    for (double& v : h) v = sigmoid(v);
  }
  return h;
}

double loss(const SplitParams& params, const DenseMatrix& x, std::span<const double> y) {
  if (y.empty() || x.rows() != y.size()) {
    throw std::invalid_argument("loss: empty or mismatched dataset");
  }
  const auto h = batch_forward(params, x);
  const double inv_n = 1.0 / static_cast<double>(y.size());
  double total = 0.0;
  if (params.cfg.loss == LossKind::kQuadratic) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      total += 0.5 * (h[i] - y[i]) * (h[i] - y[i]);
    }
  } else {
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double p = std::clamp(sigmoid(h[i]), kProbClamp, 1.0 - kProbClamp);
      total -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
    }
  }
  return total * inv_n;
}

double accuracy(const SplitParams& params, const DenseMatrix& x,
                std::span<const double> y) {
  if (y.empty()) throw std::invalid_argument("accuracy: empty dataset");
  const auto h = batch_forward(params, x);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double label = predicted_label_from_output(params.cfg, h[i]);
    if ((label > 0.5) == (y[i] > 0.5)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

ParamGradients local_gradients(const SplitParams& params, const DenseMatrix& x,
                               std::span<const double> y) {
  if (y.empty() || x.rows() != y.size()) {
    throw std::invalid_argument("local_gradients: empty or mismatched batch");
  }
  const auto cache = run_forward(params, x);
  const auto g = loss_gradient_wrt_outputs(params.cfg, cache.outputs, y);
  return backward(params, cache, g);
}

ParamDeltas run_local_epochs(SplitParams& params, const DenseMatrix& x,
                             std::span<const double> y, std::size_t epochs,
                             std::size_t batch_size, double eta_local,
                             RngStream& rng) {
  if (epochs == 0) throw std::invalid_argument("run_local_epochs: epochs must be >= 1");
  const std::size_t n = y.size();
  if (n == 0) throw std::invalid_argument("run_local_epochs: empty dataset");

  const SplitParams initial = params;
  const bool full_batch = batch_size == 0 || batch_size >= n;

  DenseMatrix batch_x;
  std::vector<double> batch_y;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    if (full_batch) {
      const auto grads = local_gradients(params, x, y);
      for (std::size_t l = 0; l < params.hidden.size(); ++l) {
        auto& w = params.hidden[l].values();
        const auto& g = grads.hidden[l].values();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= eta_local * g[i];
      }
      if (params.cfg.train_output_weights) {
        for (std::size_t u = 0; u < params.head.size(); ++u) {
          params.head[u] -= eta_local * grads.head[u];
        }
      }
      continue;
    }
    const auto order = rng.permutation(n);
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t count = std::min(batch_size, n - start);
      batch_x = DenseMatrix(count, x.cols());
      batch_y.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t src = order[start + i];
        std::copy(x.row(src).begin(), x.row(src).end(), batch_x.row(i).begin());
        batch_y[i] = y[src];
      }
      const auto grads = local_gradients(params, batch_x, batch_y);
      for (std::size_t l = 0; l < params.hidden.size(); ++l) {
        auto& w = params.hidden[l].values();
        const auto& g = grads.hidden[l].values();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= eta_local * g[i];
      }
      if (params.cfg.train_output_weights) {
        for (std::size_t u = 0; u < params.head.size(); ++u) {
          params.head[u] -= eta_local * grads.head[u];
        }
      }
    }
  }

  ParamDeltas deltas;
  deltas.hidden.resize(params.hidden.size());
  for (std::size_t l = 0; l < params.hidden.size(); ++l) {
    deltas.hidden[l] = params.hidden[l];
    auto& d = deltas.hidden[l].values();
    const auto& w0 = initial.hidden[l].values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= w0[i];
  }
  deltas.head.resize(params.head.size());
  for (std::size_t u = 0; u < params.head.size(); ++u) {
    deltas.head[u] = params.head[u] - initial.head[u];
  }
  return deltas;
}

namespace {

bool norm_exceeds_one(const DenseMatrix& x) {
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double sq = 0.0;
    for (double v : x.row(i)) sq += v * v;
    if (sq > 1.0 + 1e-9) return true;
  }
  return false;
}

void finish_lambdas(GramDiagnostics& diag) {
  diag.lambda_shared = sym_eig(diag.h_shared).eigenvalues.back();
  diag.lambda_personalized = sym_eig(diag.h_personalized).eigenvalues.back();
}

}  // namespace

GramDiagnostics gram_matrices(const DenseMatrix& x,
                              std::span<const std::size_t> sample_client,
                              const DenseMatrix& first_layer,
                              const Partition& partition) {
  const std::size_t n = x.rows();
  if (sample_client.size() != n) {
    throw std::invalid_argument("gram_matrices: client map length mismatch");
  }
  if (first_layer.cols() != x.cols() || first_layer.rows() != partition.units()) {
    throw std::invalid_argument("gram_matrices: weight/partition shape mismatch");
  }
  GramDiagnostics diag;
  diag.norm_warning = norm_exceeds_one(x);

  // Activation indicators per (unit, sample).
  const std::size_t units = first_layer.rows();
  DenseMatrix active(units, n);
  for (std::size_t u = 0; u < units; ++u) {
    const auto wu = first_layer.row(u);
    for (std::size_t i = 0; i < n; ++i) {
      const auto xi = x.row(i);
      double z = 0.0;
      for (std::size_t k = 0; k < xi.size(); ++k) z += wu[k] * xi[k];
      active(u, i) = relu_mask(z);
    }
  }

  DenseMatrix dots(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < x.cols(); ++k) d += x(i, k) * x(j, k);
      dots(i, j) = dots(j, i) = d;
    }
  }

  const auto& shared = partition.shared_indices;
  const auto& personalized = partition.personalized_indices;
  diag.h_shared = DenseMatrix(n, n);
  diag.h_personalized = DenseMatrix(n, n);
  diag.empty_personalized = personalized.empty();

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      if (!shared.empty()) {
        double acc = 0.0;
        for (std::size_t u : shared) acc += active(u, i) * active(u, j);
        const double v = dots(i, j) * acc / static_cast<double>(shared.size());
        diag.h_shared(i, j) = diag.h_shared(j, i) = v;
      }
      if (!personalized.empty() && sample_client[i] == sample_client[j]) {
        double acc = 0.0;
        for (std::size_t u : personalized) acc += active(u, i) * active(u, j);
        const double v = dots(i, j) * acc / static_cast<double>(personalized.size());
        diag.h_personalized(i, j) = diag.h_personalized(j, i) = v;
      }
    }
  }
  finish_lambdas(diag);
  return diag;
}

GramDiagnostics ntk_limit_estimate(const DenseMatrix& x,
                                   std::span<const std::size_t> sample_client,
                                   std::size_t mc_samples, RngStream& rng) {
  const std::size_t n = x.rows();
  if (sample_client.size() != n) {
    throw std::invalid_argument("ntk_limit_estimate: client map length mismatch");
  }
  if (mc_samples < 1000) {
    throw std::invalid_argument("ntk_limit_estimate: need at least 1000 samples");
  }
  GramDiagnostics diag;
  diag.norm_warning = norm_exceeds_one(x);
  diag.mc_samples = mc_samples;

  DenseMatrix joint(n, n);  // counts of jointly active pairs
  std::vector<double> w(x.cols());
  std::vector<std::uint8_t> active(n);
  for (std::size_t s = 0; s < mc_samples; ++s) {
    for (double& v : w) v = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
      double z = 0.0;
      const auto xi = x.row(i);
      for (std::size_t k = 0; k < xi.size(); ++k) z += w[k] * xi[k];
      active[i] = z >= 0.0 ? 1 : 0;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i; j < n; ++j) {
        if (active[j]) joint(i, j) += 1.0;
      }
    }
  }

  diag.h_shared = DenseMatrix(n, n);
  diag.h_personalized = DenseMatrix(n, n);
  diag.standard_error = DenseMatrix(n, n);
  const double inv_s = 1.0 / static_cast<double>(mc_samples);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < x.cols(); ++k) dot += x(i, k) * x(j, k);
      const double p = joint(i, j) * inv_s;
      const double value = dot * p;
      diag.h_shared(i, j) = diag.h_shared(j, i) = value;
      const double se = std::abs(dot) * std::sqrt(std::max(0.0, p * (1.0 - p)) * inv_s);
      diag.standard_error(i, j) = diag.standard_error(j, i) = se;
      if (sample_client[i] == sample_client[j]) {
        diag.h_personalized(i, j) = diag.h_personalized(j, i) = value;
      }
    }
  }
  finish_lambdas(diag);
  return diag;
}

}  // namespace fedfac
