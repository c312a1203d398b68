#include "fedfac/federation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "fedfac/parallel.hpp"

namespace fedfac {
namespace {

std::vector<double> normalized_weights(Weighting weighting,
                                       std::span<const std::size_t> sampled,
                                       const std::vector<ClientDataset>& data) {
  std::vector<double> w(sampled.size(), 1.0);
  if (weighting == Weighting::kSampleSize) {
    for (std::size_t i = 0; i < sampled.size(); ++i) {
      w[i] = static_cast<double>(data[sampled[i]].train_count());
    }
  }
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
  return w;
}

// Rows `indices` of every client delta, stacked into compact matrices.
std::vector<DenseMatrix> gather_rows(std::span<const ParamDeltas> deltas,
                                     std::size_t layer,
                                     std::span<const std::size_t> indices) {
  std::vector<DenseMatrix> out;
  out.reserve(deltas.size());
  for (const auto& d : deltas) {
    const DenseMatrix& full = d.hidden[layer];
    DenseMatrix sub(indices.size(), full.cols());
    for (std::size_t r = 0; r < indices.size(); ++r) {
      std::copy(full.row(indices[r]).begin(), full.row(indices[r]).end(),
                sub.row(r).begin());
    }
    out.push_back(std::move(sub));
  }
  return out;
}

DenseMatrix transpose_layer(const DenseMatrix& units_by_fanin) {
  return units_by_fanin.transposed();
}

std::vector<std::size_t> all_row_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

}  // namespace

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kFedAvg: return "fedavg";
    case Algorithm::kFedSplitTrue: return "fedsplit_true";
    case Algorithm::kFedFacStatic: return "fedfac_static";
    case Algorithm::kFedFacDynamic: return "fedfac_dynamic";
    case Algorithm::kRandomSplit: return "random_split";
    case Algorithm::kLocalOnly: return "local_only";
  }
  return "unknown";
}

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "fedavg") return Algorithm::kFedAvg;
  if (name == "fedsplit_true") return Algorithm::kFedSplitTrue;
  if (name == "fedfac_static") return Algorithm::kFedFacStatic;
  if (name == "fedfac_dynamic") return Algorithm::kFedFacDynamic;
  if (name == "random_split") return Algorithm::kRandomSplit;
  if (name == "local_only") return Algorithm::kLocalOnly;
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

void FederationConfig::validate() const {
  model.validate();
  if (local_epochs == 0) throw std::invalid_argument("train.local_epochs must be >= 1");
  if (eta_global <= 0.0) throw std::invalid_argument("train.eta_g must be positive");
  if (workers == 0) throw std::invalid_argument("workers must be >= 1");
  for (std::size_t l : split_layers) {
    if (l >= model.hidden_count()) {
      throw std::invalid_argument("split.layers entry exceeds hidden layer count");
    }
  }
  const bool uses_split = algorithm == Algorithm::kFedSplitTrue ||
                          algorithm == Algorithm::kFedFacStatic ||
                          algorithm == Algorithm::kFedFacDynamic ||
                          algorithm == Algorithm::kRandomSplit;
  if (uses_split && split_layers.empty()) {
    throw std::invalid_argument("split.layers must be nonempty for split algorithms");
  }
}

std::vector<std::size_t> sample_clients(std::size_t client_count, std::size_t k,
                                        RngStream& rng) {
  if (k == 0 || k > client_count) {
    throw std::invalid_argument("sample_clients: need 1 <= K <= C");
  }
  std::vector<std::size_t> pool = all_row_indices(client_count);
  if (k == client_count) return pool;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(client_count - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

DenseMatrix aggregate_shared(std::span<const DenseMatrix> deltas,
                             std::span<const double> weights) {
  if (deltas.empty() || deltas.size() != weights.size()) {
    throw std::invalid_argument("aggregate_shared: empty or mismatched inputs");
  }
  const std::size_t rows = deltas.front().rows();
  const std::size_t cols = deltas.front().cols();
  double total = 0.0;
  for (double w : weights) total += w;
  if (total <= 0.0) throw std::invalid_argument("aggregate_shared: weights sum to 0");

  DenseMatrix out(rows, cols);
  for (std::size_t c = 0; c < deltas.size(); ++c) {
    if (deltas[c].rows() != rows || deltas[c].cols() != cols) {
      throw std::invalid_argument("aggregate_shared: delta shapes disagree");
    }
    const double w = weights[c] / total;
    const auto& src = deltas[c].values();
    auto& dst = out.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += w * src[i];
  }
  return out;
}

void apply_global_update(DenseMatrix& shared, const DenseMatrix& delta,
                         double eta_global) {
  if (shared.rows() != delta.rows() || shared.cols() != delta.cols()) {
    throw std::invalid_argument("apply_global_update: shape mismatch");
  }
  auto& dst = shared.values();
  const auto& src = delta.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += eta_global * src[i];
}

DynamicRepartition repartition_dynamic(std::size_t layer, DenseMatrix& server_layer,
                                       const Partition& previous,
                                       std::span<const DenseMatrix> client_pre,
                                       std::span<const DenseMatrix> client_post,
                                       std::span<const double> weights,
                                       const FactorConfig& factor_cfg,
                                       FactorInput input) {
  if (client_post.size() < 2) {
    throw std::invalid_argument("repartition_dynamic: need at least 2 client updates");
  }
  std::vector<DenseMatrix> fa_input;
  fa_input.reserve(client_post.size());
  for (std::size_t c = 0; c < client_post.size(); ++c) {
    if (input == FactorInput::kWeights) {
      fa_input.push_back(transpose_layer(client_post[c]));
    } else {
      DenseMatrix delta = client_post[c];
      auto& v = delta.values();
      const auto& pre = client_pre[c].values();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= pre[i];
      fa_input.push_back(transpose_layer(delta));
    }
  }
  DynamicRepartition result;
  result.partition = decompose(fa_input, factor_cfg);
  result.partition.layer_id = layer;

  double total = 0.0;
  for (double w : weights) total += w;
  for (std::size_t j = 0; j < result.partition.units(); ++j) {
    const bool now_shared = result.partition.shared(j);
    const bool was_shared = previous.shared(j);
    if (now_shared != was_shared) ++result.flips;
    if (now_shared && !was_shared) {
      // The server holds no value for a previously personalized row; rebuild
      // it from the rows the clients held at broadcast time.
      auto dst = server_layer.row(j);
      std::fill(dst.begin(), dst.end(), 0.0);
      for (std::size_t c = 0; c < client_pre.size(); ++c) {
        const double w = weights[c] / total;
        const auto src = client_pre[c].row(j);
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += w * src[k];
      }
    }
  }
  return result;
}

void mask_group(SplitParams& params, MaskGroup group, RngStream& rng) {
  for (auto& [layer, partition] : params.partitions) {
    const auto& targets = group == MaskGroup::kShared ? partition.shared_indices
                                                      : partition.personalized_indices;
    auto layer_rng = rng.child("mask-layer", static_cast<std::int64_t>(layer));
    for (std::size_t idx : targets) {
      for (double& v : params.hidden[layer].row(idx)) {
        v = params.cfg.init_scale * layer_rng.normal();
      }
    }
  }
}

namespace {

struct Orchestrator {
  const FederationConfig& cfg;
  const std::vector<ClientDataset>& data;
  const TrueModel* truth;

  std::vector<std::size_t> active;  // client ids with nonempty train sets
  ServerState server;
  std::vector<ClientState> clients;
  std::vector<std::size_t> excluded;

  explicit Orchestrator(const FederationConfig& cfg_,
                        const std::vector<ClientDataset>& data_,
                        const TrueModel* truth_)
      : cfg(cfg_), data(data_), truth(truth_) {}

  bool is_split_algorithm() const {
    return cfg.algorithm == Algorithm::kFedSplitTrue ||
           cfg.algorithm == Algorithm::kFedFacStatic ||
           cfg.algorithm == Algorithm::kFedFacDynamic ||
           cfg.algorithm == Algorithm::kRandomSplit;
  }

  std::vector<std::size_t> effective_split_layers() const {
    return is_split_algorithm() ? cfg.split_layers : std::vector<std::size_t>{};
  }

  void pick_active_clients() {
    for (const auto& ds : data) {
      if (ds.train_count() == 0) {
        std::cerr << "warning: client " << ds.client_id
                  << " has no training data and is excluded\n";
        excluded.push_back(ds.client_id);
      } else {
        active.push_back(ds.client_id);
      }
    }
    if (active.empty()) {
      throw std::invalid_argument("run_experiment: every client has an empty train set");
    }
  }

  std::map<std::size_t, Partition> initial_partitions(const SplitParams& initial) {
    std::map<std::size_t, Partition> parts;
    const auto layers = effective_split_layers();
    if (layers.empty()) return parts;

    if (cfg.algorithm == Algorithm::kFedSplitTrue) {
      if (truth == nullptr) {
        throw std::invalid_argument("fedsplit_true requires the generating true model");
      }
      if (cfg.model.hidden_count() != 1 || layers != std::vector<std::size_t>{0}) {
        throw std::invalid_argument(
            "fedsplit_true supports exactly one split hidden layer (layer 1)");
      }
      if (cfg.model.hidden_width(0) != truth->total_units() ||
          cfg.model.input_dim() != truth->input_dim) {
        throw std::invalid_argument(
            "fedsplit_true: model shape must match the generating model");
      }
      Partition p;
      p.layer_id = 0;
      p.zeta.resize(truth->total_units());
      p.nu.assign(truth->total_units(), 0.0);
      for (std::size_t u = 0; u < truth->total_units(); ++u) {
        const bool shared = u >= truth->personalized_units;
        p.zeta[u] = shared ? 1 : 0;
        (shared ? p.shared_indices : p.personalized_indices).push_back(u);
      }
      parts[0] = std::move(p);
      return parts;
    }

    // Clients train briefly in a sandbox from the common initialization; the
    // factor analysis runs on what they would have sent, then everything is
    // rolled back so the recorded rounds start from the shared draw.
    std::vector<SplitParams> sandbox(active.size());
    parallel_for(active.size(), cfg.workers, [&](std::size_t i) {
      const std::size_t cid = active[i];
      SplitParams local = initial;
      local.client_id = static_cast<long long>(cid);
      auto rng = derive_rng_stream(cfg.seed,
                                   {{"pretrain", static_cast<std::int64_t>(cid)}});
      run_local_epochs(local, data[cid].x_train, data[cid].y_train,
                       cfg.init_local_epochs, cfg.batch_size, cfg.eta_local, rng);
      sandbox[i] = std::move(local);
    });

    for (std::size_t layer : layers) {
      std::vector<DenseMatrix> fa_input;
      fa_input.reserve(sandbox.size());
      for (std::size_t i = 0; i < sandbox.size(); ++i) {
        if (cfg.factor_input == FactorInput::kWeights) {
          fa_input.push_back(transpose_layer(sandbox[i].hidden[layer]));
        } else {
          DenseMatrix delta = sandbox[i].hidden[layer];
          auto& v = delta.values();
          const auto& w0 = initial.hidden[layer].values();
          for (std::size_t k = 0; k < v.size(); ++k) v[k] -= w0[k];
          fa_input.push_back(transpose_layer(delta));
        }
      }
      Partition p = decompose(fa_input, cfg.factor);
      p.layer_id = layer;

      if (cfg.algorithm == Algorithm::kRandomSplit) {
        // Same shared count, placement drawn uniformly at random.
        const std::size_t units = p.units();
        const std::size_t shared_count = p.shared_indices.size();
        auto rng = derive_rng_stream(
            cfg.seed, {{"random-split", static_cast<std::int64_t>(layer)}});
        const auto order = rng.permutation(units);
        Partition random_p;
        random_p.layer_id = layer;
        random_p.zeta.assign(units, 0);
        random_p.nu.assign(units, 0.0);
        for (std::size_t i = 0; i < shared_count; ++i) random_p.zeta[order[i]] = 1;
        for (std::size_t u = 0; u < units; ++u) {
          (random_p.zeta[u] ? random_p.shared_indices : random_p.personalized_indices)
              .push_back(u);
        }
        parts[layer] = std::move(random_p);
      } else {
        parts[layer] = std::move(p);
      }
    }
    return parts;
  }

  void install_truth() {
    // The true-decomposition baseline starts from the generating model: unit
    // roles of a randomly initialized network are exchangeable, so the true
    // indices only carry meaning relative to the true parameters.
    const std::size_t m1 = truth->personalized_units;
    const auto scales = server.params.head_scales();
    for (std::size_t u = 0; u < truth->total_units(); ++u) {
      if (scales[u] <= 0.0) {
        throw std::invalid_argument("fedsplit_true: degenerate head scaling");
      }
      server.params.head[u] = truth->output_weights[u] / scales[u];
      if (u >= m1) {
        const auto src = truth->shared_weights.row(u - m1);
        std::copy(src.begin(), src.end(), server.params.hidden[0].row(u).begin());
      }
    }
    for (auto& client : clients) {
      client.params.head = server.params.head;
      for (std::size_t u = 0; u < truth->total_units(); ++u) {
        const auto src =
            u < m1 ? truth->personalized_weights[client.client_id].row(u)
                   : truth->shared_weights.row(u - m1);
        std::copy(src.begin(), src.end(), client.params.hidden[0].row(u).begin());
      }
    }
  }

  void broadcast(ClientState& client) const {
    const SplitParams& src = server.params;
    SplitParams& dst = client.params;
    dst.partitions = src.partitions;
    for (std::size_t l = 0; l < src.hidden.size(); ++l) {
      const auto it = src.partitions.find(l);
      if (it == src.partitions.end()) {
        dst.hidden[l] = src.hidden[l];
      } else {
        for (std::size_t idx : it->second.shared_indices) {
          std::copy(src.hidden[l].row(idx).begin(), src.hidden[l].row(idx).end(),
                    dst.hidden[l].row(idx).begin());
        }
      }
    }
    dst.head = src.head;
  }

  RoundRecord evaluate(std::size_t round) const {
    RoundRecord rec;
    rec.round = round;
    rec.client_accuracy.assign(data.size(), 0.0);
    std::vector<double> losses(active.size(), 0.0);
    std::vector<double> accs(active.size(), 0.0);
    parallel_for(active.size(), cfg.workers, [&](std::size_t i) {
      const std::size_t cid = active[i];
      const auto& params = clients[cid].params;
      losses[i] = loss(params, data[cid].x_train, data[cid].y_train);
      accs[i] = data[cid].test_count() > 0
                    ? accuracy(params, data[cid].x_test, data[cid].y_test)
                    : 0.0;
    });
    double loss_sum = 0.0;
    double acc_weighted = 0.0;
    double weight_sum = 0.0;
    double min_acc = 1.0;
    double max_acc = 0.0;
    bool any_test = false;
    for (std::size_t i = 0; i < active.size(); ++i) {
      const std::size_t cid = active[i];
      loss_sum += losses[i];
      rec.client_accuracy[cid] = accs[i];
      if (data[cid].test_count() > 0) {
        any_test = true;
        const double w = static_cast<double>(data[cid].train_count());
        acc_weighted += w * accs[i];
        weight_sum += w;
        min_acc = std::min(min_acc, accs[i]);
        max_acc = std::max(max_acc, accs[i]);
      }
    }
    rec.train_loss = loss_sum / static_cast<double>(active.size());
    rec.weighted_accuracy = any_test ? acc_weighted / weight_sum : 0.0;
    rec.min_accuracy = any_test ? min_acc : 0.0;
    rec.max_accuracy = any_test ? max_acc : 0.0;
    rec.partitions = server.params.partitions;
    return rec;
  }

  ExperimentResult run() {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("run_experiment: no clients");
    for (const auto& ds : data) {
      if (ds.dim() != cfg.model.input_dim()) {
        throw std::invalid_argument("run_experiment: data dimension != model input");
      }
    }
    pick_active_clients();

    const std::size_t k_requested =
        cfg.clients_per_round == 0 ? active.size() : cfg.clients_per_round;
    if (k_requested > active.size()) {
      throw std::invalid_argument("run_experiment: clients_per_round exceeds clients");
    }

    // Common server draw; every client starts from this copy.
    auto init_rng = derive_rng_stream(cfg.seed, {{"server-init", 0}});
    SplitParams initial = init_params(cfg.model, {}, {}, init_rng);
    auto partitions = initial_partitions(initial);
    initial.partitions =
        std::map<std::size_t, Partition>(partitions.begin(), partitions.end());

    server.params = initial;
    server.round = 0;
    clients.resize(data.size());
    for (std::size_t c = 0; c < data.size(); ++c) {
      clients[c].client_id = c;
      clients[c].params = initial;
      clients[c].params.client_id = static_cast<long long>(c);
    }
    if (cfg.algorithm == Algorithm::kFedSplitTrue) install_truth();

    ExperimentResult result;
    result.excluded_clients = excluded;
    result.rounds.push_back(evaluate(0));

    const bool aggregates = cfg.algorithm != Algorithm::kLocalOnly;
    const bool dynamic = cfg.algorithm == Algorithm::kFedFacDynamic;

    for (std::size_t t = 1; t <= cfg.rounds; ++t) {
      auto sample_rng =
          derive_rng_stream(cfg.seed, {{"sample", static_cast<std::int64_t>(t)}});
      const auto sampled_pos = sample_clients(active.size(), k_requested, sample_rng);
      std::vector<std::size_t> sampled;
      sampled.reserve(sampled_pos.size());
      for (std::size_t pos : sampled_pos) sampled.push_back(active[pos]);

      if (aggregates) {
        for (std::size_t cid : sampled) broadcast(clients[cid]);
      }

      // Broadcast-time split-layer rows, needed to rebuild newly shared rows.
      std::vector<std::vector<DenseMatrix>> pre_rows;
      if (dynamic) {
        pre_rows.resize(sampled.size());
        for (std::size_t i = 0; i < sampled.size(); ++i) {
          for (std::size_t layer : cfg.split_layers) {
            pre_rows[i].push_back(clients[sampled[i]].params.hidden[layer]);
          }
        }
      }

      std::vector<ParamDeltas> deltas(sampled.size());
      parallel_for(sampled.size(), cfg.workers, [&](std::size_t i) {
        const std::size_t cid = sampled[i];
        auto rng = derive_rng_stream(cfg.seed, {{"round", static_cast<std::int64_t>(t)},
                                                {"client", static_cast<std::int64_t>(cid)}});
        deltas[i] = run_local_epochs(clients[cid].params, data[cid].x_train,
                                     data[cid].y_train, cfg.local_epochs,
                                     cfg.batch_size, cfg.eta_local, rng);
      });

      std::map<std::size_t, double> stability;
      if (aggregates) {
        const auto weights = normalized_weights(cfg.weighting, sampled, data);

        if (dynamic) {
          for (std::size_t li = 0; li < cfg.split_layers.size(); ++li) {
            const std::size_t layer = cfg.split_layers[li];
            const Partition& previous = server.params.partitions.at(layer);
            if (sampled.size() < 2) {
              std::cerr << "warning: round " << t
                        << " sampled a single client; keeping previous partition\n";
              stability[layer] = 1.0;
              continue;
            }
            std::vector<DenseMatrix> pre;
            std::vector<DenseMatrix> post;
            for (std::size_t i = 0; i < sampled.size(); ++i) {
              pre.push_back(pre_rows[i][li]);
              post.push_back(clients[sampled[i]].params.hidden[layer]);
            }
            auto rep = repartition_dynamic(layer, server.params.hidden[layer],
                                           previous, pre, post, weights, cfg.factor,
                                           cfg.factor_input);
            stability[layer] =
                1.0 - static_cast<double>(rep.flips) /
                          static_cast<double>(rep.partition.units());
            server.params.partitions[layer] = std::move(rep.partition);
          }
          // Partition metadata is global; every client sees the new split.
          for (auto& client : clients) {
            client.params.partitions = server.params.partitions;
          }
        } else {
          for (std::size_t layer : cfg.split_layers) {
            if (server.params.partitions.count(layer)) stability[layer] = 1.0;
          }
        }

        for (std::size_t l = 0; l < server.params.hidden.size(); ++l) {
          const auto it = server.params.partitions.find(l);
          const std::vector<std::size_t> rows =
              it == server.params.partitions.end()
                  ? all_row_indices(server.params.hidden[l].rows())
                  : it->second.shared_indices;
          if (rows.empty()) continue;
          const auto subdeltas = gather_rows(deltas, l, rows);
          const DenseMatrix agg = aggregate_shared(subdeltas, weights);
          for (std::size_t r = 0; r < rows.size(); ++r) {
            auto dst = server.params.hidden[l].row(rows[r]);
            const auto src = agg.row(r);
            for (std::size_t k = 0; k < dst.size(); ++k) {
              dst[k] += cfg.eta_global * src[k];
            }
          }
        }
        if (cfg.model.train_output_weights) {
          double total = 0.0;
          for (double w : weights) total += w;
          for (std::size_t u = 0; u < server.params.head.size(); ++u) {
            double acc = 0.0;
            for (std::size_t i = 0; i < sampled.size(); ++i) {
              acc += weights[i] / total * deltas[i].head[u];
            }
            server.params.head[u] += cfg.eta_global * acc;
          }
        }
      }

      server.round = t;
      RoundRecord rec = evaluate(t);
      rec.sampled = sampled;
      rec.stability = std::move(stability);
      result.rounds.push_back(std::move(rec));
    }

    result.server = server;
    result.clients = clients;
    return result;
  }
};

}  // namespace

ExperimentResult run_experiment(const FederationConfig& cfg,
                                const std::vector<ClientDataset>& data,
                                const TrueModel* truth) {
  Orchestrator orch(cfg, data, truth);
  return orch.run();
}

NewClientPrediction predict_new_client_localtrain(const SplitParams& server_params,
                                                  const ClientDataset& client,
                                                  std::size_t epochs,
                                                  std::size_t batch_size,
                                                  double eta_local,
                                                  bool unfreeze_shared,
                                                  RngStream& rng) {
  if (client.train_count() == 0) {
    throw std::invalid_argument(
        "predict_new_client_localtrain: client has no training data; use the "
        "ensemble strategy instead");
  }
  if (client.test_count() == 0) {
    throw std::invalid_argument("predict_new_client_localtrain: empty test split");
  }
  NewClientPrediction out;
  out.params = server_params;
  out.params.client_id = static_cast<long long>(client.client_id);

  auto init_rng = rng.child("personal-init", 0);
  for (auto& [layer, partition] : out.params.partitions) {
    for (std::size_t idx : partition.personalized_indices) {
      for (double& v : out.params.hidden[layer].row(idx)) {
        v = out.params.cfg.init_scale * init_rng.normal();
      }
    }
  }

  if (epochs > 0) {
    if (unfreeze_shared) {
      auto train_rng = rng.child("train", 0);
      run_local_epochs(out.params, client.x_train, client.y_train, epochs, batch_size,
                       eta_local, train_rng);
    } else {
      // Frozen shared rows: descend only on the personalized rows.
      const std::size_t n = client.train_count();
      const bool full_batch = batch_size == 0 || batch_size >= n;
      auto train_rng = rng.child("train", 0);
      DenseMatrix batch_x;
      std::vector<double> batch_y;
      for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::vector<std::size_t> order;
        if (!full_batch) order = train_rng.permutation(n);
        const std::size_t step = full_batch ? n : batch_size;
        for (std::size_t start = 0; start < n; start += step) {
          const std::size_t count = std::min(step, n - start);
          const DenseMatrix* bx = &client.x_train;
          std::span<const double> by = client.y_train;
          if (!full_batch) {
            batch_x = DenseMatrix(count, client.x_train.cols());
            batch_y.resize(count);
            for (std::size_t i = 0; i < count; ++i) {
              const std::size_t src = order[start + i];
              std::copy(client.x_train.row(src).begin(), client.x_train.row(src).end(),
                        batch_x.row(i).begin());
              batch_y[i] = client.y_train[src];
            }
            bx = &batch_x;
            by = batch_y;
          }
          const auto grads = local_gradients(out.params, *bx, by);
          for (const auto& [layer, partition] : out.params.partitions) {
            for (std::size_t idx : partition.personalized_indices) {
              auto dst = out.params.hidden[layer].row(idx);
              const auto src = grads.hidden[layer].row(idx);
              for (std::size_t k = 0; k < dst.size(); ++k) {
                dst[k] -= eta_local * src[k];
              }
            }
          }
        }
      }
    }
  }

  out.probabilities = batch_probabilities(out.params, client.x_test);
  out.accuracy = accuracy(out.params, client.x_test, client.y_test);
  return out;
}

NewClientPrediction predict_new_client_ensemble(std::span<const SplitParams> models,
                                                const ClientDataset& client) {
  if (models.empty()) {
    throw std::invalid_argument("predict_new_client_ensemble: no models");
  }
  if (client.test_count() == 0) {
    throw std::invalid_argument("predict_new_client_ensemble: empty test split");
  }
  NewClientPrediction out;
  out.probabilities.assign(client.test_count(), 0.0);
  for (const auto& model : models) {
    const auto p = batch_probabilities(model, client.x_test);
    for (std::size_t i = 0; i < p.size(); ++i) out.probabilities[i] += p[i];
  }
  const double inv = 1.0 / static_cast<double>(models.size());
  for (double& p : out.probabilities) p *= inv;

  std::size_t correct = 0;
  for (std::size_t i = 0; i < client.test_count(); ++i) {
    const double label = out.probabilities[i] > 0.5 ? 1.0 : 0.0;
    if ((label > 0.5) == (client.y_test[i] > 0.5)) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(client.test_count());
  return out;
}

}  // namespace fedfac
