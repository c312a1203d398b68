#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedfac/datagen.hpp"
#include "fedfac/facsplit.hpp"
#include "fedfac/model.hpp"

namespace fedfac {

enum class Algorithm {
  kFedAvg,
  kFedSplitTrue,
  kFedFacStatic,
  kFedFacDynamic,
  kRandomSplit,
  kLocalOnly,
};

enum class Weighting { kSampleSize, kUniform };

/// What the factor analysis consumes: the clients' current layer weights or
/// their accumulated round deltas.
enum class FactorInput { kWeights, kDeltas };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

struct FederationConfig {
  Algorithm algorithm = Algorithm::kFedAvg;
  std::size_t rounds = 10;            // T
  std::size_t clients_per_round = 0;  // K; 0 means every client
  std::size_t local_epochs = 1;       // G
  std::size_t batch_size = 0;         // B; 0 means full batch
  double eta_local = 1.0;
  double eta_global = 1.0;
  std::vector<std::size_t> split_layers;  // hidden-layer indices (0-based)
  FactorConfig factor;
  FactorInput factor_input = FactorInput::kWeights;
  std::size_t init_local_epochs = 5;  // pre-round training feeding the first FA
  Weighting weighting = Weighting::kSampleSize;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  ModelConfig model;

  void validate() const;
};

struct RoundRecord {
  std::size_t round = 0;
  std::vector<std::size_t> sampled;
  double train_loss = 0.0;
  std::vector<double> client_accuracy;  // indexed by client id
  double weighted_accuracy = 0.0;
  double min_accuracy = 0.0;
  double max_accuracy = 0.0;
  std::map<std::size_t, Partition> partitions;  // split layers only
  std::map<std::size_t, double> stability;      // fraction of units unchanged
};

struct ServerState {
  SplitParams params;
  std::size_t round = 0;
};

struct ClientState {
  std::size_t client_id = 0;
  SplitParams params;
};

struct ExperimentResult {
  std::vector<RoundRecord> rounds;  // index 0 is the initial state
  ServerState server;
  std::vector<ClientState> clients;
  std::vector<std::size_t> excluded_clients;  // empty train sets
};

/// Run the full communication-round loop. fedsplit_true requires the
/// generating TrueModel (its partition and parameters seed the run).
ExperimentResult run_experiment(const FederationConfig& cfg,
                                const std::vector<ClientDataset>& data,
                                const TrueModel* truth = nullptr);

/// K distinct clients drawn uniformly without replacement, ascending.
std::vector<std::size_t> sample_clients(std::size_t client_count, std::size_t k,
                                        RngStream& rng);

/// Weighted average of per-client deltas; weights are normalized by their sum.
DenseMatrix aggregate_shared(std::span<const DenseMatrix> deltas,
                             std::span<const double> weights);

/// w += eta_global * delta, elementwise.
void apply_global_update(DenseMatrix& shared, const DenseMatrix& delta,
                         double eta_global);

struct DynamicRepartition {
  Partition partition;
  std::size_t flips = 0;  // Hamming distance to the previous assignment
};

/// Factor-analyze the sampled clients' post-update weights of one layer and
/// reconcile the server copy: indices that become shared get the weighted
/// average of the clients' broadcast-time rows as their server base value.
DynamicRepartition repartition_dynamic(std::size_t layer, DenseMatrix& server_layer,
                                       const Partition& previous,
                                       std::span<const DenseMatrix> client_pre,
                                       std::span<const DenseMatrix> client_post,
                                       std::span<const double> weights,
                                       const FactorConfig& factor_cfg,
                                       FactorInput input);

enum class MaskGroup { kShared, kPersonalized };

/// Ablation helper: replace the targeted group's rows in every split layer
/// with fresh N(0, init_scale^2) draws.
void mask_group(SplitParams& params, MaskGroup group, RngStream& rng);

struct NewClientPrediction {
  std::vector<double> probabilities;
  double accuracy = 0.0;
  SplitParams params;  // localtrain only: the locally adapted model
};

/// LocalTrain: adopt the server's shared rows, initialize personalized rows
/// locally, train them for `epochs` epochs (shared rows frozen unless
/// unfreeze_shared), then score the client's test split.
NewClientPrediction predict_new_client_localtrain(const SplitParams& server_params,
                                                  const ClientDataset& client,
                                                  std::size_t epochs,
                                                  std::size_t batch_size,
                                                  double eta_local,
                                                  bool unfreeze_shared,
                                                  RngStream& rng);

/// Ensemble: average the existing models' predicted probabilities; the label
/// is 1 only when the mean probability strictly exceeds 1/2.
NewClientPrediction predict_new_client_ensemble(std::span<const SplitParams> models,
                                                const ClientDataset& client);

}  // namespace fedfac
