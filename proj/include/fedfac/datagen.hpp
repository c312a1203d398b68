#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedfac/matrix.hpp"
#include "fedfac/rng.hpp"

namespace fedfac {

/// One client's local data. Labels are {0,1} for classification tasks and
/// arbitrary reals otherwise.
struct ClientDataset {
  std::size_t client_id = 0;
  DenseMatrix x_train;
  DenseMatrix x_test;
  std::vector<double> y_train;
  std::vector<double> y_test;

  std::size_t train_count() const { return y_train.size(); }
  std::size_t test_count() const { return y_test.size(); }
  std::size_t dim() const { return x_train.cols(); }
};

/// Configuration of the synthetic heterogeneous federation generator.
/// Covariates are laid out personalized-first: x = (x_p[0..d1), x_s[d1..d)),
/// and hidden units personalized-first: units [0, m1) are client-specific.
struct SynthConfig {
  std::size_t clients = 100;
  std::size_t dim = 100;            // d
  std::size_t hidden = 200;         // m, true-model width
  double alpha = 0.4;               // shared covariate proportion d2/d
  double shared_param_prop = 0.5;   // p = m2/m
  std::size_t n_train = 200;
  std::size_t n_test = 50;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;

  std::size_t shared_covariates() const;        // d2 = round(alpha*d)
  std::size_t personalized_covariates() const;  // d1 = d - d2
  std::size_t shared_units() const;             // m2 = round(p*m)
  std::size_t personalized_units() const;       // m1 = m - m2
  void validate() const;
};

/// Ground-truth generating model. Unit weight rows use the covariate layout
/// of SynthConfig; rows [0, m1) of each client matrix are that client's
/// personalized units, the shared block is stored once.
struct TrueModel {
  std::size_t input_dim = 0;
  std::size_t personalized_units = 0;  // m1
  std::size_t shared_units = 0;        // m2
  std::size_t personalized_covariates = 0;  // d1
  DenseMatrix shared_weights;                   // m2 x d
  std::vector<DenseMatrix> personalized_weights;  // per client, m1 x d
  std::vector<double> output_weights;             // length m1 + m2
  std::vector<std::vector<double>> client_means;  // mu_c, length d1

  std::size_t total_units() const { return personalized_units + shared_units; }
  /// Noiseless regression value for client c at input x.
  double evaluate(std::size_t client, std::span<const double> x) const;
};

struct SynthFederation {
  std::vector<ClientDataset> clients;
  TrueModel truth;
};

SynthFederation generate_synthetic_federation(const SynthConfig& cfg);

/// Allocate the indices of each label value across clients with one
/// symmetric Dirichlet(pi) proportion draw per label. Index sets are
/// disjoint and cover [0, labels.size()).
std::vector<std::vector<std::size_t>> dirichlet_partition(
    const std::vector<long long>& labels, std::size_t clients, double pi,
    RngStream& rng);

/// Random train/test split of one client's pool; ceil(ratio*n) rows train.
ClientDataset train_test_split(std::size_t client_id, const DenseMatrix& x,
                               const std::vector<double>& y, double ratio,
                               RngStream& rng);

/// Dataset CSV: header row `client_id,split,y,x0..x{d-1}`, split is
/// "train" or "test".
void write_federation_csv(const std::string& path,
                          const std::vector<ClientDataset>& clients);
std::vector<ClientDataset> read_federation_csv(const std::string& path);

/// Pooled CSV with header `y,x0..x{d-1}`, used as the Dirichlet
/// partitioner's input.
struct PooledDataset {
  DenseMatrix x;
  std::vector<double> y;
};
PooledDataset read_pooled_csv(const std::string& path);

}  // namespace fedfac
