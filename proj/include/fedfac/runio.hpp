#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedfac/datagen.hpp"
#include "fedfac/federation.hpp"

namespace fedfac {

/// Serialization of run-directory artifacts. File formats are part of the
/// tool's contract: CSV is comma-separated with a header row, `.` decimals,
/// LF line endings; JSON documents carry a format tag.

std::string metrics_csv(const std::string& algorithm, std::uint64_t seed,
                        const std::vector<RoundRecord>& rounds);
std::string clients_csv(const std::vector<RoundRecord>& rounds,
                        const std::vector<ClientDataset>& data);
std::string stability_csv(const std::vector<RoundRecord>& rounds);
std::string partition_json(const std::vector<RoundRecord>& rounds, double kappa);

struct MetricsRow {
  std::size_t round = 0;
  std::string algorithm;
  std::uint64_t seed = 0;
  double train_loss = 0.0;
  double weighted_acc = 0.0;
  double min_client_acc = 0.0;
  double max_client_acc = 0.0;
};
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

/// Model checkpoint, JSON. Layer matrices are row-major unit-by-fan-in.
void write_params_json(const std::string& path, const SplitParams& params);
SplitParams read_params_json(const std::string& path);

struct ServerCheckpoint {
  SplitParams params;
  std::string algorithm;
  std::uint64_t seed = 0;
  std::size_t rounds = 0;
  bool normalize_inputs = false;
  std::vector<std::size_t> trained_clients;
  std::vector<std::size_t> holdout_clients;
  double eta_local = 1.0;
  std::size_t batch_size = 0;
};
void write_server_json(const std::string& path, const ServerCheckpoint& ckpt);
ServerCheckpoint read_server_json(const std::string& path);

void write_truemodel_json(const std::string& path, const TrueModel& truth);
TrueModel read_truemodel_json(const std::string& path);

/// Scale every row with Euclidean norm > 1 onto the unit sphere.
void normalize_rows(DenseMatrix& x);
void normalize_dataset(ClientDataset& ds);

}  // namespace fedfac
