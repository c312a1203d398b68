#include "fedfac/runio.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fedfac/textio.hpp"

namespace fedfac {
namespace {

using nlohmann::json;

json matrix_to_json(const DenseMatrix& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["values"] = m.values();
  return j;
}

DenseMatrix matrix_from_json(const json& j) {
  DenseMatrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  m.values() = j.at("values").get<std::vector<double>>();
  if (m.values().size() != m.rows() * m.cols()) {
    throw std::runtime_error("checkpoint: matrix size mismatch");
  }
  return m;
}

json partition_to_json(const Partition& p) {
  json j;
  j["layer"] = p.layer_id;
  j["zeta"] = p.zeta;
  j["nu"] = p.nu;
  j["tau"] = p.resolved_tau;
  j["factors"] = p.factors;
  return j;
}

Partition partition_from_json(const json& j) {
  Partition p;
  p.layer_id = j.at("layer").get<std::size_t>();
  p.zeta = j.at("zeta").get<std::vector<std::uint8_t>>();
  p.nu = j.at("nu").get<std::vector<double>>();
  p.resolved_tau = j.at("tau").get<double>();
  p.factors = j.at("factors").get<std::size_t>();
  for (std::size_t u = 0; u < p.zeta.size(); ++u) {
    (p.zeta[u] ? p.shared_indices : p.personalized_indices).push_back(u);
  }
  return p;
}

json params_to_json(const SplitParams& params) {
  json j;
  j["format"] = "fedfac-params-v1";
  j["layer_widths"] = params.cfg.layer_widths;
  j["loss"] = params.cfg.loss == LossKind::kQuadratic ? "quadratic"
                                                      : "binary_cross_entropy";
  j["scale_by_sqrt_width"] = params.cfg.scale_by_sqrt_width;
  j["train_output_weights"] = params.cfg.train_output_weights;
  j["init_scale"] = params.cfg.init_scale;
  j["client_id"] = params.client_id;
  j["hidden"] = json::array();
  for (const auto& w : params.hidden) j["hidden"].push_back(matrix_to_json(w));
  j["head"] = params.head;
  j["partitions"] = json::array();
  for (const auto& [layer, p] : params.partitions) {
    j["partitions"].push_back(partition_to_json(p));
  }
  return j;
}

SplitParams params_from_json(const json& j) {
  if (j.at("format").get<std::string>() != "fedfac-params-v1") {
    throw std::runtime_error("checkpoint: unsupported format");
  }
  SplitParams params;
  params.cfg.layer_widths = j.at("layer_widths").get<std::vector<std::size_t>>();
  params.cfg.loss = j.at("loss").get<std::string>() == "quadratic"
                        ? LossKind::kQuadratic
                        : LossKind::kBinaryCrossEntropy;
  params.cfg.scale_by_sqrt_width = j.at("scale_by_sqrt_width").get<bool>();
  params.cfg.train_output_weights = j.at("train_output_weights").get<bool>();
  params.cfg.init_scale = j.at("init_scale").get<double>();
  params.client_id = j.at("client_id").get<long long>();
  for (const auto& w : j.at("hidden")) params.hidden.push_back(matrix_from_json(w));
  params.head = j.at("head").get<std::vector<double>>();
  for (const auto& p : j.at("partitions")) {
    Partition part = partition_from_json(p);
    params.partitions[part.layer_id] = std::move(part);
  }
  return params;
}

}  // namespace

std::string metrics_csv(const std::string& algorithm, std::uint64_t seed,
                        const std::vector<RoundRecord>& rounds) {
  std::ostringstream out;
  out << "round,algorithm,seed,train_loss,weighted_acc,min_client_acc,max_client_acc\n";
  // Round 0 is the untrained state; it is reported only when no training
  // rounds were requested.
  const bool only_initial = rounds.size() == 1;
  for (const auto& rec : rounds) {
    if (rec.round == 0 && !only_initial) continue;
    out << rec.round << ',' << algorithm << ',' << seed << ','
        << format_double(rec.train_loss) << ',' << format_double(rec.weighted_accuracy)
        << ',' << format_double(rec.min_accuracy) << ','
        << format_double(rec.max_accuracy) << "\n";
  }
  return out.str();
}

std::string clients_csv(const std::vector<RoundRecord>& rounds,
                        const std::vector<ClientDataset>& data) {
  std::ostringstream out;
  out << "round,client_id,n_c,test_acc\n";
  const bool only_initial = rounds.size() == 1;
  for (const auto& rec : rounds) {
    if (rec.round == 0 && !only_initial) continue;
    for (std::size_t c = 0; c < rec.client_accuracy.size(); ++c) {
      out << rec.round << ',' << c << ',' << data[c].train_count() << ','
          << format_double(rec.client_accuracy[c]) << "\n";
    }
  }
  return out.str();
}

std::string stability_csv(const std::vector<RoundRecord>& rounds) {
  std::ostringstream out;
  out << "round,layer,fraction_unchanged\n";
  for (const auto& rec : rounds) {
    for (const auto& [layer, fraction] : rec.stability) {
      out << rec.round << ',' << layer + 1 << ',' << format_double(fraction) << "\n";
    }
  }
  return out.str();
}

std::string partition_json(const std::vector<RoundRecord>& rounds, double kappa) {
  json j;
  j["format"] = "fedfac-partitions-v1";
  j["kappa"] = kappa;
  j["rounds"] = json::array();
  for (const auto& rec : rounds) {
    if (rec.partitions.empty()) continue;
    json snapshot;
    snapshot["round"] = rec.round;
    snapshot["layers"] = json::array();
    for (const auto& [layer, p] : rec.partitions) {
      json lp = partition_to_json(p);
      lp["layer"] = layer + 1;  // user-facing layers are 1-based
      snapshot["layers"].push_back(std::move(lp));
    }
    j["rounds"].push_back(std::move(snapshot));
  }
  return j.dump(2) + "\n";
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty metrics: " + path);
  if (line != "round,algorithm,seed,train_loss,weighted_acc,min_client_acc,max_client_acc") {
    throw std::runtime_error("unexpected metrics schema in " + path);
  }
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != 7) throw std::runtime_error("bad metrics row in " + path);
    MetricsRow row;
    row.round = static_cast<std::size_t>(parse_int(fields[0]));
    row.algorithm = fields[1];
    row.seed = static_cast<std::uint64_t>(parse_int(fields[2]));
    row.train_loss = parse_double(fields[3]);
    row.weighted_acc = parse_double(fields[4]);
    row.min_client_acc = parse_double(fields[5]);
    row.max_client_acc = parse_double(fields[6]);
    rows.push_back(row);
  }
  return rows;
}

void write_params_json(const std::string& path, const SplitParams& params) {
  write_text_file(path, params_to_json(params).dump() + "\n");
}

SplitParams read_params_json(const std::string& path) {
  return params_from_json(json::parse(read_text_file(path)));
}

void write_server_json(const std::string& path, const ServerCheckpoint& ckpt) {
  json j;
  j["format"] = "fedfac-server-v1";
  j["algorithm"] = ckpt.algorithm;
  j["seed"] = ckpt.seed;
  j["rounds"] = ckpt.rounds;
  j["normalize_inputs"] = ckpt.normalize_inputs;
  j["trained_clients"] = ckpt.trained_clients;
  j["holdout_clients"] = ckpt.holdout_clients;
  j["eta_local"] = ckpt.eta_local;
  j["batch_size"] = ckpt.batch_size;
  j["params"] = params_to_json(ckpt.params);
  write_text_file(path, j.dump() + "\n");
}

ServerCheckpoint read_server_json(const std::string& path) {
  const auto j = json::parse(read_text_file(path));
  if (j.at("format").get<std::string>() != "fedfac-server-v1") {
    throw std::runtime_error("server checkpoint: unsupported format");
  }
  ServerCheckpoint ckpt;
  ckpt.algorithm = j.at("algorithm").get<std::string>();
  ckpt.seed = j.at("seed").get<std::uint64_t>();
  ckpt.rounds = j.at("rounds").get<std::size_t>();
  ckpt.normalize_inputs = j.at("normalize_inputs").get<bool>();
  ckpt.trained_clients = j.at("trained_clients").get<std::vector<std::size_t>>();
  ckpt.holdout_clients = j.at("holdout_clients").get<std::vector<std::size_t>>();
  ckpt.eta_local = j.at("eta_local").get<double>();
  ckpt.batch_size = j.at("batch_size").get<std::size_t>();
  ckpt.params = params_from_json(j.at("params"));
  return ckpt;
}

void write_truemodel_json(const std::string& path, const TrueModel& truth) {
  json j;
  j["format"] = "fedfac-truemodel-v1";
  j["input_dim"] = truth.input_dim;
  j["personalized_units"] = truth.personalized_units;
  j["shared_units"] = truth.shared_units;
  j["personalized_covariates"] = truth.personalized_covariates;
  j["shared_weights"] = matrix_to_json(truth.shared_weights);
  j["personalized_weights"] = json::array();
  for (const auto& w : truth.personalized_weights) {
    j["personalized_weights"].push_back(matrix_to_json(w));
  }
  j["output_weights"] = truth.output_weights;
  j["client_means"] = truth.client_means;
  write_text_file(path, j.dump() + "\n");
}

TrueModel read_truemodel_json(const std::string& path) {
  const auto j = json::parse(read_text_file(path));
  if (j.at("format").get<std::string>() != "fedfac-truemodel-v1") {
    throw std::runtime_error("true model: unsupported format");
  }
  TrueModel truth;
  truth.input_dim = j.at("input_dim").get<std::size_t>();
  truth.personalized_units = j.at("personalized_units").get<std::size_t>();
  truth.shared_units = j.at("shared_units").get<std::size_t>();
  truth.personalized_covariates = j.at("personalized_covariates").get<std::size_t>();
  truth.shared_weights = matrix_from_json(j.at("shared_weights"));
  for (const auto& w : j.at("personalized_weights")) {
    truth.personalized_weights.push_back(matrix_from_json(w));
  }
  truth.output_weights = j.at("output_weights").get<std::vector<double>>();
  truth.client_means = j.at("client_means").get<std::vector<std::vector<double>>>();
  return truth;
}

void normalize_rows(DenseMatrix& x) {
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double sq = 0.0;
    for (double v : x.row(i)) sq += v * v;
    if (sq > 1.0) {
      const double inv = 1.0 / std::sqrt(sq);
      for (double& v : x.row(i)) v *= inv;
    }
  }
}

void normalize_dataset(ClientDataset& ds) {
  normalize_rows(ds.x_train);
  normalize_rows(ds.x_test);
}

}  // namespace fedfac
