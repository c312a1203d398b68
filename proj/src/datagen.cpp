#include "fedfac/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fedfac/textio.hpp"

namespace fedfac {
namespace {

double relu(double z) { return z >= 0.0 ? z : 0.0; }

}  // namespace

std::size_t SynthConfig::shared_covariates() const {
  return static_cast<std::size_t>(std::llround(alpha * static_cast<double>(dim)));
}
std::size_t SynthConfig::personalized_covariates() const {
  return dim - shared_covariates();
}
std::size_t SynthConfig::shared_units() const {
  return static_cast<std::size_t>(
      std::llround(shared_param_prop * static_cast<double>(hidden)));
}
std::size_t SynthConfig::personalized_units() const { return hidden - shared_units(); }

void SynthConfig::validate() const {
  if (clients == 0) throw std::invalid_argument("synth.clients must be positive");
  if (dim == 0) throw std::invalid_argument("synth.dim must be positive");
  if (hidden == 0) throw std::invalid_argument("synth.hidden must be positive");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("synth.alpha must lie in [0,1]");
  }
  if (!(shared_param_prop >= 0.0 && shared_param_prop <= 1.0)) {
    throw std::invalid_argument("synth.p must lie in [0,1]");
  }
  if (n_train == 0) throw std::invalid_argument("synth.n_train must be positive");
  if (noise_sd < 0.0) throw std::invalid_argument("synth.noise_sd must be >= 0");
}

double TrueModel::evaluate(std::size_t client, std::span<const double> x) const {
  const DenseMatrix& wp = personalized_weights[client];
  double h = 0.0;
  for (std::size_t q = 0; q < personalized_units; ++q) {
    double z = 0.0;
    const auto row = wp.row(q);
    for (std::size_t i = 0; i < x.size(); ++i) z += row[i] * x[i];
    h += output_weights[q] * relu(z);
  }
  for (std::size_t r = 0; r < shared_units; ++r) {
    double z = 0.0;
    const auto row = shared_weights.row(r);
    for (std::size_t i = 0; i < x.size(); ++i) z += row[i] * x[i];
    h += output_weights[personalized_units + r] * relu(z);
  }
  return h;
}

SynthFederation generate_synthetic_federation(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.dim;
  const std::size_t d1 = cfg.personalized_covariates();
  const std::size_t m1 = cfg.personalized_units();
  const std::size_t m2 = cfg.shared_units();

  SynthFederation out;
  TrueModel& truth = out.truth;
  truth.input_dim = d;
  truth.personalized_units = m1;
  truth.shared_units = m2;
  truth.personalized_covariates = d1;

  // Shared block and output weights are drawn once and reused everywhere.
  auto shared_rng = derive_rng_stream(cfg.seed, {{"true-shared", 0}});
  truth.shared_weights = DenseMatrix(m2, d);
  for (std::size_t r = 0; r < m2; ++r) {
    for (std::size_t i = 0; i < d1; ++i) {
      truth.shared_weights(r, i) = shared_rng.uniform(-0.1, 0.1);
    }
    for (std::size_t i = d1; i < d; ++i) {
      truth.shared_weights(r, i) = shared_rng.uniform(-1.0, 1.0);
    }
  }
  auto head_rng = derive_rng_stream(cfg.seed, {{"true-head", 0}});
  truth.output_weights = head_rng.normal_vector(m1 + m2);

  // AR(1) covariance of the personalized covariates, parameter fixed at 0.5.
  DenseMatrix chol;
  if (d1 > 0) {
    DenseMatrix cov(d1, d1);
    for (std::size_t i = 0; i < d1; ++i) {
      for (std::size_t j = 0; j < d1; ++j) {
        cov(i, j) =
            std::pow(0.5, std::abs(static_cast<double>(i) - static_cast<double>(j)));
      }
    }
    chol = cholesky_lower(cov);
  }

  truth.personalized_weights.resize(cfg.clients);
  truth.client_means.resize(cfg.clients);
  out.clients.resize(cfg.clients);

  for (std::size_t c = 0; c < cfg.clients; ++c) {
    auto mean_rng = derive_rng_stream(cfg.seed, {{"client-mean", static_cast<std::int64_t>(c)}});
    truth.client_means[c] = mean_rng.normal_vector(d1);

    auto w_rng = derive_rng_stream(cfg.seed, {{"true-personal", static_cast<std::int64_t>(c)}});
    DenseMatrix wp(m1, d);
    for (std::size_t q = 0; q < m1; ++q) {
      for (std::size_t i = 0; i < d1; ++i) {
        wp(q, i) = truth.client_means[c][i] + w_rng.normal();
      }
      for (std::size_t i = d1; i < d; ++i) wp(q, i) = w_rng.uniform(-0.1, 0.1);
    }
    truth.personalized_weights[c] = std::move(wp);

    auto data_rng = derive_rng_stream(cfg.seed, {{"client-data", static_cast<std::int64_t>(c)}});
    auto draw_block = [&](std::size_t n, DenseMatrix& x, std::vector<double>& y) {
      x = DenseMatrix(n, d);
      y.resize(n);
      std::vector<double> z(d1);
      for (std::size_t s = 0; s < n; ++s) {
        if (d1 > 0) {
          for (double& v : z) v = data_rng.normal();
          for (std::size_t i = 0; i < d1; ++i) {
            double acc = truth.client_means[c][i];
            for (std::size_t k = 0; k <= i; ++k) acc += chol(i, k) * z[k];
            x(s, i) = acc;
          }
        }
        for (std::size_t i = d1; i < d; ++i) x(s, i) = data_rng.normal();
        const double signal = truth.evaluate(c, x.row(s));
        const double noisy = signal + cfg.noise_sd * data_rng.normal();
        y[s] = noisy > 0.0 ? 1.0 : 0.0;
      }
    };

    ClientDataset& ds = out.clients[c];
    ds.client_id = c;
    draw_block(cfg.n_train, ds.x_train, ds.y_train);
    draw_block(cfg.n_test, ds.x_test, ds.y_test);
  }
  return out;
}

std::vector<std::vector<std::size_t>> dirichlet_partition(
    const std::vector<long long>& labels, std::size_t clients, double pi,
    RngStream& rng) {
  if (labels.empty()) throw std::invalid_argument("dirichlet_partition: empty labels");
  if (clients == 0) throw std::invalid_argument("dirichlet_partition: need clients >= 1");
  if (pi <= 0.0) throw std::invalid_argument("dirichlet_partition: pi must be positive");

  std::map<long long, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);

  std::vector<std::vector<std::size_t>> assignment(clients);
  for (const auto& [label, indices] : by_label) {
    const auto proportions = rng.dirichlet(pi, clients);
    std::vector<double> cumulative(clients);
    double acc = 0.0;
    for (std::size_t c = 0; c < clients; ++c) {
      acc += proportions[c];
      cumulative[c] = acc;
    }
    cumulative.back() = 1.0;
    for (std::size_t idx : indices) {
      const double u = rng.uniform01();
      const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
      std::size_t c = static_cast<std::size_t>(it - cumulative.begin());
      if (c >= clients) c = clients - 1;
      assignment[c].push_back(idx);
    }
  }
  return assignment;
}

ClientDataset train_test_split(std::size_t client_id, const DenseMatrix& x,
                               const std::vector<double>& y, double ratio,
                               RngStream& rng) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("train_test_split: ratio must lie in (0,1)");
  }
  const std::size_t n = x.rows();
  if (n < 2 || y.size() != n) {
    throw std::invalid_argument("train_test_split: need at least 2 labeled rows");
  }
  std::size_t n_train =
      static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n)));
  n_train = std::min(n_train, n - 1);

  const auto order = rng.permutation(n);
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + n_train);
  std::vector<std::size_t> test_idx(order.begin() + n_train, order.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  ClientDataset ds;
  ds.client_id = client_id;
  ds.x_train = DenseMatrix(train_idx.size(), x.cols());
  ds.x_test = DenseMatrix(test_idx.size(), x.cols());
  for (std::size_t i = 0; i < train_idx.size(); ++i) {
    ds.y_train.push_back(y[train_idx[i]]);
    for (std::size_t j = 0; j < x.cols(); ++j) ds.x_train(i, j) = x(train_idx[i], j);
  }
  for (std::size_t i = 0; i < test_idx.size(); ++i) {
    ds.y_test.push_back(y[test_idx[i]]);
    for (std::size_t j = 0; j < x.cols(); ++j) ds.x_test(i, j) = x(test_idx[i], j);
  }
  return ds;
}

void write_federation_csv(const std::string& path,
                          const std::vector<ClientDataset>& clients) {
  std::ostringstream out;
  if (clients.empty()) throw std::invalid_argument("write_federation_csv: no clients");
  const std::size_t d = clients.front().dim();
  out << "client_id,split,y";
  for (std::size_t j = 0; j < d; ++j) out << ",x" << j;
  out << "\n";
  auto emit = [&](const ClientDataset& ds, const DenseMatrix& x,
                  const std::vector<double>& y, const char* split) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      out << ds.client_id << ',' << split << ',' << format_double(y[i]);
      for (std::size_t j = 0; j < d; ++j) out << ',' << format_double(x(i, j));
      out << "\n";
    }
  };
  for (const auto& ds : clients) {
    emit(ds, ds.x_train, ds.y_train, "train");
    emit(ds, ds.x_test, ds.y_test, "test");
  }
  write_text_file(path, out.str());
}

std::vector<ClientDataset> read_federation_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset: " + path);
  const auto header = split_line(line);
  if (header.size() < 4 || header[0] != "client_id" || header[1] != "split" ||
      header[2] != "y") {
    throw std::runtime_error("bad dataset header in " + path);
  }
  const std::size_t d = header.size() - 3;

  struct Rows {
    std::vector<std::vector<double>> train, test;
    std::vector<double> y_train, y_test;
  };
  std::map<long long, Rows> by_client;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error("bad field count at line " + std::to_string(line_no) +
                               " of " + path);
    }
    const long long id = parse_int(fields[0]);
    Rows& rows = by_client[id];
    std::vector<double> x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = parse_double(fields[3 + j]);
    if (fields[1] == "train") {
      rows.train.push_back(std::move(x));
      rows.y_train.push_back(parse_double(fields[2]));
    } else if (fields[1] == "test") {
      rows.test.push_back(std::move(x));
      rows.y_test.push_back(parse_double(fields[2]));
    } else {
      throw std::runtime_error("bad split value '" + fields[1] + "' at line " +
                               std::to_string(line_no));
    }
  }
  std::vector<ClientDataset> clients;
  long long expected = 0;
  for (auto& [id, rows] : by_client) {
    if (id != expected++) {
      throw std::runtime_error("client ids must be contiguous from 0 in " + path);
    }
    ClientDataset ds;
    ds.client_id = static_cast<std::size_t>(id);
    ds.x_train = DenseMatrix(rows.train.size(), d);
    ds.x_test = DenseMatrix(rows.test.size(), d);
    for (std::size_t i = 0; i < rows.train.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) ds.x_train(i, j) = rows.train[i][j];
    }
    for (std::size_t i = 0; i < rows.test.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) ds.x_test(i, j) = rows.test[i][j];
    }
    ds.y_train = std::move(rows.y_train);
    ds.y_test = std::move(rows.y_test);
    clients.push_back(std::move(ds));
  }
  if (clients.empty()) throw std::runtime_error("dataset has no rows: " + path);
  return clients;
}

PooledDataset read_pooled_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pooled dataset: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty pooled dataset: " + path);
  const auto header = split_line(line);
  if (header.size() < 2 || header[0] != "y") {
    throw std::runtime_error("bad pooled header in " + path);
  }
  const std::size_t d = header.size() - 1;
  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error("bad field count in pooled dataset " + path);
    }
    y.push_back(parse_double(fields[0]));
    std::vector<double> x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = parse_double(fields[1 + j]);
    rows.push_back(std::move(x));
  }
  PooledDataset out;
  out.x = DenseMatrix(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) out.x(i, j) = rows[i][j];
  }
  out.y = std::move(y);
  return out;
}

}  // namespace fedfac
