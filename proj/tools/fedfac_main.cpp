// Experiment runner: dataset generation, federated training, diagnostics,
// and run comparison. Every artifact lands in a self-describing run
// directory with a manifest of content digests.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedfac/analysis.hpp"
#include "fedfac/config.hpp"
#include "fedfac/datagen.hpp"
#include "fedfac/federation.hpp"
#include "fedfac/manifest.hpp"
#include "fedfac/runio.hpp"
#include "fedfac/textio.hpp"

namespace fs = std::filesystem;
using namespace fedfac;

namespace {

const std::vector<std::string> kGenDataKeys = {
    "mode",          "seed",           "synth.clients", "synth.dim",
    "synth.hidden",  "synth.alpha",    "synth.p",       "synth.n_train",
    "synth.n_test",  "synth.noise_sd", "dirichlet.input",
    "dirichlet.clients", "dirichlet.pi", "dirichlet.train_ratio"};

const std::vector<std::string> kTrainKeys = {
    "seed",
    "workers",
    "train.algorithm",
    "train.rounds",
    "train.clients_per_round",
    "train.local_epochs",
    "train.batch_size",
    "train.eta_l",
    "train.eta_g",
    "train.weighting",
    "train.holdout_clients",
    "train.normalize_inputs",
    "model.hidden",
    "model.loss",
    "model.scale_by_sqrt_width",
    "model.train_output_weights",
    "model.init_scale",
    "model.head_init",
    "split.layers",
    "factor.kappa",
    "factor.tau",
    "factor.max_iter",
    "factor.tol",
    "factor.input",
    "factor.init_local_epochs"};

TauSpec parse_tau(const std::string& text) {
  if (text == "inf" || text == "+inf") return TauSpec::all_personalized();
  if (text == "-inf") return TauSpec::all_shared();
  if (text == "q25") return TauSpec::quantile(0.25);
  if (text == "q50") return TauSpec::quantile(0.5);
  if (text == "q75") return TauSpec::quantile(0.75);
  if (text == "q90") return TauSpec::quantile(0.9);
  if (text == "q95") return TauSpec::quantile(0.95);
  try {
    return TauSpec::absolute(parse_double(text));
  } catch (const std::exception&) {
    throw std::invalid_argument(
        "config: factor.tau must be one of q25,q50,q75,q90,q95,inf,-inf or a number");
  }
}

std::string tau_to_string(const TauSpec& tau) {
  switch (tau.kind) {
    case TauKind::kQuantile: return "q" + std::to_string(static_cast<int>(std::llround(tau.value * 100)));
    case TauKind::kAbsolute: return format_double(tau.value);
    case TauKind::kAllPersonalized: return "inf";
    case TauKind::kAllShared: return "-inf";
  }
  return "?";
}

struct TrainSetup {
  FederationConfig federation;
  bool normalize_inputs = true;
  std::size_t holdout_clients = 0;
  bool head_from_truth = false;
};

TrainSetup parse_train_config(const KeyValueConfig& cfg, std::size_t input_dim) {
  TrainSetup setup;
  FederationConfig& fc = setup.federation;
  fc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", -1));
  if (!cfg.has("seed")) throw std::invalid_argument("config: missing required key 'seed'");
  fc.algorithm = algorithm_from_name(cfg.get_string("train.algorithm", "fedavg"));
  fc.rounds = static_cast<std::size_t>(cfg.get_int("train.rounds", 10));
  fc.clients_per_round =
      static_cast<std::size_t>(cfg.get_int("train.clients_per_round", 0));
  fc.local_epochs = static_cast<std::size_t>(cfg.get_int("train.local_epochs", 1));
  fc.batch_size = static_cast<std::size_t>(cfg.get_int("train.batch_size", 0));
  fc.eta_local = cfg.get_double("train.eta_l", 1.0);
  fc.eta_global = cfg.get_double("train.eta_g", 1.0);
  const std::string weighting = cfg.get_string("train.weighting", "sample_size");
  if (weighting == "sample_size") {
    fc.weighting = Weighting::kSampleSize;
  } else if (weighting == "uniform") {
    fc.weighting = Weighting::kUniform;
  } else {
    throw std::invalid_argument("config: train.weighting must be sample_size|uniform");
  }
  fc.workers = static_cast<std::size_t>(cfg.get_int("workers", 1));

  const auto hidden = cfg.get_int_list("model.hidden", {200});
  fc.model.layer_widths.push_back(input_dim);
  for (long long h : hidden) {
    if (h <= 0) throw std::invalid_argument("config: model.hidden entries must be positive");
    fc.model.layer_widths.push_back(static_cast<std::size_t>(h));
  }
  fc.model.layer_widths.push_back(1);
  const std::string loss = cfg.get_string("model.loss", "binary_cross_entropy");
  if (loss == "quadratic") {
    fc.model.loss = LossKind::kQuadratic;
  } else if (loss == "bce" || loss == "binary_cross_entropy") {
    fc.model.loss = LossKind::kBinaryCrossEntropy;
  } else {
    throw std::invalid_argument("config: model.loss must be quadratic|binary_cross_entropy");
  }
  fc.model.scale_by_sqrt_width = cfg.get_bool("model.scale_by_sqrt_width", false);
  fc.model.train_output_weights = cfg.get_bool("model.train_output_weights", false);
  fc.model.init_scale = cfg.get_double("model.init_scale", 1.0);

  for (long long l : cfg.get_int_list("split.layers", {})) {
    if (l < 1) {
      throw std::invalid_argument("config: split.layers entries are 1-based hidden layers");
    }
    fc.split_layers.push_back(static_cast<std::size_t>(l - 1));
  }
  fc.factor.kappa = cfg.get_double("factor.kappa", 0.85);
  fc.factor.tau = parse_tau(cfg.get_string("factor.tau", "q50"));
  fc.factor.max_iter = static_cast<std::size_t>(cfg.get_int("factor.max_iter", 100));
  fc.factor.tol = cfg.get_double("factor.tol", 1e-4);
  const std::string fa_input = cfg.get_string("factor.input", "weights");
  if (fa_input == "weights") {
    fc.factor_input = FactorInput::kWeights;
  } else if (fa_input == "deltas") {
    fc.factor_input = FactorInput::kDeltas;
  } else {
    throw std::invalid_argument("config: factor.input must be weights|deltas");
  }
  fc.init_local_epochs =
      static_cast<std::size_t>(cfg.get_int("factor.init_local_epochs", 5));

  setup.normalize_inputs = cfg.get_bool("train.normalize_inputs", true);
  setup.holdout_clients =
      static_cast<std::size_t>(cfg.get_int("train.holdout_clients", 0));
  const std::string head_init = cfg.get_string("model.head_init", "pm_one");
  if (head_init == "true_model") {
    setup.head_from_truth = true;
  } else if (head_init != "pm_one") {
    throw std::invalid_argument("config: model.head_init must be pm_one|true_model");
  }
  if (setup.head_from_truth && fc.model.scale_by_sqrt_width) {
    throw std::invalid_argument(
        "config: model.head_init=true_model requires model.scale_by_sqrt_width=false");
  }
  return setup;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_dir) {
  const auto cfg = KeyValueConfig::parse_file(config_path);
  cfg.require_known(kGenDataKeys);
  if (!cfg.has("seed")) throw std::invalid_argument("config: missing required key 'seed'");
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  const std::string mode = cfg.get_string("mode", "synth");

  fs::create_directories(out_dir);
  RunManifest manifest;
  manifest.command = "gen-data";
  manifest.seed = seed;
  manifest.config_echo = cfg.entries();
  manifest.started_at = timestamp_utc();

  if (mode == "synth") {
    SynthConfig synth;
    synth.clients = static_cast<std::size_t>(cfg.get_int("synth.clients", 100));
    synth.dim = static_cast<std::size_t>(cfg.get_int("synth.dim", 100));
    synth.hidden = static_cast<std::size_t>(cfg.get_int("synth.hidden", 200));
    synth.alpha = cfg.get_double("synth.alpha", 0.4);
    synth.shared_param_prop = cfg.get_double("synth.p", 0.5);
    synth.n_train = static_cast<std::size_t>(cfg.get_int("synth.n_train", 200));
    synth.n_test = static_cast<std::size_t>(cfg.get_int("synth.n_test", 50));
    synth.noise_sd = cfg.get_double("synth.noise_sd", 1.0);
    synth.seed = seed;
    synth.validate();

    const auto federation = generate_synthetic_federation(synth);
    write_federation_csv(out_dir + "/dataset.csv", federation.clients);
    write_truemodel_json(out_dir + "/truemodel.json", federation.truth);
    manifest.add_output(out_dir, "dataset.csv");
    manifest.add_output(out_dir, "truemodel.json");
  } else if (mode == "dirichlet") {
    const std::string input = cfg.get_string("dirichlet.input");
    const auto pooled = read_pooled_csv(input);
    const auto clients = static_cast<std::size_t>(cfg.get_int("dirichlet.clients", 10));
    const double pi = cfg.get_double("dirichlet.pi", 0.5);
    const double ratio = cfg.get_double("dirichlet.train_ratio", 0.8);

    std::vector<long long> labels(pooled.y.size());
    for (std::size_t i = 0; i < pooled.y.size(); ++i) {
      labels[i] = static_cast<long long>(std::llround(pooled.y[i]));
    }
    auto rng = derive_rng_stream(seed, {{"dirichlet-partition", 0}});
    const auto assignment = dirichlet_partition(labels, clients, pi, rng);

    std::vector<ClientDataset> datasets;
    for (std::size_t c = 0; c < clients; ++c) {
      const auto& indices = assignment[c];
      DenseMatrix x(indices.size(), pooled.x.cols());
      std::vector<double> y(indices.size());
      for (std::size_t i = 0; i < indices.size(); ++i) {
        y[i] = pooled.y[indices[i]];
        std::copy(pooled.x.row(indices[i]).begin(), pooled.x.row(indices[i]).end(),
                  x.row(i).begin());
      }
      if (indices.size() < 2) {
        throw std::runtime_error("dirichlet partition left client " + std::to_string(c) +
                                 " with fewer than 2 samples; raise dirichlet.pi or "
                                 "lower dirichlet.clients");
      }
      auto split_rng = derive_rng_stream(seed, {{"train-test-split", static_cast<std::int64_t>(c)}});
      datasets.push_back(train_test_split(c, x, y, ratio, split_rng));
    }
    write_federation_csv(out_dir + "/dataset.csv", datasets);
    manifest.add_output(out_dir, "dataset.csv");
  } else {
    throw std::invalid_argument("config: mode must be synth|dirichlet");
  }

  manifest.finished_at = timestamp_utc();
  manifest.write(out_dir + "/manifest.json");
  if (!manifest.verify_outputs(out_dir)) {
    std::cerr << "error: digest verification failed\n";
    return 2;
  }
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_dir, std::optional<std::size_t> workers_flag) {
  const auto cfg = KeyValueConfig::parse_file(config_path);
  cfg.require_known(kTrainKeys);

  auto all_clients = read_federation_csv(data_path);
  const std::size_t input_dim = all_clients.front().dim();
  TrainSetup setup = parse_train_config(cfg, input_dim);
  if (workers_flag) setup.federation.workers = *workers_flag;

  // Optional generating model, stored next to the dataset.
  std::optional<TrueModel> truth;
  const fs::path truemodel_path = fs::path(data_path).parent_path() / "truemodel.json";
  if (fs::exists(truemodel_path)) truth = read_truemodel_json(truemodel_path.string());
  if (setup.federation.algorithm == Algorithm::kFedSplitTrue && !truth) {
    throw std::invalid_argument(
        "train.algorithm=fedsplit_true needs truemodel.json next to the dataset");
  }

  if (setup.holdout_clients >= all_clients.size()) {
    throw std::invalid_argument("config: train.holdout_clients must leave clients to train");
  }
  const std::size_t trained_count = all_clients.size() - setup.holdout_clients;
  std::vector<ClientDataset> train_clients(all_clients.begin(),
                                           all_clients.begin() + trained_count);
  if (setup.normalize_inputs) {
    for (auto& ds : train_clients) normalize_dataset(ds);
  }

  fs::create_directories(out_dir + "/checkpoints");
  RunManifest manifest;
  manifest.command = "train";
  manifest.seed = setup.federation.seed;
  manifest.config_echo = cfg.entries();
  manifest.config_echo["resolved.algorithm"] = algorithm_name(setup.federation.algorithm);
  manifest.config_echo["resolved.tau"] = tau_to_string(setup.federation.factor.tau);
  manifest.config_echo["resolved.kappa"] = format_double(setup.federation.factor.kappa);
  manifest.started_at = timestamp_utc();

  const auto result = run_experiment(setup.federation, train_clients,
                                     truth ? &*truth : nullptr);

  // The run directory is self-describing: the raw dataset travels with it.
  write_text_file(out_dir + "/data.csv", read_text_file(data_path));
  if (truth) {
    write_text_file(out_dir + "/truemodel.json",
                    read_text_file(truemodel_path.string()));
  }

  const std::string algorithm = algorithm_name(setup.federation.algorithm);
  write_text_file(out_dir + "/metrics.csv",
                  metrics_csv(algorithm, setup.federation.seed, result.rounds));
  write_text_file(out_dir + "/clients.csv", clients_csv(result.rounds, train_clients));
  write_text_file(out_dir + "/stability.csv", stability_csv(result.rounds));
  write_text_file(out_dir + "/partition.json",
                  partition_json(result.rounds, setup.federation.factor.kappa));

  ServerCheckpoint server;
  server.params = result.server.params;
  server.algorithm = algorithm;
  server.seed = setup.federation.seed;
  server.rounds = setup.federation.rounds;
  server.normalize_inputs = setup.normalize_inputs;
  for (std::size_t c = 0; c < trained_count; ++c) server.trained_clients.push_back(c);
  for (std::size_t c = trained_count; c < all_clients.size(); ++c) {
    server.holdout_clients.push_back(c);
  }
  server.eta_local = setup.federation.eta_local;
  server.batch_size = setup.federation.batch_size;
  write_server_json(out_dir + "/checkpoints/server.json", server);
  for (const auto& client : result.clients) {
    write_params_json(
        out_dir + "/checkpoints/client_" + std::to_string(client.client_id) + ".json",
        client.params);
  }

  manifest.add_output(out_dir, "data.csv");
  if (truth) manifest.add_output(out_dir, "truemodel.json");
  manifest.add_output(out_dir, "metrics.csv");
  manifest.add_output(out_dir, "clients.csv");
  manifest.add_output(out_dir, "stability.csv");
  manifest.add_output(out_dir, "partition.json");
  manifest.add_output(out_dir, "checkpoints/server.json");
  for (const auto& client : result.clients) {
    manifest.add_output(out_dir,
                        "checkpoints/client_" + std::to_string(client.client_id) + ".json");
  }
  manifest.finished_at = timestamp_utc();
  manifest.write(out_dir + "/manifest.json");
  if (!manifest.verify_outputs(out_dir)) {
    std::cerr << "error: digest verification failed\n";
    return 2;
  }
  return 0;
}

struct LoadedRun {
  ServerCheckpoint server;
  std::vector<SplitParams> client_models;        // trained clients, by position
  std::vector<ClientDataset> clients;            // all clients in data.csv
};

LoadedRun load_run(const std::string& run_dir) {
  LoadedRun run;
  const std::string server_path = run_dir + "/checkpoints/server.json";
  if (!fs::exists(server_path)) {
    throw std::runtime_error("missing artifact: " + server_path);
  }
  run.server = read_server_json(server_path);
  const std::string data_path = run_dir + "/data.csv";
  if (!fs::exists(data_path)) throw std::runtime_error("missing artifact: " + data_path);
  run.clients = read_federation_csv(data_path);
  if (run.server.normalize_inputs) {
    for (auto& ds : run.clients) normalize_dataset(ds);
  }
  for (std::size_t c : run.server.trained_clients) {
    const std::string path =
        run_dir + "/checkpoints/client_" + std::to_string(c) + ".json";
    if (!fs::exists(path)) throw std::runtime_error("missing artifact: " + path);
    run.client_models.push_back(read_params_json(path));
  }
  return run;
}

int cmd_analyze(const std::string& run_dir, const std::string& mode, std::size_t k,
                std::size_t layer_1based, std::size_t mc_samples, std::size_t probe_cap,
                std::size_t adapt_epochs, double adapt_eta_flag, bool unfreeze_shared) {
  const LoadedRun run = load_run(run_dir);
  RunManifest manifest;
  manifest.command = "analyze-" + mode;
  manifest.seed = run.server.seed;
  manifest.started_at = timestamp_utc();

  if (mode == "entropy") {
    if (layer_1based == 0) throw std::invalid_argument("--layer is 1-based");
    const std::size_t layer = layer_1based - 1;
    std::vector<DenseMatrix> probes;
    std::vector<SplitParams> models;
    for (std::size_t i = 0; i < run.client_models.size(); ++i) {
      const auto& ds = run.clients[run.server.trained_clients[i]];
      if (ds.test_count() == 0) continue;
      probes.push_back(ds.x_test);
      models.push_back(run.client_models[i]);
    }
    const auto report = neuron_entropy_report(models, probes, layer, k);
    std::ostringstream csv;
    csv << "neuron_id,entropy\n";
    for (std::size_t u = 0; u < report.entropy.size(); ++u) {
      csv << u << ',' << format_double(report.entropy[u]) << "\n";
    }
    write_text_file(run_dir + "/entropy.csv", csv.str());
    manifest.add_output(run_dir, "entropy.csv");
  } else if (mode == "gram") {
    // Pooled probe rows, round-robin across clients, capped; Assumption-1
    // preprocessing (rows inside the unit ball) is always applied here.
    std::vector<std::size_t> client_of;
    std::vector<std::vector<double>> rows;
    for (std::size_t offset = 0; rows.size() < probe_cap; ++offset) {
      bool advanced = false;
      for (std::size_t i = 0; i < run.client_models.size() && rows.size() < probe_cap; ++i) {
        const auto& ds = run.clients[run.server.trained_clients[i]];
        if (offset < ds.test_count()) {
          rows.emplace_back(ds.x_test.row(offset).begin(), ds.x_test.row(offset).end());
          client_of.push_back(i);
          advanced = true;
        }
      }
      if (!advanced) break;
    }
    if (rows.size() < 2) throw std::runtime_error("gram: not enough probe rows");
    DenseMatrix x(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy(rows[i].begin(), rows[i].end(), x.row(i).begin());
    }
    normalize_rows(x);

    auto rng = derive_rng_stream(run.server.seed, {{"analyze-gram", 0}});
    const auto limit = ntk_limit_estimate(x, client_of, mc_samples, rng);

    nlohmann::json j;
    j["format"] = "fedfac-gram-v1";
    j["mc_samples"] = mc_samples;
    j["probe_rows"] = x.rows();
    j["lambda_s"] = limit.lambda_shared;
    j["lambda_p"] = limit.lambda_personalized;
    j["ordering_ok"] = limit.lambda_personalized >= limit.lambda_shared - 1e-12;
    double max_se = 0.0;
    for (double v : limit.standard_error.values()) max_se = std::max(max_se, v);
    j["max_entry_se"] = max_se;
    if (!run.server.params.partitions.empty()) {
      const auto& [layer, partition] = *run.server.params.partitions.begin();
      const auto& reference = run.client_models.empty() ? run.server.params
                                                        : run.client_models.front();
      const auto finite =
          gram_matrices(x, client_of, reference.hidden[layer], partition);
      j["finite"] = {{"layer", layer + 1},
                     {"lambda_s", finite.lambda_shared},
                     {"lambda_p", finite.lambda_personalized},
                     {"empty_personalized", finite.empty_personalized}};
    }
    write_text_file(run_dir + "/gram.json", j.dump(2) + "\n");
    manifest.add_output(run_dir, "gram.json");
  } else if (mode == "new-client") {
    if (run.server.holdout_clients.empty()) {
      throw std::runtime_error(
          "new-client analysis needs held-out clients (train.holdout_clients > 0)");
    }
    const double eta = adapt_eta_flag > 0.0 ? adapt_eta_flag : run.server.eta_local;
    std::ostringstream csv;
    csv << "client_id,n_train,n_test,acc_baseline,acc_localtrain,acc_ensemble\n";
    for (std::size_t cid : run.server.holdout_clients) {
      const auto& ds = run.clients[cid];
      auto rng_base = derive_rng_stream(run.server.seed,
                                        {{"new-client", static_cast<std::int64_t>(cid)}});
      auto rng_adapt = derive_rng_stream(run.server.seed,
                                         {{"new-client", static_cast<std::int64_t>(cid)}});
      const auto baseline =
          predict_new_client_localtrain(run.server.params, ds, 0, run.server.batch_size,
                                        eta, unfreeze_shared, rng_base);
      const auto adapted = predict_new_client_localtrain(
          run.server.params, ds, adapt_epochs, run.server.batch_size, eta,
          unfreeze_shared, rng_adapt);
      const auto ensembled = predict_new_client_ensemble(run.client_models, ds);
      csv << cid << ',' << ds.train_count() << ',' << ds.test_count() << ','
          << format_double(baseline.accuracy) << ','
          << format_double(adapted.accuracy) << ','
          << format_double(ensembled.accuracy) << "\n";
    }
    write_text_file(run_dir + "/newclient.csv", csv.str());
    manifest.add_output(run_dir, "newclient.csv");
  } else {
    throw std::invalid_argument("--mode must be entropy|gram|new-client");
  }

  manifest.finished_at = timestamp_utc();
  manifest.write(run_dir + "/manifest-analyze-" + mode + ".json");
  if (!manifest.verify_outputs(run_dir)) {
    std::cerr << "error: digest verification failed\n";
    return 2;
  }
  return 0;
}

int cmd_compare(const std::vector<std::string>& run_dirs, const std::string& out_path,
                bool summary) {
  if (run_dirs.size() < 2) throw std::invalid_argument("compare needs at least 2 runs");

  struct Run {
    std::string dir;
    std::vector<MetricsRow> rows;
    std::map<std::string, std::string> config;
  };
  std::vector<Run> runs;
  for (const auto& dir : run_dirs) {
    Run run;
    run.dir = dir;
    run.rows = read_metrics_csv(dir + "/metrics.csv");
    if (fs::exists(dir + "/manifest.json")) {
      run.config = RunManifest::read(dir + "/manifest.json").config_echo;
    }
    if (run.rows.empty()) throw std::runtime_error("no metrics rows in " + dir);
    runs.push_back(std::move(run));
  }

  std::ostringstream out;
  if (summary) {
    out << "run,algorithm,seed,rounds,tau,kappa,split_layers,final_train_loss,"
           "final_weighted_acc,loss_auc\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto& rows = runs[i].rows;
      double auc = 0.0;
      for (const auto& row : rows) auc += row.train_loss;
      const auto& last = rows.back();
      auto lookup = [&](const std::string& key) {
        const auto it = runs[i].config.find(key);
        return it == runs[i].config.end() ? std::string() : it->second;
      };
      out << runs[i].dir << ',' << last.algorithm << ',' << last.seed << ','
          << rows.size() << ',' << lookup("resolved.tau") << ','
          << lookup("resolved.kappa") << ',' << lookup("split.layers") << ','
          << format_double(last.train_loss) << ','
          << format_double(last.weighted_acc) << ',' << format_double(auc) << "\n";
    }
  } else {
    out << "run,algorithm,seed,round,train_loss,weighted_acc,min_client_acc,"
           "max_client_acc,d_train_loss,d_weighted_acc\n";
    std::map<std::size_t, const MetricsRow*> reference;
    for (const auto& row : runs.front().rows) reference[row.round] = &row;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      for (const auto& row : runs[i].rows) {
        out << runs[i].dir << ',' << row.algorithm << ',' << row.seed << ','
            << row.round << ',' << format_double(row.train_loss) << ','
            << format_double(row.weighted_acc) << ','
            << format_double(row.min_client_acc) << ','
            << format_double(row.max_client_acc);
        const auto it = reference.find(row.round);
        if (it != reference.end()) {
          out << ',' << format_double(row.train_loss - it->second->train_loss) << ','
              << format_double(row.weighted_acc - it->second->weighted_acc);
        } else {
          out << ",,";
        }
        out << "\n";
      }
    }
  }
  write_text_file(out_path, out.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic federated-learning simulator with factor-analysis "
               "parameter decoupling"};
  app.require_subcommand(1);

  std::string config_path;
  std::string data_path;
  std::string out_dir;
  std::string run_dir;
  std::string mode;
  std::string out_path;
  std::vector<std::string> run_dirs;
  std::size_t workers = 0;
  std::size_t k = 3;
  std::size_t layer = 1;
  std::size_t mc_samples = 4000;
  std::size_t probe_cap = 128;
  std::size_t adapt_epochs = 20;
  double adapt_eta = 0.0;
  bool unfreeze_shared = false;
  bool summary = false;

  auto* gen = app.add_subcommand("gen-data", "Generate a federated dataset CSV");
  gen->add_option("--config", config_path, "key = value config file")->required();
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* train = app.add_subcommand("train", "Run a federated training experiment");
  train->add_option("--config", config_path, "key = value config file")->required();
  train->add_option("--data", data_path, "dataset CSV from gen-data")->required();
  train->add_option("--out", out_dir, "run directory")->required();
  train->add_option("--workers", workers, "worker threads (overrides config)");

  auto* analyze = app.add_subcommand("analyze", "Diagnostics over a finished run");
  analyze->add_option("--run", run_dir, "run directory from train")->required();
  analyze->add_option("--mode", mode, "entropy|gram|new-client")->required();
  analyze->add_option("--k", k, "nearest-neighbor count for entropy");
  analyze->add_option("--layer", layer, "1-based hidden layer for entropy");
  analyze->add_option("--mc-samples", mc_samples, "Monte-Carlo draws for gram");
  analyze->add_option("--probe", probe_cap, "max pooled probe rows for gram");
  analyze->add_option("--adapt-epochs", adapt_epochs, "LocalTrain epochs");
  analyze->add_option("--adapt-eta", adapt_eta, "LocalTrain step size");
  analyze->add_flag("--unfreeze-shared", unfreeze_shared,
                    "also adapt shared rows in LocalTrain");

  auto* compare = app.add_subcommand("compare", "Merge metrics of several runs");
  compare->add_option("--out", out_path, "merged CSV path")->required();
  compare->add_flag("--summary", summary, "one row per run instead of per round");
  compare->add_option("runs", run_dirs, "run directories")->expected(-2);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(config_path, out_dir);
    if (train->parsed()) {
      return cmd_train(config_path, data_path, out_dir,
                       workers == 0 ? std::nullopt : std::optional<std::size_t>(workers));
    }
    if (analyze->parsed()) {
      return cmd_analyze(run_dir, mode, k, layer, mc_samples, probe_cap, adapt_epochs,
                         adapt_eta, unfreeze_shared);
    }
    if (compare->parsed()) return cmd_compare(run_dirs, out_path, summary);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
