#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fednlp/experiment/config.hpp"
#include "fednlp/experiment/dataset.hpp"
#include "fednlp/experiment/metrics.hpp"
#include "fednlp/fl/federation.hpp"
#include "fednlp/fl/server.hpp"
#include "fednlp/fl/shard_trainer.hpp"
#include "fednlp/models/model.hpp"
#include "fednlp/transport/tcp.hpp"

namespace fednlp::experiment {

/// Outcome of one training phase (MLM pretraining or classification).
struct PhaseResult {
  Phase phase = Phase::finetune_classify;
  std::string run_id;
  std::vector<MetricsRecord> records;
  /// The trained model (centralized, federated). Empty for standalone.
  ParameterSet final_params;
  /// One trained model per client (standalone only).
  std::vector<ParameterSet> client_params;
  /// Global parameters after each round, when RunHooks::keep_round_params.
  std::vector<ParameterSet> round_params;
  /// Global validation before training and after the last round. For
  /// standalone these are means over clients.
  double initial_loss = 0.0;
  double initial_accuracy = 0.0;
  double final_loss = 0.0;
  double final_accuracy = 0.0;
  /// Standalone: each client's final global-validation accuracy.
  std::vector<double> client_final_accuracy;
  /// crc32 over the wire encoding of every trained parameter set.
  std::uint32_t checksum = 0;
};

struct RunResult {
  std::vector<PhaseResult> phases;
  const PhaseResult& last() const { return phases.back(); }
};

/// Spawns the clients of one federated session against `server`, starting
/// client i only once `gate` reports i provisioned clients, then waits for
/// them to exit.
using ClientLauncher = std::function<void(const transport::Address& server, Phase phase, fl::ProvisionGate& gate)>;

struct RunHooks {
  bool keep_round_params = false;
  /// Federated runs over tcp: launch clients as separate processes. Without
  /// a launcher, tcp clients run on threads of this process.
  ClientLauncher launch_clients;
  /// Called as each metrics record is produced (progress output).
  std::function<void(const MetricsRecord&)> on_record;
};

models::ModelConfig model_config(const ExperimentConfig& config, const PreparedData& data);

/// Validation scorer on the global held-out set shared by every mode.
fl::Server::Validator make_validator(const ExperimentConfig& config, const PreparedData& data, models::Head head);

/// Learner settings for data owner `stream`.
fl::LearnerOptions learner_options(const ExperimentConfig& config, const PreparedData& data, models::Head head,
                                   std::uint64_t stream);

fl::TrainDirective train_directive(const ExperimentConfig& config);

/// Runs every phase `config` asks for.
RunResult run_experiment(const ExperimentConfig& config, const RunHooks& hooks = {});
RunResult run_experiment(const ExperimentConfig& config, const PreparedData& data, const RunHooks& hooks = {});

/// One networked client role: trains shard `site` for the session at `server`.
/// Throws std::runtime_error unless the session completes normally.
void run_remote_client(const ExperimentConfig& config, const PreparedData& data, std::size_t site, Phase phase,
                       const transport::Address& server);

/// One networked server role over an existing endpoint.
PhaseResult serve_phase(const ExperimentConfig& config, const PreparedData& data, Phase phase,
                        const ParameterSet& initial, transport::ServerEndpoint& endpoint,
                        const RunHooks& hooks = {}, fl::ProvisionGate* gate = nullptr);

/// Initial parameters of a phase; for classification, the encoder is taken
/// from `encoder` when given, else from config.init_from when set.
ParameterSet initial_parameters(const ExperimentConfig& config, const PreparedData& data, Phase phase,
                                const ParameterSet* encoder = nullptr);

/// Parameter files hold one GlobalModel frame (round 0).
void save_params(const std::filesystem::path& path, const ParameterSet& params);
ParameterSet load_params(const std::filesystem::path& path);

std::uint32_t params_checksum(std::span<const ParameterSet> sets);
std::string checksum_hex(std::uint32_t checksum);

/// metrics CSV, final parameters and resolved config under `out_dir`.
void write_outputs(const ExperimentConfig& config, const RunResult& result, const std::filesystem::path& out_dir);

/// File name of a phase's metrics inside an output directory.
std::string metrics_file_name(const ExperimentConfig& config, Phase phase);

}  // namespace fednlp::experiment
