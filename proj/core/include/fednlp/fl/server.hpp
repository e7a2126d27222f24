#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fednlp/fl/aggregate.hpp"
#include "fednlp/fl/messages.hpp"

namespace fednlp::fl {

enum class ServerPhase { awaiting_provision, distributing, collecting, aggregating, done, aborted };

std::string_view server_phase_name(ServerPhase phase);

struct ServerOptions {
  std::size_t n_clients = 8;
  std::string auth_token;
  std::uint32_t rounds = 10;
  TrainDirective directive;
  AggregationRule rule = AggregationRule::weighted;
  std::uint64_t key_seed = 0;
  /// Keep a copy of every round's aggregated parameters.
  bool keep_round_params = false;

  void validate() const;
};

struct ValidationResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

struct ClientRoundStats {
  std::uint32_t client_id = 0;
  std::uint64_t n_samples = 0;
  LocalMetrics metrics;
};

struct RoundSummary {
  std::uint32_t round = 0;
  GlobalMetrics metrics;
  std::vector<ClientRoundStats> clients;  ///< by client_id
};

/// The session ended before the last round completed.
class RoundAborted : public std::runtime_error {
 public:
  RoundAborted(std::uint32_t round, const std::string& reason)
      : std::runtime_error("round " + std::to_string(round) + " aborted: " + reason), round_(round) {}
  std::uint32_t round() const { return round_; }

 private:
  std::uint32_t round_;
};

struct Outgoing {
  std::size_t link = 0;
  FlMessage message;
};

/// Synchronous FedAvg coordinator as a pure state machine. Transports feed
/// it inbound messages tagged with a link number and deliver what it returns.
///
/// Clients are provisioned in Hello order with ids 0..n-1. Once all n are
/// provisioned each round broadcasts the global model, waits for one update
/// from every client, aggregates, validates and broadcasts RoundComplete.
/// After the last round every client receives Shutdown.
class Server {
 public:
  using Validator = std::function<ValidationResult(const ParameterSet&)>;

  /// `initial` is rounded to wire precision before round 1.
  Server(ServerOptions options, const ParameterSet& initial, Validator validator = {});

  std::vector<Outgoing> handle(std::size_t link, const FlMessage& message);

  /// A transport lost `link`. Aborts the session if the link belongs to a
  /// provisioned client and training is not finished.
  std::vector<Outgoing> link_closed(std::size_t link, const std::string& detail);

  ServerPhase phase() const { return phase_; }
  bool finished() const { return phase_ == ServerPhase::done || phase_ == ServerPhase::aborted; }
  /// Current round (0 until round 1 is distributed).
  std::uint32_t round() const { return round_; }
  const std::string& abort_reason() const { return abort_reason_; }
  std::size_t provisioned_count() const { return clients_.size(); }
  std::optional<std::uint32_t> client_id_of(std::size_t link) const;

  const ParameterSet& global() const { return global_; }
  const ServerOptions& options() const { return options_; }
  /// Validation of the initial parameters (round 0).
  const ValidationResult& initial_validation() const { return initial_validation_; }
  const std::vector<RoundSummary>& summaries() const { return summaries_; }
  const std::vector<ParameterSet>& round_params() const { return round_params_; }

  std::size_t global_models_sent() const { return global_models_sent_; }
  std::size_t updates_accepted() const { return updates_accepted_; }

 private:
  struct ClientInfo {
    std::uint32_t id;
    std::string name;
    std::size_t link;
    std::uint64_t key;
  };

  std::vector<Outgoing> on_hello(std::size_t link, const Hello& hello);
  std::vector<Outgoing> on_update(std::size_t link, const LocalUpdate& update);
  std::vector<Outgoing> distribute();
  std::vector<Outgoing> complete_round();
  std::vector<Outgoing> abort(const std::string& reason, std::optional<Outgoing> notice = std::nullopt);
  std::vector<Outgoing> broadcast_shutdown(const std::string& reason);
  ValidationResult validate_global() const;

  ServerOptions options_;
  Validator validator_;
  ParameterSet global_;
  ServerPhase phase_ = ServerPhase::awaiting_provision;
  std::uint32_t round_ = 0;
  std::string abort_reason_;
  std::vector<ClientInfo> clients_;
  std::map<std::size_t, std::uint32_t> link_to_client_;
  std::map<std::uint32_t, LocalUpdate> pending_;
  ValidationResult initial_validation_;
  std::vector<RoundSummary> summaries_;
  std::vector<ParameterSet> round_params_;
  std::size_t global_models_sent_ = 0;
  std::size_t updates_accepted_ = 0;
};

}  // namespace fednlp::fl
