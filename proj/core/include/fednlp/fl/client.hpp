#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fednlp/fl/messages.hpp"

namespace fednlp::fl {

struct LocalResult {
  ParameterSet params;
  std::uint64_t n_samples = 0;
  LocalMetrics metrics;
};

/// Local training behind a client. Implementations own their data shard.
class LocalTrainer {
 public:
  virtual ~LocalTrainer() = default;
  /// Whether `global` has the names and shapes this trainer expects.
  virtual bool accepts(const ParameterSet& global) const = 0;
  virtual LocalResult train(const ParameterSet& global, const TrainDirective& directive, std::uint32_t round) = 0;
};

enum class ClientPhase { unprovisioned, awaiting_provision, ready, done };

/// Client side of the protocol as a state machine: produce Hello, then feed
/// every inbound message to handle() and send back what it returns.
class Client {
 public:
  Client(std::string name, std::string auth_token, LocalTrainer& trainer);

  FlMessage hello();
  std::vector<FlMessage> handle(const FlMessage& message);

  ClientPhase phase() const { return phase_; }
  bool finished() const { return phase_ == ClientPhase::done; }
  const std::string& name() const { return name_; }
  std::optional<std::uint32_t> client_id() const { return client_id_; }
  const RoundPlan& round_plan() const { return plan_; }
  std::uint32_t last_round() const { return last_round_; }
  const std::vector<RoundComplete>& completed_rounds() const { return completed_; }
  /// Set when the session ended with Shutdown.
  const std::optional<std::string>& shutdown_reason() const { return shutdown_reason_; }
  /// Set when the session ended with an Error (sent or received).
  const std::optional<Error>& error() const { return error_; }

 private:
  std::vector<FlMessage> fail(ErrorCode code, std::string detail);
  std::vector<FlMessage> on_global(const GlobalModel& gm);

  std::string name_;
  std::string auth_token_;
  LocalTrainer& trainer_;
  ClientPhase phase_ = ClientPhase::unprovisioned;
  std::optional<std::uint32_t> client_id_;
  std::uint64_t session_key_ = 0;
  RoundPlan plan_;
  std::uint32_t last_round_ = 0;
  std::vector<RoundComplete> completed_;
  std::optional<std::string> shutdown_reason_;
  std::optional<Error> error_;
};

}  // namespace fednlp::fl
