#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

#include "fednlp/tensor/parameter_set.hpp"

namespace fednlp::fl {

/// Session schedule announced at provisioning.
struct RoundPlan {
  std::uint32_t total_rounds = 0;
  std::uint32_t local_epochs = 0;
  friend bool operator==(const RoundPlan&, const RoundPlan&) = default;
};

/// What a client does with a GlobalModel.
struct TrainDirective {
  std::uint32_t local_epochs = 1;
  double lr = 1e-2;
  /// Fresh Adam moments every round (only parameters cross the wire).
  bool reset_optimizer = true;
  friend bool operator==(const TrainDirective& a, const TrainDirective& b);
};

struct LocalMetrics {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;  ///< on the client's held-out slice
  double val_accuracy = 0.0;
  friend bool operator==(const LocalMetrics& a, const LocalMetrics& b);
};

struct GlobalMetrics {
  double val_loss = 0.0;  ///< server-held validation set
  double val_accuracy = 0.0;
  double client_loss = 0.0;  ///< sample-weighted mean of client hold-out metrics
  double client_accuracy = 0.0;
  friend bool operator==(const GlobalMetrics& a, const GlobalMetrics& b);
};

enum class ErrorCode : std::uint16_t {
  auth_failed = 1,
  duplicate_client = 2,
  capacity = 3,
  manifest_mismatch = 4,
  stale_round = 5,
  bad_session = 6,
  unexpected_message = 7,
  aborted = 8,
};

std::string_view error_code_name(ErrorCode code);
bool is_known_error_code(std::uint16_t code);

struct Hello {
  std::string client_name;
  std::string auth_token;
  friend bool operator==(const Hello&, const Hello&) = default;
};

struct Provisioned {
  std::uint32_t client_id = 0;
  std::uint64_t session_key = 0;
  RoundPlan round_plan;
  friend bool operator==(const Provisioned&, const Provisioned&) = default;
};

struct GlobalModel {
  std::uint32_t round = 0;
  ParameterSet params;
  TrainDirective directive;
  std::uint64_t session_tag = 0;
  friend bool operator==(const GlobalModel&, const GlobalModel&) = default;
};

struct LocalUpdate {
  std::uint32_t client_id = 0;
  std::uint32_t round = 0;
  ParameterSet params;
  std::uint64_t n_samples = 0;
  LocalMetrics local_metrics;
  std::uint64_t session_tag = 0;
  friend bool operator==(const LocalUpdate&, const LocalUpdate&) = default;
};

struct RoundComplete {
  std::uint32_t round = 0;
  GlobalMetrics global_metrics;
  std::uint64_t session_tag = 0;
  friend bool operator==(const RoundComplete&, const RoundComplete&) = default;
};

struct Shutdown {
  std::string reason;
  friend bool operator==(const Shutdown&, const Shutdown&) = default;
};

struct Error {
  ErrorCode code = ErrorCode::aborted;
  std::string detail;
  friend bool operator==(const Error&, const Error&) = default;
};

/// Every message exchanged between server and clients. Values are immutable
/// once sent. Real-valued fields compare bitwise, so equal messages encode
/// to equal bytes.
using FlMessage = std::variant<Hello, Provisioned, GlobalModel, LocalUpdate, RoundComplete, Shutdown, Error>;

enum class MessageType : std::uint8_t {
  hello = 1,
  provisioned = 2,
  global_model = 3,
  local_update = 4,
  round_complete = 5,
  shutdown = 6,
  error = 7,
};

MessageType message_type(const FlMessage& message);
std::string_view message_type_name(MessageType type);
bool is_known_message_type(std::uint8_t type);

}  // namespace fednlp::fl
