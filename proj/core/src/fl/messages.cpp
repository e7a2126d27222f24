#include "fednlp/fl/messages.hpp"

#include <bit>

namespace fednlp::fl {

namespace {

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

}  // namespace

bool operator==(const TrainDirective& a, const TrainDirective& b) {
  return a.local_epochs == b.local_epochs && same_bits(a.lr, b.lr) && a.reset_optimizer == b.reset_optimizer;
}

bool operator==(const LocalMetrics& a, const LocalMetrics& b) {
  return same_bits(a.train_loss, b.train_loss) && same_bits(a.train_accuracy, b.train_accuracy) &&
         same_bits(a.val_loss, b.val_loss) && same_bits(a.val_accuracy, b.val_accuracy);
}

bool operator==(const GlobalMetrics& a, const GlobalMetrics& b) {
  return same_bits(a.val_loss, b.val_loss) && same_bits(a.val_accuracy, b.val_accuracy) &&
         same_bits(a.client_loss, b.client_loss) && same_bits(a.client_accuracy, b.client_accuracy);
}

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::auth_failed: return "auth_failed";
    case ErrorCode::duplicate_client: return "duplicate_client";
    case ErrorCode::capacity: return "capacity";
    case ErrorCode::manifest_mismatch: return "manifest_mismatch";
    case ErrorCode::stale_round: return "stale_round";
    case ErrorCode::bad_session: return "bad_session";
    case ErrorCode::unexpected_message: return "unexpected_message";
    case ErrorCode::aborted: return "aborted";
  }
  return "unknown";
}

bool is_known_error_code(std::uint16_t code) { return code >= 1 && code <= 8; }

MessageType message_type(const FlMessage& message) {
  return static_cast<MessageType>(message.index() + 1);
}

std::string_view message_type_name(MessageType type) {
  switch (type) {
    case MessageType::hello: return "Hello";
    case MessageType::provisioned: return "Provisioned";
    case MessageType::global_model: return "GlobalModel";
    case MessageType::local_update: return "LocalUpdate";
    case MessageType::round_complete: return "RoundComplete";
    case MessageType::shutdown: return "Shutdown";
    case MessageType::error: return "Error";
  }
  return "Unknown";
}

bool is_known_message_type(std::uint8_t type) { return type >= 1 && type <= 7; }

}  // namespace fednlp::fl
