#pragma once

#include <cstdint>

#include "fednlp/fl/messages.hpp"

namespace fednlp::fl {

/// Keyed checksum binding a message to a provisioned session: a seeded
/// 64-bit mix over the message payload encoded with session_tag = 0.
/// Detects tampering and cross-session replay in a trusted simulation; it is
/// not a cryptographic MAC.
std::uint64_t session_tag(std::uint64_t session_key, const FlMessage& message);

/// Copy of `message` with its session_tag field set (no-op for untagged types).
FlMessage sign(std::uint64_t session_key, FlMessage message);

/// True when the message carries no tag field or its tag matches.
bool verify(std::uint64_t session_key, const FlMessage& message);

/// Session key for the client provisioned as `client_id`.
std::uint64_t derive_session_key(std::uint64_t key_seed, std::uint32_t client_id);

}  // namespace fednlp::fl
