#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fednlp/fl/messages.hpp"

namespace fednlp::transport {

// Frame layout (little-endian):
//   magic "FLNP" | u16 version | u8 msg_type | u32 payload_len | payload | u32 crc32(payload)
inline constexpr std::array<std::uint8_t, 4> kMagic = {'F', 'L', 'N', 'P'};
inline constexpr std::uint16_t kWireVersion = 1;
inline constexpr std::size_t kHeaderSize = 11;
inline constexpr std::size_t kTrailerSize = 4;
inline constexpr std::size_t kDefaultFrameCap = std::size_t{64} << 20;

enum class DecodeErrorCode {
  truncated,
  bad_magic,
  unsupported_version,
  unknown_type,
  checksum_mismatch,
  oversized,
  malformed_payload,
  trailing_bytes,
  invalid_value,
};

std::string_view decode_error_name(DecodeErrorCode code);

struct DecodeError {
  DecodeErrorCode code;
  std::string detail;
};

using DecodeResult = std::variant<fl::FlMessage, DecodeError>;

struct FrameHeader {
  fl::MessageType type;
  std::uint32_t payload_len = 0;
  std::size_t frame_size() const { return kHeaderSize + payload_len + kTrailerSize; }
};

/// Payload bytes only (no framing). Throws UsageError for values the
/// decoder would reject (non-finite parameters, oversized strings).
std::vector<std::uint8_t> encode_payload(const fl::FlMessage& message);

/// A complete frame.
std::vector<std::uint8_t> encode_message(const fl::FlMessage& message);

/// Decodes exactly one frame; every byte of `bytes` must belong to it.
DecodeResult decode_message(std::span<const std::uint8_t> bytes, std::size_t frame_cap = kDefaultFrameCap);

DecodeResult decode_payload(fl::MessageType type, std::span<const std::uint8_t> payload);

/// Validates magic, version, type and size of the first kHeaderSize bytes.
std::variant<FrameHeader, DecodeError> parse_header(std::span<const std::uint8_t> bytes,
                                                    std::size_t frame_cap = kDefaultFrameCap);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Reassembles frames from an arbitrarily chunked byte stream.
class FrameAssembler {
 public:
  explicit FrameAssembler(std::size_t frame_cap = kDefaultFrameCap) : frame_cap_(frame_cap) {}

  void feed(std::span<const std::uint8_t> bytes);

  /// Next complete decoded frame, if any. A header error is reported once
  /// and poisons the stream (framing can no longer be trusted).
  std::optional<DecodeResult> next();

  std::size_t buffered() const { return buffer_.size() - offset_; }

 private:
  std::size_t frame_cap_;
  std::vector<std::uint8_t> buffer_;
  std::size_t offset_ = 0;
  bool poisoned_ = false;
};

}  // namespace fednlp::transport
