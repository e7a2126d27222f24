#include "fednlp/fl/session.hpp"

#include "fednlp/tensor/rng.hpp"
#include "fednlp/transport/wire.hpp"

namespace fednlp::fl {

namespace {

std::uint64_t* tag_field(FlMessage& message) {
  if (auto* m = std::get_if<GlobalModel>(&message)) return &m->session_tag;
  if (auto* m = std::get_if<LocalUpdate>(&message)) return &m->session_tag;
  if (auto* m = std::get_if<RoundComplete>(&message)) return &m->session_tag;
  return nullptr;
}

std::uint64_t mix(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace

std::uint64_t session_tag(std::uint64_t session_key, const FlMessage& message) {
  FlMessage copy = message;
  if (std::uint64_t* tag = tag_field(copy)) *tag = 0;
  std::vector<std::uint8_t> bytes = transport::encode_payload(copy);
  std::uint64_t h = mix(session_key ^ 0x6a09e667f3bcc908ULL) ^ static_cast<std::uint64_t>(message.index());
  std::size_t i = 0;
  for (; i + 8 <= bytes.size(); i += 8) {
    std::uint64_t word = 0;
    for (int b = 0; b < 8; ++b) word |= std::uint64_t{bytes[i + b]} << (8 * b);
    h = mix(h ^ word) + 0x9e3779b97f4a7c15ULL;
  }
  std::uint64_t tail = 0;
  for (int b = 0; i < bytes.size(); ++i, ++b) tail |= std::uint64_t{bytes[i]} << (8 * b);
  h = mix(h ^ tail ^ (static_cast<std::uint64_t>(bytes.size()) << 56));
  return mix(h ^ session_key);
}

FlMessage sign(std::uint64_t session_key, FlMessage message) {
  if (std::uint64_t* tag = tag_field(message)) *tag = session_tag(session_key, message);
  return message;
}

bool verify(std::uint64_t session_key, const FlMessage& message) {
  FlMessage copy = message;
  std::uint64_t* tag = tag_field(copy);
  if (tag == nullptr) return true;
  return *tag == session_tag(session_key, message);
}

std::uint64_t derive_session_key(std::uint64_t key_seed, std::uint32_t client_id) {
  return Rng::derive(key_seed, {0x5E55, client_id});
}

}  // namespace fednlp::fl
