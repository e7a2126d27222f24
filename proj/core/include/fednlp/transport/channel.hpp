#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "fednlp/transport/endpoint.hpp"

namespace fednlp::transport {

struct ChannelOptions {
  /// Pass every message through encode_message/decode_message in transit.
  bool encode_frames = false;
  /// Probability that a message is lost. A lost message severs its link,
  /// which both sides then observe as closed.
  double drop_probability = 0.0;
  /// Upper bound of a uniform per-message delivery delay.
  std::uint32_t max_latency_us = 0;
  std::uint64_t fault_seed = 0;

  void validate() const;
};

/// In-process duplex links between one server and `n_links` clients.
/// Faults are a pure function of (fault_seed, link, direction, message index).
class ChannelHub {
 public:
  explicit ChannelHub(std::size_t n_links, ChannelOptions options = {});
  ~ChannelHub();
  ChannelHub(const ChannelHub&) = delete;
  ChannelHub& operator=(const ChannelHub&) = delete;

  std::size_t link_count() const;
  ServerEndpoint& server();
  /// The client end of link `i`; valid for the lifetime of the hub.
  ClientEndpoint& client(std::size_t i);

  struct State;

 private:
  std::shared_ptr<State> state_;
  std::unique_ptr<ServerEndpoint> server_;
  std::vector<std::unique_ptr<ClientEndpoint>> clients_;
};

}  // namespace fednlp::transport
