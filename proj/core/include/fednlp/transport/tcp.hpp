#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "fednlp/transport/endpoint.hpp"
#include "fednlp/transport/wire.hpp"

namespace fednlp::transport {

inline constexpr std::uint16_t kDefaultPort = 7878;

struct Address {
  std::string host = "127.0.0.1";
  std::uint16_t port = kDefaultPort;
  std::string to_string() const { return host + ":" + std::to_string(port); }
};

/// Parses "HOST:PORT" (port 0 asks the OS for an ephemeral port when binding).
/// Throws ConfigError.
Address parse_address(std::string_view text);

/// Listens on an address; each accepted connection becomes a link numbered
/// in accept order. One reader thread per connection feeds the inbox.
class TcpServer final : public ServerEndpoint {
 public:
  explicit TcpServer(const Address& bind, std::size_t frame_cap = kDefaultFrameCap);
  ~TcpServer() override;
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  /// The bound port (useful after binding port 0).
  std::uint16_t port() const;

  std::optional<InboxEvent> next() override;
  void send(std::size_t link, const fl::FlMessage& message) override;
  void close_link(std::size_t link) override;
  void close() override;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

/// Connects to a TcpServer, retrying until `timeout` elapses. Throws
/// std::runtime_error when no connection can be made.
std::unique_ptr<ClientEndpoint> tcp_connect(const Address& server,
                                            std::chrono::milliseconds timeout = std::chrono::seconds(10),
                                            std::size_t frame_cap = kDefaultFrameCap);

}  // namespace fednlp::transport
