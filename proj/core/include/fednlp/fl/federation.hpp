#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <span>
#include <string>

#include "fednlp/fl/client.hpp"
#include "fednlp/fl/server.hpp"
#include "fednlp/transport/channel.hpp"
#include "fednlp/transport/endpoint.hpp"

namespace fednlp::fl {

/// Publishes the server's provisioned-client count so launchers can start
/// client i only after clients 0..i-1 hold their ids. This makes id
/// assignment, and with it every client's data stream, deterministic.
class ProvisionGate {
 public:
  void publish(std::size_t provisioned);
  /// Blocks until at least `n` clients are provisioned; false if cancelled.
  bool wait_for(std::size_t n);
  void cancel();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t provisioned_ = 0;
  bool cancelled_ = false;
};

struct ServeHooks {
  ProvisionGate* gate = nullptr;
  std::function<void(const RoundSummary&)> on_round;
};

/// Drives `server` over `endpoint` until the session ends. After a normal
/// finish it waits for every provisioned client to close its link and leaves
/// the endpoint open for another session. Throws RoundAborted (after closing
/// the endpoint) if the session aborts.
void serve(Server& server, transport::ServerEndpoint& endpoint, const ServeHooks& hooks = {});

/// Sends Hello and answers messages until the client finishes or the link
/// drops. Always closes the endpoint.
void run_client(Client& client, transport::ClientEndpoint& endpoint);

std::string site_name(std::size_t index);

/// One server and `trainers.size()` clients on threads over an in-process
/// channel. Client i is named site_name(i) and is provisioned as id i.
void run_in_process(Server& server, std::span<LocalTrainer* const> trainers,
                    const transport::ChannelOptions& channel = {}, const ServeHooks& hooks = {});

/// As run_in_process, over TCP on the loopback interface.
void run_over_loopback_tcp(Server& server, std::span<LocalTrainer* const> trainers, const ServeHooks& hooks = {});

}  // namespace fednlp::fl
