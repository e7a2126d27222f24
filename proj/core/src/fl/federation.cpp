#include "fednlp/fl/federation.hpp"

#include <deque>
#include <exception>
#include <memory>
#include <set>
#include <thread>
#include <vector>

#include "fednlp/tensor/errors.hpp"
#include "fednlp/transport/tcp.hpp"

namespace fednlp::fl {

void ProvisionGate::publish(std::size_t provisioned) {
  {
    std::lock_guard lock(mutex_);
    provisioned_ = provisioned;
  }
  cv_.notify_all();
}

bool ProvisionGate::wait_for(std::size_t n) {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return cancelled_ || provisioned_ >= n; });
  return !cancelled_;
}

void ProvisionGate::cancel() {
  {
    std::lock_guard lock(mutex_);
    cancelled_ = true;
  }
  cv_.notify_all();
}

std::string site_name(std::size_t index) { return "site-" + std::to_string(index); }

void serve(Server& server, transport::ServerEndpoint& endpoint, const ServeHooks& hooks) {
  std::size_t reported = server.summaries().size();
  std::set<std::size_t> closed;

  auto deliver = [&](std::vector<Outgoing> out) {
    std::deque<Outgoing> queue(std::make_move_iterator(out.begin()), std::make_move_iterator(out.end()));
    while (!queue.empty()) {
      Outgoing o = std::move(queue.front());
      queue.pop_front();
      if (closed.count(o.link) != 0) continue;
      try {
        endpoint.send(o.link, o.message);
      } catch (const transport::LinkClosed& e) {
        closed.insert(o.link);
        for (auto& more : server.link_closed(o.link, e.what())) queue.push_back(std::move(more));
      }
    }
  };

  auto fail = [&](const std::string& reason) {
    if (hooks.gate != nullptr) hooks.gate->cancel();
    endpoint.close();
    throw RoundAborted(server.round(), reason);
  };

  while (!server.finished()) {
    auto event = endpoint.next();
    if (!event) fail("server endpoint closed");
    if (event->message) {
      deliver(server.handle(event->link, *event->message));
    } else {
      closed.insert(event->link);
      deliver(server.link_closed(event->link, event->detail));
    }
    if (hooks.gate != nullptr) hooks.gate->publish(server.provisioned_count());
    while (reported < server.summaries().size()) {
      if (hooks.on_round) hooks.on_round(server.summaries()[reported]);
      ++reported;
    }
  }
  if (server.phase() == ServerPhase::aborted) fail(server.abort_reason());

  auto all_closed = [&] {
    for (std::size_t id = 0; id < server.provisioned_count(); ++id) {
      bool found = false;
      for (std::size_t link : closed) {
        if (server.client_id_of(link) == id) found = true;
      }
      if (!found) return false;
    }
    return true;
  };
  while (!all_closed()) {
    auto event = endpoint.next();
    if (!event) break;
    if (!event->message) closed.insert(event->link);
  }
}

void run_client(Client& client, transport::ClientEndpoint& endpoint) {
  struct Closer {
    transport::ClientEndpoint& e;
    ~Closer() { e.close(); }
  } closer{endpoint};
  try {
    endpoint.send(client.hello());
    while (!client.finished()) {
      auto message = endpoint.receive();
      if (!message) return;
      for (const auto& reply : client.handle(*message)) endpoint.send(reply);
    }
  } catch (const transport::LinkClosed&) {
  }
}

namespace {

using EndpointFactory = std::function<std::unique_ptr<transport::ClientEndpoint>(std::size_t)>;
using EndpointRef = std::function<transport::ClientEndpoint&(std::size_t)>;

void run_threads(Server& server, transport::ServerEndpoint& endpoint, std::span<LocalTrainer* const> trainers,
                 const EndpointRef& client_endpoint, const ServeHooks& hooks) {
  if (trainers.size() != server.options().n_clients) {
    throw UsageError("federation: " + std::to_string(trainers.size()) + " trainers for " +
                     std::to_string(server.options().n_clients) + " clients");
  }
  ProvisionGate local_gate;
  ServeHooks h = hooks;
  ProvisionGate& gate = hooks.gate != nullptr ? *hooks.gate : local_gate;
  h.gate = &gate;

  std::vector<std::exception_ptr> errors(trainers.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < trainers.size(); ++i) {
    threads.emplace_back([&, i] {
      try {
        transport::ClientEndpoint& ep = client_endpoint(i);
        if (!gate.wait_for(i)) {
          ep.close();
          return;
        }
        Client client(site_name(i), server.options().auth_token, *trainers[i]);
        run_client(client, ep);
        if (!client.client_id()) {
          gate.cancel();
          endpoint.close();
        }
      } catch (...) {
        errors[i] = std::current_exception();
        gate.cancel();
      }
    });
  }
  std::exception_ptr server_error;
  try {
    serve(server, endpoint, h);
  } catch (...) {
    server_error = std::current_exception();
    gate.cancel();
    endpoint.close();
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  if (server_error) std::rethrow_exception(server_error);
}

}  // namespace

void run_in_process(Server& server, std::span<LocalTrainer* const> trainers, const transport::ChannelOptions& channel,
                    const ServeHooks& hooks) {
  transport::ChannelHub hub(trainers.size(), channel);
  run_threads(server, hub.server(), trainers, [&](std::size_t i) -> transport::ClientEndpoint& { return hub.client(i); },
              hooks);
}

void run_over_loopback_tcp(Server& server, std::span<LocalTrainer* const> trainers, const ServeHooks& hooks) {
  transport::TcpServer tcp(transport::Address{"127.0.0.1", 0});
  transport::Address addr{"127.0.0.1", tcp.port()};
  std::vector<std::unique_ptr<transport::ClientEndpoint>> endpoints(trainers.size());
  std::mutex mutex;
  run_threads(server, tcp, trainers,
              [&](std::size_t i) -> transport::ClientEndpoint& {
                auto ep = transport::tcp_connect(addr);
                std::lock_guard lock(mutex);
                endpoints[i] = std::move(ep);
                return *endpoints[i];
              },
              hooks);
}

}  // namespace fednlp::fl
