#include "fednlp/transport/channel.hpp"

#include <chrono>
#include <thread>

#include "fednlp/tensor/errors.hpp"
#include "fednlp/tensor/rng.hpp"
#include "fednlp/transport/wire.hpp"

namespace fednlp::transport {

void ChannelOptions::validate() const {
  if (!(drop_probability >= 0.0 && drop_probability <= 1.0)) {
    throw ConfigError("channel: drop_probability must lie in [0, 1]");
  }
}

struct ChannelHub::State {
  struct Link {
    BlockingQueue<fl::FlMessage> to_client;
    bool severed = false;
    std::uint64_t sent[2] = {0, 0};
  };

  ChannelOptions options;
  std::mutex mutex;
  BlockingQueue<InboxEvent> inbox;
  std::vector<std::unique_ptr<Link>> links;

  enum Direction : std::uint64_t { upstream = 0, downstream = 1 };

  // Caller holds `mutex`.
  void sever(std::size_t link, std::string reason) {
    Link& l = *links[link];
    if (l.severed) return;
    l.severed = true;
    l.to_client.close();
    inbox.push(InboxEvent{link, std::nullopt, std::move(reason)});
  }

  fl::FlMessage transit(const fl::FlMessage& message) const {
    if (!options.encode_frames) return message;
    DecodeResult decoded = decode_message(encode_message(message));
    if (auto* err = std::get_if<DecodeError>(&decoded)) {
      throw std::logic_error("channel: frame failed to decode: " + err->detail);
    }
    return std::get<fl::FlMessage>(std::move(decoded));
  }

  // Returns false if the message is lost (the link is severed as a result).
  bool admit(std::size_t link, Direction dir, std::uint32_t& delay_us) {
    Link& l = *links[link];
    if (l.severed) throw LinkClosed("link " + std::to_string(link) + " is closed");
    std::uint64_t index = l.sent[dir]++;
    if (options.drop_probability <= 0.0 && options.max_latency_us == 0) return true;
    Rng rng = Rng::stream(options.fault_seed, {0xFA17, link, dir, index});
    if (rng.bernoulli(options.drop_probability)) {
      sever(link, dir == upstream ? "message from client dropped" : "message to client dropped");
      return false;
    }
    delay_us = options.max_latency_us == 0 ? 0 : static_cast<std::uint32_t>(rng.below(options.max_latency_us + 1));
    return true;
  }
};

namespace {

void delay(std::uint32_t us) {
  if (us > 0) std::this_thread::sleep_for(std::chrono::microseconds(us));
}

class ChannelServer final : public ServerEndpoint {
 public:
  explicit ChannelServer(std::shared_ptr<ChannelHub::State> state) : state_(std::move(state)) {}

  std::optional<InboxEvent> next() override { return state_->inbox.pop(); }

  void send(std::size_t link, const fl::FlMessage& message) override {
    check(link);
    std::uint32_t us = 0;
    {
      std::lock_guard lock(state_->mutex);
      if (!state_->admit(link, ChannelHub::State::downstream, us)) return;
    }
    delay(us);
    state_->links[link]->to_client.push(state_->transit(message));
  }

  void close_link(std::size_t link) override {
    check(link);
    std::lock_guard lock(state_->mutex);
    state_->sever(link, "closed by server");
  }

  void close() override {
    std::lock_guard lock(state_->mutex);
    for (auto& l : state_->links) {
      l->severed = true;
      l->to_client.close();
    }
    state_->inbox.close();
  }

 private:
  void check(std::size_t link) const {
    if (link >= state_->links.size()) throw IndexError("channel: no link " + std::to_string(link));
  }
  std::shared_ptr<ChannelHub::State> state_;
};

class ChannelClient final : public ClientEndpoint {
 public:
  ChannelClient(std::shared_ptr<ChannelHub::State> state, std::size_t link) : state_(std::move(state)), link_(link) {}

  void send(const fl::FlMessage& message) override {
    std::uint32_t us = 0;
    {
      std::lock_guard lock(state_->mutex);
      if (!state_->admit(link_, ChannelHub::State::upstream, us)) return;
    }
    delay(us);
    fl::FlMessage delivered = state_->transit(message);
    std::lock_guard lock(state_->mutex);
    if (state_->links[link_]->severed) throw LinkClosed("link " + std::to_string(link_) + " is closed");
    state_->inbox.push(InboxEvent{link_, std::move(delivered), {}});
  }

  std::optional<fl::FlMessage> receive() override { return state_->links[link_]->to_client.pop(); }

  void close() override {
    std::lock_guard lock(state_->mutex);
    state_->sever(link_, "closed by client");
  }

 private:
  std::shared_ptr<ChannelHub::State> state_;
  std::size_t link_;
};

}  // namespace

ChannelHub::ChannelHub(std::size_t n_links, ChannelOptions options) : state_(std::make_shared<State>()) {
  options.validate();
  state_->options = options;
  for (std::size_t i = 0; i < n_links; ++i) state_->links.push_back(std::make_unique<State::Link>());
  server_ = std::make_unique<ChannelServer>(state_);
  for (std::size_t i = 0; i < n_links; ++i) clients_.push_back(std::make_unique<ChannelClient>(state_, i));
}

ChannelHub::~ChannelHub() = default;

std::size_t ChannelHub::link_count() const { return clients_.size(); }

ServerEndpoint& ChannelHub::server() { return *server_; }

ClientEndpoint& ChannelHub::client(std::size_t i) {
  if (i >= clients_.size()) throw IndexError("channel: no link " + std::to_string(i));
  return *clients_[i];
}

}  // namespace fednlp::transport
