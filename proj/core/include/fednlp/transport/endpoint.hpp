#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

#include "fednlp/fl/messages.hpp"

namespace fednlp::transport {

/// Sending on a link that the peer or a fault has closed.
class LinkClosed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Client side of a duplex link to the server.
class ClientEndpoint {
 public:
  virtual ~ClientEndpoint() = default;
  /// Throws LinkClosed if the link is down.
  virtual void send(const fl::FlMessage& message) = 0;
  /// Blocks for the next message; nullopt once the link is closed.
  virtual std::optional<fl::FlMessage> receive() = 0;
  virtual void close() = 0;
};

/// One event in the server's inbox. An empty message means the link closed;
/// `detail` then says why.
struct InboxEvent {
  std::size_t link = 0;
  std::optional<fl::FlMessage> message;
  std::string detail;
};

/// Server side: one inbox fed by every link, per-link send.
class ServerEndpoint {
 public:
  virtual ~ServerEndpoint() = default;
  /// Blocks for the next event; nullopt once the endpoint itself is closed
  /// and every queued event has been delivered.
  virtual std::optional<InboxEvent> next() = 0;
  virtual void send(std::size_t link, const fl::FlMessage& message) = 0;
  /// Closes a single link (the peer sees end of stream).
  virtual void close_link(std::size_t link) = 0;
  /// Closes every link and wakes blocked readers.
  virtual void close() = 0;
};

/// Unbounded FIFO with close semantics, shared by the transports.
template <typename T>
class BlockingQueue {
 public:
  void push(T value) {
    {
      std::lock_guard lock(mutex_);
      if (closed_) return;
      items_.push_back(std::move(value));
    }
    cv_.notify_one();
  }

  /// Blocks until an item arrives; nullopt once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T value = std::move(items_.front());
    items_.pop_front();
    return value;
  }

  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
  }

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<T> items_;
  bool closed_ = false;
};

}  // namespace fednlp::transport
