#include "fednlp/transport/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <thread>
#include <vector>

#include "fednlp/tensor/errors.hpp"

namespace fednlp::transport {

namespace {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { reset(); }
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void shutdown_both() const {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

bool read_exact(int fd, std::uint8_t* out, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    ssize_t r = ::recv(fd, out + got, n - got, 0);
    if (r == 0) return false;
    if (r < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

void write_all(int fd, const std::vector<std::uint8_t>& bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    ssize_t r = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw LinkClosed(errno_text("send"));
    }
    sent += static_cast<std::size_t>(r);
  }
}

struct FrameRead {
  std::optional<fl::FlMessage> message;
  std::string detail;  // why the stream ended
};

FrameRead read_frame(int fd, std::size_t frame_cap) {
  std::vector<std::uint8_t> frame(kHeaderSize);
  if (!read_exact(fd, frame.data(), kHeaderSize)) return {std::nullopt, "connection closed"};
  auto header = parse_header(frame, frame_cap);
  if (auto* err = std::get_if<DecodeError>(&header)) {
    return {std::nullopt, "decode error (" + std::string(decode_error_name(err->code)) + "): " + err->detail};
  }
  std::size_t total = std::get<FrameHeader>(header).frame_size();
  frame.resize(total);
  if (!read_exact(fd, frame.data() + kHeaderSize, total - kHeaderSize)) {
    return {std::nullopt, "connection closed mid-frame"};
  }
  DecodeResult result = decode_message(frame, frame_cap);
  if (auto* err = std::get_if<DecodeError>(&result)) {
    return {std::nullopt, "decode error (" + std::string(decode_error_name(err->code)) + "): " + err->detail};
  }
  return {std::get<fl::FlMessage>(std::move(result)), {}};
}

struct Resolved {
  sockaddr_storage addr{};
  socklen_t len = 0;
  int family = AF_INET;
};

Resolved resolve(const Address& a, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  std::string port = std::to_string(a.port);
  int rc = ::getaddrinfo(a.host.empty() ? nullptr : a.host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0 || res == nullptr) throw std::runtime_error("cannot resolve " + a.to_string() + ": " + gai_strerror(rc));
  Resolved out;
  std::memcpy(&out.addr, res->ai_addr, res->ai_addrlen);
  out.len = static_cast<socklen_t>(res->ai_addrlen);
  out.family = res->ai_family;
  ::freeaddrinfo(res);
  return out;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace

Address parse_address(std::string_view text) {
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    throw ConfigError("address must be HOST:PORT, got '" + std::string(text) + "'");
  }
  std::string_view host = text.substr(0, colon);
  std::string_view port = text.substr(colon + 1);
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc() || ptr != port.data() + port.size() || value > 65535) {
    throw ConfigError("invalid port in address '" + std::string(text) + "'");
  }
  const bool open = host.front() == '[', close = host.back() == ']';
  if (open != close || (open && host.size() < 3)) {
    throw ConfigError("unbalanced brackets in address '" + std::string(text) + "'");
  }
  if (open) host = host.substr(1, host.size() - 2);
  return Address{std::string(host), static_cast<std::uint16_t>(value)};
}

struct TcpServer::Impl {
  struct Conn {
    Socket socket;
    std::mutex write_mutex;
    std::thread reader;
    bool closed = false;
  };

  std::size_t frame_cap;
  Socket listener;
  std::uint16_t port = 0;
  BlockingQueue<InboxEvent> inbox;
  std::mutex mutex;
  std::vector<std::unique_ptr<Conn>> conns;
  std::thread acceptor;
  std::atomic<bool> stopping{false};

  void accept_loop() {
    while (!stopping) {
      int fd = ::accept(listener.fd(), nullptr, nullptr);
      if (fd < 0) {
        if (errno == EINTR) continue;
        return;
      }
      set_nodelay(fd);
      std::lock_guard lock(mutex);
      if (stopping) {
        ::close(fd);
        return;
      }
      std::size_t link = conns.size();
      auto conn = std::make_unique<Conn>();
      conn->socket = Socket(fd);
      conn->reader = std::thread([this, link, fd] { read_loop(link, fd); });
      conns.push_back(std::move(conn));
    }
  }

  void read_loop(std::size_t link, int fd) {
    for (;;) {
      FrameRead r = read_frame(fd, frame_cap);
      if (!r.message) {
        ::shutdown(fd, SHUT_RDWR);
        inbox.push(InboxEvent{link, std::nullopt, std::move(r.detail)});
        return;
      }
      inbox.push(InboxEvent{link, std::move(r.message), {}});
    }
  }

  Conn& conn(std::size_t link) {
    std::lock_guard lock(mutex);
    if (link >= conns.size()) throw IndexError("tcp: no link " + std::to_string(link));
    return *conns[link];
  }

  void shutdown_all() {
    stopping = true;
    listener.shutdown_both();
    {
      std::lock_guard lock(mutex);
      for (auto& c : conns) c->socket.shutdown_both();
    }
    inbox.close();
  }

  void join_all() {
    if (acceptor.joinable()) acceptor.join();
    std::vector<std::thread> readers;
    {
      std::lock_guard lock(mutex);
      for (auto& c : conns) {
        if (c->reader.joinable()) readers.push_back(std::move(c->reader));
      }
    }
    for (auto& t : readers) t.join();
  }
};

TcpServer::TcpServer(const Address& bind, std::size_t frame_cap) : impl_(std::make_unique<Impl>()) {
  impl_->frame_cap = frame_cap;
  Resolved r = resolve(bind, true);
  Socket s(::socket(r.family, SOCK_STREAM, 0));
  if (!s.valid()) throw std::runtime_error(errno_text("socket"));
  int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&r.addr), r.len) != 0) {
    throw std::runtime_error(errno_text(("bind " + bind.to_string()).c_str()));
  }
  if (::listen(s.fd(), 64) != 0) throw std::runtime_error(errno_text("listen"));
  sockaddr_storage actual{};
  socklen_t len = sizeof(actual);
  ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&actual), &len);
  impl_->port = actual.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&actual)->sin6_port)
                                              : ntohs(reinterpret_cast<sockaddr_in*>(&actual)->sin_port);
  impl_->listener = std::move(s);
  impl_->acceptor = std::thread([this] { impl_->accept_loop(); });
}

TcpServer::~TcpServer() {
  impl_->shutdown_all();
  impl_->join_all();
}

std::uint16_t TcpServer::port() const { return impl_->port; }

std::optional<InboxEvent> TcpServer::next() { return impl_->inbox.pop(); }

void TcpServer::send(std::size_t link, const fl::FlMessage& message) {
  auto bytes = encode_message(message);
  Impl::Conn& c = impl_->conn(link);
  std::lock_guard lock(c.write_mutex);
  if (c.closed) throw LinkClosed("link " + std::to_string(link) + " is closed");
  write_all(c.socket.fd(), bytes);
}

void TcpServer::close_link(std::size_t link) {
  Impl::Conn& c = impl_->conn(link);
  std::lock_guard lock(c.write_mutex);
  c.closed = true;
  c.socket.shutdown_both();
}

void TcpServer::close() { impl_->shutdown_all(); }

namespace {

class TcpClient final : public ClientEndpoint {
 public:
  TcpClient(Socket socket, std::size_t frame_cap) : socket_(std::move(socket)), frame_cap_(frame_cap) {}
  ~TcpClient() override { socket_.shutdown_both(); }

  void send(const fl::FlMessage& message) override {
    auto bytes = encode_message(message);
    std::lock_guard lock(write_mutex_);
    if (closed_) throw LinkClosed("connection closed");
    write_all(socket_.fd(), bytes);
  }

  std::optional<fl::FlMessage> receive() override {
    if (closed_) return std::nullopt;
    FrameRead r = read_frame(socket_.fd(), frame_cap_);
    return std::move(r.message);
  }

  void close() override {
    std::lock_guard lock(write_mutex_);
    closed_ = true;
    socket_.shutdown_both();
  }

 private:
  Socket socket_;
  std::size_t frame_cap_;
  std::mutex write_mutex_;
  std::atomic<bool> closed_{false};
};

}  // namespace

std::unique_ptr<ClientEndpoint> tcp_connect(const Address& server, std::chrono::milliseconds timeout,
                                            std::size_t frame_cap) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  Resolved r = resolve(server, false);
  for (;;) {
    Socket s(::socket(r.family, SOCK_STREAM, 0));
    if (!s.valid()) throw std::runtime_error(errno_text("socket"));
    if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&r.addr), r.len) == 0) {
      set_nodelay(s.fd());
      return std::make_unique<TcpClient>(std::move(s), frame_cap);
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      throw std::runtime_error(errno_text(("connect " + server.to_string()).c_str()));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

}  // namespace fednlp::transport
