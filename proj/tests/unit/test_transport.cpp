#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <thread>

#include "fednlp/tensor/errors.hpp"
#include "fednlp/transport/channel.hpp"
#include "fednlp/transport/tcp.hpp"
#include "fednlp/transport/wire.hpp"
#include "message_gen.hpp"

using namespace fednlp;
using namespace fednlp::transport;

namespace {

fl::FlMessage model_message(double value) {
  ParameterSet p;
  p.add("w", Tensor({2}, {value, -value}));
  return fl::GlobalModel{1, p, {}, 0};
}

// Sequence of link ids at which each link was severed, for a fixed traffic pattern.
std::vector<std::pair<std::size_t, std::size_t>> drop_trace(std::uint64_t fault_seed) {
  ChannelOptions opts;
  opts.drop_probability = 0.2;
  opts.fault_seed = fault_seed;
  ChannelHub hub(4, opts);
  std::vector<std::pair<std::size_t, std::size_t>> trace;
  for (std::size_t link = 0; link < 4; ++link) {
    for (std::size_t i = 0; i < 20; ++i) {
      try {
        hub.server().send(link, fl::Shutdown{std::to_string(i)});
      } catch (const LinkClosed&) {
        trace.emplace_back(link, i);
        break;
      }
    }
  }
  return trace;
}

}  // namespace

TEST(Channel, DeliversInOrderBothWays) {
  ChannelHub hub(2);
  for (int i = 0; i < 5; ++i) hub.server().send(1, fl::Shutdown{std::to_string(i)});
  for (int i = 0; i < 5; ++i) {
    auto m = hub.client(1).receive();
    ASSERT_TRUE(m);
    EXPECT_EQ(std::get<fl::Shutdown>(*m).reason, std::to_string(i));
  }
  hub.client(0).send(fl::Hello{"a", "t"});
  hub.client(1).send(fl::Hello{"b", "t"});
  auto e0 = hub.server().next();
  auto e1 = hub.server().next();
  ASSERT_TRUE(e0 && e1);
  EXPECT_EQ(e0->link, 0u);
  EXPECT_EQ(std::get<fl::Hello>(*e0->message).client_name, "a");
  EXPECT_EQ(e1->link, 1u);
}

TEST(Channel, CloseIsObservedByBothSides) {
  ChannelHub hub(2);
  hub.client(0).close();
  auto e = hub.server().next();
  ASSERT_TRUE(e);
  EXPECT_EQ(e->link, 0u);
  EXPECT_FALSE(e->message);
  EXPECT_FALSE(e->detail.empty());
  EXPECT_THROW(hub.server().send(0, fl::Shutdown{}), LinkClosed);
  EXPECT_FALSE(hub.client(0).receive());

  hub.server().send(1, fl::Shutdown{"last"});
  hub.server().close_link(1);
  // queued messages drain before end of stream
  EXPECT_TRUE(hub.client(1).receive());
  EXPECT_FALSE(hub.client(1).receive());
  EXPECT_THROW(hub.client(1).send(fl::Hello{}), LinkClosed);
  EXPECT_THROW(hub.server().send(5, fl::Shutdown{}), IndexError);
  EXPECT_THROW(hub.client(5), IndexError);
}

TEST(Channel, ServerCloseEndsInbox) {
  ChannelHub hub(1);
  hub.server().close();
  EXPECT_FALSE(hub.server().next());
  EXPECT_FALSE(hub.client(0).receive());
}

TEST(Channel, EncodedFramesQuantizeParameters) {
  ChannelOptions opts;
  opts.encode_frames = true;
  ChannelHub hub(1, opts);
  hub.server().send(0, model_message(0.1));
  auto m = hub.client(0).receive();
  ASSERT_TRUE(m);
  EXPECT_EQ(std::get<fl::GlobalModel>(*m).params.at("w")[0], static_cast<double>(0.1f));

  ChannelHub plain(1);
  plain.server().send(0, model_message(0.1));
  EXPECT_EQ(std::get<fl::GlobalModel>(*plain.client(0).receive()).params.at("w")[0], 0.1);
}

TEST(Channel, DropsAreDeterministicPerSeed) {
  auto a = drop_trace(17);
  EXPECT_EQ(a, drop_trace(17));
  EXPECT_FALSE(a.empty());
  bool differs = false;
  for (std::uint64_t s = 18; s < 28 && !differs; ++s) differs = drop_trace(s) != a;
  EXPECT_TRUE(differs);
}

TEST(Channel, DropSeversLinkAndNotifiesServer) {
  ChannelOptions opts;
  opts.drop_probability = 1.0;
  ChannelHub hub(1, opts);
  hub.client(0).send(fl::Hello{"x", "y"});
  auto e = hub.server().next();
  ASSERT_TRUE(e);
  EXPECT_FALSE(e->message);
  EXPECT_NE(e->detail.find("dropped"), std::string::npos);
  EXPECT_FALSE(hub.client(0).receive());
}

TEST(Channel, InvalidOptions) {
  ChannelOptions opts;
  opts.drop_probability = 1.5;
  EXPECT_THROW(ChannelHub(1, opts), ConfigError);
}

TEST(Tcp, ParseAddress) {
  auto a = parse_address("10.0.0.2:9000");
  EXPECT_EQ(a.host, "10.0.0.2");
  EXPECT_EQ(a.port, 9000);
  auto v6 = parse_address("[::1]:80");
  EXPECT_EQ(v6.host, "::1");
  EXPECT_EQ(v6.port, 80);
  EXPECT_EQ(parse_address("localhost:0").port, 0);
  for (const char* bad : {"nohost", "h:", ":80", "h:99999", "h:12x", "[::1:80"}) {
    EXPECT_THROW(parse_address(bad), ConfigError) << bad;
  }
}

TEST(Tcp, RoundTripOverLoopback) {
  TcpServer server(Address{"127.0.0.1", 0});
  ASSERT_NE(server.port(), 0);
  Address addr{"127.0.0.1", server.port()};

  std::vector<std::unique_ptr<ClientEndpoint>> clients;
  for (int i = 0; i < 3; ++i) {
    clients.push_back(tcp_connect(addr));
    clients.back()->send(fl::Hello{"site-" + std::to_string(i), "tok"});
    auto e = server.next();
    ASSERT_TRUE(e && e->message);
    EXPECT_EQ(e->link, static_cast<std::size_t>(i));
    EXPECT_EQ(std::get<fl::Hello>(*e->message).client_name, "site-" + std::to_string(i));
  }

  Rng rng(4);
  for (int i = 0; i < 30; ++i) {
    auto msg = fednlp::testing::random_message(rng);
    server.send(i % 3, msg);
    auto got = clients[i % 3]->receive();
    ASSERT_TRUE(got);
    EXPECT_EQ(*got, msg);
  }

  clients[1]->close();
  auto e = server.next();
  ASSERT_TRUE(e);
  EXPECT_EQ(e->link, 1u);
  EXPECT_FALSE(e->message);

  server.close_link(2);
  EXPECT_FALSE(clients[2]->receive());

  server.close();
  EXPECT_FALSE(clients[0]->receive());
  // pending close events drain, then the inbox ends
  int drained = 0;
  while (auto ev = server.next()) {
    EXPECT_FALSE(ev->message);
    ASSERT_LT(++drained, 10);
  }
}

TEST(Tcp, LargeFrameSurvivesPartialWrites) {
  TcpServer server(Address{"127.0.0.1", 0});
  auto client = tcp_connect(Address{"127.0.0.1", server.port()});
  ParameterSet p;
  Tensor t({1000, 500});
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(i % 977) * 0.25;
  p.add("big", t);
  fl::FlMessage msg = fl::GlobalModel{1, p, {}, 3};
  std::thread sender([&] { client->send(msg); });
  auto e = server.next();
  sender.join();
  ASSERT_TRUE(e && e->message);
  EXPECT_EQ(*e->message, msg);
}

TEST(Tcp, GarbageClosesLinkWithTypedError) {
  TcpServer server(Address{"127.0.0.1", 0});
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  ASSERT_GE(fd, 0);
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(server.port());
  sa.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ASSERT_EQ(::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa), 0);
  const char junk[] = "GET / HTTP/1.1\r\n\r\n";
  ASSERT_GT(::send(fd, junk, sizeof junk - 1, 0), 0);
  auto e = server.next();
  ASSERT_TRUE(e);
  EXPECT_FALSE(e->message);
  EXPECT_NE(e->detail.find("bad_magic"), std::string::npos) << e->detail;
  ::close(fd);
}

TEST(Tcp, ConnectTimesOutWithoutServer) {
  // bind then close to obtain a port with no listener
  std::uint16_t port;
  {
    TcpServer s(Address{"127.0.0.1", 0});
    port = s.port();
    s.close();
  }
  EXPECT_THROW(tcp_connect(Address{"127.0.0.1", port}, std::chrono::milliseconds(200)), std::runtime_error);
}
