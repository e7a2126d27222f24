#include <gtest/gtest.h>

#include <cmath>
#include <deque>

#include "fednlp/fl/aggregate.hpp"
#include "fednlp/fl/client.hpp"
#include "fednlp/fl/server.hpp"
#include "fednlp/fl/session.hpp"
#include "fednlp/tensor/errors.hpp"

using namespace fednlp;
using namespace fednlp::fl;

namespace {

ParameterSet base_params() {
  ParameterSet p;
  p.add("w", Tensor({2, 2}, {0.1, 0.2, 0.3, 0.4}));
  p.add("b", Tensor({2}, {0.0, -0.5}));
  return p;
}

// Moves every value by `shift` and reports a fixed sample count.
class ShiftTrainer final : public LocalTrainer {
 public:
  ShiftTrainer(double shift, std::uint64_t n) : shift_(shift), n_(n) {}
  bool accepts(const ParameterSet& global) const override { return global.same_manifest(base_params()); }
  LocalResult train(const ParameterSet& global, const TrainDirective& directive, std::uint32_t round) override {
    seen_rounds.push_back(round);
    seen_directive = directive;
    ParameterSet out = global;
    for (std::size_t i = 0; i < out.size(); ++i)
      for (auto& v : out.tensor(i).values()) v += shift_;
    return {out, n_, {1.0 * round, 0.5, 2.0 * round, 0.25}};
  }
  std::vector<std::uint32_t> seen_rounds;
  TrainDirective seen_directive;

 private:
  double shift_;
  std::uint64_t n_;
};

ServerOptions options(std::size_t n, std::uint32_t rounds) {
  ServerOptions o;
  o.n_clients = n;
  o.rounds = rounds;
  o.auth_token = "secret";
  o.key_seed = 77;
  o.keep_round_params = true;
  return o;
}

// Synchronous in-memory network: link i is client i.
struct Net {
  Server& server;
  std::vector<Client*> clients;
  std::deque<std::pair<std::size_t, FlMessage>> to_server;

  void deliver(std::vector<Outgoing> out) {
    for (auto& o : out) {
      for (auto& reply : clients[o.link]->handle(o.message)) to_server.emplace_back(o.link, std::move(reply));
    }
  }
  void run() {
    for (std::size_t i = 0; i < clients.size(); ++i) to_server.emplace_back(i, clients[i]->hello());
    while (!to_server.empty()) {
      auto [link, msg] = std::move(to_server.front());
      to_server.pop_front();
      deliver(server.handle(link, msg));
    }
  }
};

template <typename T>
const T* find_for(const std::vector<Outgoing>& out, std::size_t link) {
  for (const auto& o : out)
    if (o.link == link)
      if (auto* m = std::get_if<T>(&o.message)) return m;
  return nullptr;
}

struct Provisioned3 {
  Server server{options(3, 2), base_params()};
  std::vector<std::uint64_t> keys;
  std::vector<Outgoing> last;
  Provisioned3() {
    for (std::size_t i = 0; i < 3; ++i) {
      last = server.handle(i, Hello{"site-" + std::to_string(i), "secret"});
      keys.push_back(find_for<Provisioned>(last, i)->session_key);
    }
  }
  LocalUpdate update(std::uint32_t id, std::uint32_t round, double v = 0.0) {
    ParameterSet p = base_params();
    p.at("w")[0] = v;
    return std::get<LocalUpdate>(sign(keys[id], LocalUpdate{id, round, p, 10, {}, 0}));
  }
};

}  // namespace

TEST(Protocol, FullSessionInMemory) {
  const std::vector<double> shifts{0.5, -0.25, 1.0};
  const std::vector<std::uint64_t> counts{10, 30, 60};
  std::vector<ShiftTrainer> trainers;
  for (int i = 0; i < 3; ++i) trainers.emplace_back(shifts[i], counts[i]);
  std::vector<Client> clients;
  for (int i = 0; i < 3; ++i) clients.emplace_back("site-" + std::to_string(i), "secret", trainers[i]);

  int validations = 0;
  Server server(options(3, 4), base_params(), [&](const ParameterSet&) {
    ++validations;
    return ValidationResult{1.0, 0.5};
  });
  Net net{server, {&clients[0], &clients[1], &clients[2]}, {}};
  net.run();

  EXPECT_EQ(server.phase(), ServerPhase::done);
  EXPECT_EQ(server.round(), 4u);
  EXPECT_EQ(validations, 5);  // initial + one per round
  EXPECT_EQ(server.global_models_sent(), 12u);
  EXPECT_EQ(server.updates_accepted(), 12u);
  ASSERT_EQ(server.summaries().size(), 4u);
  ASSERT_EQ(server.round_params().size(), 4u);

  // Mean shift per round is (0.1*0.5 - 0.3*0.25 + 0.6*1.0) = 0.575, applied in f32 each round.
  ParameterSet expect = quantize_to_f32(base_params());
  for (int r = 0; r < 4; ++r) {
    std::vector<ParameterSet> locals;
    for (double s : shifts) {
      ParameterSet p = expect;
      for (std::size_t i = 0; i < p.size(); ++i)
        for (auto& v : p.tensor(i).values()) v += s;
      locals.push_back(quantize_to_f32(p));
    }
    std::vector<ClientUpdate> ups;
    for (std::uint32_t i = 0; i < 3; ++i) ups.push_back({i, counts[i], &locals[i]});
    expect = quantize_to_f32(federated_average(ups));
    EXPECT_EQ(server.round_params()[r], expect) << r;
  }
  EXPECT_EQ(server.global(), expect);

  const auto& s = server.summaries()[2];
  EXPECT_EQ(s.round, 3u);
  EXPECT_DOUBLE_EQ(s.metrics.client_loss, 6.0);  // weighted mean of 2 * round
  EXPECT_DOUBLE_EQ(s.metrics.client_accuracy, 0.25);
  EXPECT_EQ(s.metrics.val_loss, 1.0);
  ASSERT_EQ(s.clients.size(), 3u);
  EXPECT_EQ(s.clients[2].n_samples, 60u);

  for (int i = 0; i < 3; ++i) {
    EXPECT_TRUE(clients[i].finished());
    EXPECT_EQ(clients[i].client_id(), static_cast<std::uint32_t>(i));
    EXPECT_EQ(clients[i].shutdown_reason(), "training complete");
    EXPECT_EQ(clients[i].completed_rounds().size(), 4u);
    EXPECT_EQ(clients[i].round_plan(), (RoundPlan{4, 1}));
    EXPECT_EQ(trainers[i].seen_rounds, (std::vector<std::uint32_t>{1, 2, 3, 4}));
    EXPECT_FALSE(clients[i].error());
  }
}

TEST(Protocol, InitialParametersAreQuantized) {
  ParameterSet p;
  p.add("w", Tensor({1}, {0.1}));
  Server server(options(1, 1), p);
  EXPECT_EQ(server.global().at("w")[0], static_cast<double>(0.1f));
}

TEST(Protocol, ZeroRoundsShutsDownAfterProvisioning) {
  Server server(options(2, 0), base_params());
  server.handle(0, Hello{"a", "secret"});
  auto out = server.handle(1, Hello{"b", "secret"});
  EXPECT_EQ(server.phase(), ServerPhase::done);
  EXPECT_TRUE(find_for<Shutdown>(out, 0));
  EXPECT_TRUE(find_for<Shutdown>(out, 1));
  EXPECT_EQ(server.global_models_sent(), 0u);
}

TEST(Protocol, ProvisioningRejections) {
  Server server(options(2, 1), base_params());
  auto out = server.handle(0, Hello{"a", "wrong"});
  ASSERT_TRUE(find_for<Error>(out, 0));
  EXPECT_EQ(find_for<Error>(out, 0)->code, ErrorCode::auth_failed);
  EXPECT_EQ(server.provisioned_count(), 0u);

  out = server.handle(0, Hello{"a", "secret"});
  EXPECT_EQ(find_for<Provisioned>(out, 0)->client_id, 0u);
  EXPECT_EQ(find_for<Provisioned>(out, 0)->session_key, derive_session_key(77, 0));

  out = server.handle(0, Hello{"again", "secret"});
  EXPECT_EQ(find_for<Error>(out, 0)->code, ErrorCode::unexpected_message);

  out = server.handle(1, Hello{"a", "secret"});
  EXPECT_EQ(find_for<Error>(out, 1)->code, ErrorCode::duplicate_client);

  out = server.handle(1, Hello{"b", "secret"});
  EXPECT_TRUE(find_for<Provisioned>(out, 1));
  EXPECT_TRUE(find_for<GlobalModel>(out, 0));
  EXPECT_TRUE(find_for<GlobalModel>(out, 1));
  EXPECT_EQ(server.phase(), ServerPhase::collecting);

  out = server.handle(2, Hello{"c", "secret"});
  EXPECT_EQ(find_for<Error>(out, 2)->code, ErrorCode::capacity);
  EXPECT_EQ(server.phase(), ServerPhase::collecting);

  out = server.handle(5, LocalUpdate{});
  EXPECT_EQ(find_for<Error>(out, 5)->code, ErrorCode::bad_session);
  EXPECT_EQ(server.phase(), ServerPhase::collecting);
}

TEST(Protocol, GlobalModelsAreSignedPerClient) {
  Provisioned3 s;
  for (std::size_t i = 0; i < 3; ++i) {
    auto* gm = find_for<GlobalModel>(s.last, i);
    ASSERT_TRUE(gm);
    EXPECT_EQ(gm->round, 1u);
    EXPECT_TRUE(verify(s.keys[i], *gm));
    EXPECT_FALSE(verify(s.keys[(i + 1) % 3], *gm));
  }
}

TEST(Protocol, StaleRoundAborts) {
  Provisioned3 s;
  auto out = s.server.handle(1, s.update(1, 2));
  EXPECT_EQ(s.server.phase(), ServerPhase::aborted);
  EXPECT_EQ(find_for<Error>(out, 1)->code, ErrorCode::stale_round);
  EXPECT_NE(find_for<Shutdown>(out, 0)->reason.find("round 1 aborted"), std::string::npos);
  EXPECT_TRUE(find_for<Shutdown>(out, 2));
  EXPECT_TRUE(s.server.handle(0, s.update(0, 1)).empty());
}

TEST(Protocol, BadTagAborts) {
  Provisioned3 s;
  auto u = s.update(0, 1);
  u.session_tag ^= 1;
  auto out = s.server.handle(0, u);
  EXPECT_EQ(find_for<Error>(out, 0)->code, ErrorCode::bad_session);
  EXPECT_EQ(s.server.phase(), ServerPhase::aborted);
}

TEST(Protocol, ImpersonationAborts) {
  Provisioned3 s;
  auto out = s.server.handle(0, s.update(1, 1));  // client 1's update over link 0
  EXPECT_EQ(find_for<Error>(out, 0)->code, ErrorCode::bad_session);
}

TEST(Protocol, ManifestMismatchAborts) {
  Provisioned3 s;
  ParameterSet p = base_params();
  p.add("extra", Tensor({1}));
  auto u = std::get<LocalUpdate>(sign(s.keys[2], LocalUpdate{2, 1, p, 10, {}, 0}));
  auto out = s.server.handle(2, u);
  EXPECT_EQ(find_for<Error>(out, 2)->code, ErrorCode::manifest_mismatch);
}

TEST(Protocol, DuplicateUpdateAborts) {
  Provisioned3 s;
  EXPECT_TRUE(s.server.handle(0, s.update(0, 1)).empty());
  auto out = s.server.handle(0, s.update(0, 1));
  EXPECT_EQ(find_for<Error>(out, 0)->code, ErrorCode::unexpected_message);
  EXPECT_EQ(s.server.phase(), ServerPhase::aborted);
}

TEST(Protocol, DisconnectMidRoundAbortsWithRound) {
  Provisioned3 s;
  s.server.handle(0, s.update(0, 1));
  s.server.handle(1, s.update(1, 1));
  s.server.handle(2, s.update(2, 1));
  EXPECT_EQ(s.server.round(), 2u);
  auto out = s.server.link_closed(1, "connection reset");
  EXPECT_EQ(s.server.phase(), ServerPhase::aborted);
  EXPECT_NE(s.server.abort_reason().find("client 1 disconnected"), std::string::npos);
  EXPECT_FALSE(find_for<Shutdown>(out, 1));
  ASSERT_TRUE(find_for<Shutdown>(out, 0));
  EXPECT_EQ(find_for<Shutdown>(out, 0)->reason.rfind("round 2 aborted", 0), 0u);
}

TEST(Protocol, UnprovisionedDisconnectIsIgnored) {
  Server server(options(2, 1), base_params());
  EXPECT_TRUE(server.link_closed(4, "eof").empty());
  EXPECT_EQ(server.phase(), ServerPhase::awaiting_provision);
}

TEST(Protocol, ClientErrorAbortsServer) {
  Provisioned3 s;
  s.server.handle(2, Error{ErrorCode::manifest_mismatch, "nope"});
  EXPECT_EQ(s.server.phase(), ServerPhase::aborted);
  EXPECT_NE(s.server.abort_reason().find("manifest_mismatch"), std::string::npos);
}

TEST(Protocol, ServerOptionsValidated) {
  auto o = options(0, 1);
  EXPECT_THROW((Server{o, base_params()}), ConfigError);
  EXPECT_THROW((Server{options(1, 1), ParameterSet{}}), UsageError);
}

TEST(ClientMachine, RejectsOutOfOrderAndForeignMessages) {
  ShiftTrainer t(0.0, 1);
  {
    Client c("a", "secret", t);
    c.hello();
    auto r = c.handle(GlobalModel{1, base_params(), {}, 0});
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(std::get<Error>(r[0]).code, ErrorCode::unexpected_message);
    EXPECT_TRUE(c.finished());
  }
  {
    Client c("a", "secret", t);
    c.hello();
    c.handle(Provisioned{0, 5, {3, 1}});
    auto wrong_round = std::get<GlobalModel>(sign(5, GlobalModel{2, base_params(), {}, 0}));
    auto r = c.handle(wrong_round);
    EXPECT_EQ(std::get<Error>(r[0]).code, ErrorCode::stale_round);
  }
  {
    Client c("a", "secret", t);
    c.hello();
    c.handle(Provisioned{0, 5, {3, 1}});
    auto r = c.handle(GlobalModel{1, base_params(), {}, 12345});
    EXPECT_EQ(std::get<Error>(r[0]).code, ErrorCode::bad_session);
  }
  {
    Client c("a", "secret", t);
    c.hello();
    c.handle(Provisioned{0, 5, {3, 1}});
    ParameterSet other;
    other.add("z", Tensor({1}));
    auto r = c.handle(sign(5, GlobalModel{1, other, {}, 0}));
    EXPECT_EQ(std::get<Error>(r[0]).code, ErrorCode::manifest_mismatch);
  }
  {
    Client c("a", "secret", t);
    c.hello();
    c.handle(Provisioned{0, 5, {3, 1}});
    auto r = c.handle(Hello{"x", "y"});
    EXPECT_EQ(std::get<Error>(r[0]).code, ErrorCode::unexpected_message);
  }
  {
    Client c("a", "secret", t);
    EXPECT_NO_THROW(c.hello());
    EXPECT_THROW(c.hello(), UsageError);
  }
}

TEST(ClientMachine, TrainsAndSignsUpdate) {
  ShiftTrainer t(0.1, 42);
  Client c("a", "secret", t);
  c.hello();
  c.handle(Provisioned{3, 99, {2, 2}});
  TrainDirective d{2, 0.005, false};
  auto r = c.handle(sign(99, GlobalModel{1, base_params(), d, 0}));
  ASSERT_EQ(r.size(), 1u);
  const auto& u = std::get<LocalUpdate>(r[0]);
  EXPECT_EQ(u.client_id, 3u);
  EXPECT_EQ(u.round, 1u);
  EXPECT_EQ(u.n_samples, 42u);
  EXPECT_TRUE(verify(99, u));
  EXPECT_EQ(u.params, quantize_to_f32(u.params));
  EXPECT_EQ(t.seen_directive, d);
  EXPECT_TRUE(c.handle(sign(99, RoundComplete{1, {}, 0})).empty());
  EXPECT_EQ(c.completed_rounds().size(), 1u);
  c.handle(Shutdown{"bye"});
  EXPECT_EQ(c.shutdown_reason(), "bye");
}

TEST(ClientMachine, DivergedTrainingReportsError) {
  class NanTrainer final : public LocalTrainer {
   public:
    bool accepts(const ParameterSet&) const override { return true; }
    LocalResult train(const ParameterSet& g, const TrainDirective&, std::uint32_t) override {
      ParameterSet p = g;
      p.at("b")[0] = std::nan("");
      return {p, 1, {}};
    }
  } t;
  Client c("a", "secret", t);
  c.hello();
  c.handle(Provisioned{0, 1, {1, 1}});
  auto r = c.handle(sign(1, GlobalModel{1, base_params(), {}, 0}));
  EXPECT_EQ(std::get<Error>(r[0]).code, ErrorCode::aborted);
  EXPECT_TRUE(c.error());
}
