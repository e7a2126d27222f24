#include "fednlp/fl/server.hpp"

#include <algorithm>

#include "fednlp/fl/session.hpp"
#include "fednlp/tensor/errors.hpp"

namespace fednlp::fl {

std::string_view server_phase_name(ServerPhase phase) {
  switch (phase) {
    case ServerPhase::awaiting_provision: return "awaiting_provision";
    case ServerPhase::distributing: return "distributing";
    case ServerPhase::collecting: return "collecting";
    case ServerPhase::aggregating: return "aggregating";
    case ServerPhase::done: return "done";
    case ServerPhase::aborted: return "aborted";
  }
  return "unknown";
}

void ServerOptions::validate() const {
  if (n_clients == 0) throw ConfigError("server: n_clients must be positive");
  if (n_clients > 0xFFFFFFFFu) throw ConfigError("server: too many clients");
  if (!(directive.lr > 0.0)) throw ConfigError("server: learning rate must be positive");
}

Server::Server(ServerOptions options, const ParameterSet& initial, Validator validator)
    : options_(std::move(options)), validator_(std::move(validator)), global_(quantize_to_f32(initial)) {
  options_.validate();
  if (global_.empty()) throw UsageError("server: empty initial parameter set");
  initial_validation_ = validate_global();
}

std::optional<std::uint32_t> Server::client_id_of(std::size_t link) const {
  auto it = link_to_client_.find(link);
  if (it == link_to_client_.end()) return std::nullopt;
  return it->second;
}

ValidationResult Server::validate_global() const { return validator_ ? validator_(global_) : ValidationResult{}; }

std::vector<Outgoing> Server::handle(std::size_t link, const FlMessage& message) {
  if (finished()) return {};
  if (const auto* hello = std::get_if<Hello>(&message)) return on_hello(link, *hello);

  auto id = client_id_of(link);
  if (!id) return {{link, Error{ErrorCode::bad_session, "link is not provisioned"}}};

  if (const auto* update = std::get_if<LocalUpdate>(&message)) return on_update(link, *update);
  if (const auto* err = std::get_if<Error>(&message)) {
    return abort("client " + std::to_string(*id) + " reported " + std::string(error_code_name(err->code)) + ": " +
                 err->detail);
  }
  if (std::holds_alternative<Shutdown>(message)) {
    return abort("client " + std::to_string(*id) + " shut down");
  }
  return abort("unexpected " + std::string(message_type_name(message_type(message))) + " from client " +
                   std::to_string(*id),
               Outgoing{link, Error{ErrorCode::unexpected_message, "servers do not accept this message"}});
}

std::vector<Outgoing> Server::on_hello(std::size_t link, const Hello& hello) {
  if (link_to_client_.count(link) != 0) {
    return {{link, Error{ErrorCode::unexpected_message, "link is already provisioned"}}};
  }
  if (hello.auth_token != options_.auth_token) return {{link, Error{ErrorCode::auth_failed, "invalid auth token"}}};
  if (clients_.size() >= options_.n_clients) {
    return {{link, Error{ErrorCode::capacity, "all " + std::to_string(options_.n_clients) + " slots are taken"}}};
  }
  bool duplicate = std::any_of(clients_.begin(), clients_.end(),
                               [&](const ClientInfo& c) { return c.name == hello.client_name; });
  if (duplicate) return {{link, Error{ErrorCode::duplicate_client, "'" + hello.client_name + "' is already provisioned"}}};

  auto id = static_cast<std::uint32_t>(clients_.size());
  clients_.push_back({id, hello.client_name, link, derive_session_key(options_.key_seed, id)});
  link_to_client_[link] = id;

  std::vector<Outgoing> out;
  out.push_back({link, Provisioned{id, clients_.back().key, RoundPlan{options_.rounds, options_.directive.local_epochs}}});
  if (clients_.size() == options_.n_clients) {
    auto more = options_.rounds == 0 ? broadcast_shutdown("training complete") : distribute();
    if (options_.rounds == 0) phase_ = ServerPhase::done;
    out.insert(out.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  }
  return out;
}

std::vector<Outgoing> Server::distribute() {
  phase_ = ServerPhase::distributing;
  ++round_;
  pending_.clear();
  std::vector<Outgoing> out;
  for (const auto& c : clients_) {
    GlobalModel gm{round_, global_, options_.directive, 0};
    out.push_back({c.link, sign(c.key, std::move(gm))});
    ++global_models_sent_;
  }
  phase_ = ServerPhase::collecting;
  return out;
}

std::vector<Outgoing> Server::on_update(std::size_t link, const LocalUpdate& update) {
  std::uint32_t id = link_to_client_.at(link);
  const ClientInfo& client = clients_[id];
  auto reject = [&](ErrorCode code, const std::string& detail) {
    return abort("client " + std::to_string(id) + ": " + detail, Outgoing{link, Error{code, detail}});
  };
  if (phase_ != ServerPhase::collecting) return reject(ErrorCode::unexpected_message, "no round is collecting updates");
  if (update.client_id != id || !verify(client.key, update)) {
    return reject(ErrorCode::bad_session, "update is not signed for this session");
  }
  if (update.round != round_) {
    return reject(ErrorCode::stale_round, "update for round " + std::to_string(update.round) + " during round " +
                                              std::to_string(round_));
  }
  if (!update.params.same_manifest(global_)) {
    return reject(ErrorCode::manifest_mismatch, "update manifest differs from the global model");
  }
  if (pending_.count(id) != 0) return reject(ErrorCode::unexpected_message, "duplicate update for this round");
  pending_.emplace(id, update);
  ++updates_accepted_;
  if (pending_.size() < clients_.size()) return {};
  return complete_round();
}

std::vector<Outgoing> Server::complete_round() {
  phase_ = ServerPhase::aggregating;
  std::vector<ClientUpdate> updates;
  RoundSummary summary;
  summary.round = round_;
  double n_total = 0.0;
  double loss_sum = 0.0;
  double acc_sum = 0.0;
  for (const auto& [id, u] : pending_) {
    updates.push_back({id, u.n_samples, &u.params});
    summary.clients.push_back({id, u.n_samples, u.local_metrics});
    auto n = static_cast<double>(u.n_samples);
    n_total += n;
    loss_sum += n * u.local_metrics.val_loss;
    acc_sum += n * u.local_metrics.val_accuracy;
  }
  global_ = quantize_to_f32(federated_average(updates, options_.rule));
  pending_.clear();
  if (options_.keep_round_params) round_params_.push_back(global_);

  ValidationResult v = validate_global();
  summary.metrics = GlobalMetrics{v.loss, v.accuracy, n_total > 0 ? loss_sum / n_total : 0.0,
                                  n_total > 0 ? acc_sum / n_total : 0.0};
  summaries_.push_back(summary);

  std::vector<Outgoing> out;
  for (const auto& c : clients_) out.push_back({c.link, sign(c.key, RoundComplete{round_, summary.metrics, 0})});
  std::vector<Outgoing> more;
  if (round_ >= options_.rounds) {
    more = broadcast_shutdown("training complete");
    phase_ = ServerPhase::done;
  } else {
    more = distribute();
  }
  out.insert(out.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  return out;
}

std::vector<Outgoing> Server::broadcast_shutdown(const std::string& reason) {
  std::vector<Outgoing> out;
  for (const auto& c : clients_) out.push_back({c.link, Shutdown{reason}});
  return out;
}

std::vector<Outgoing> Server::abort(const std::string& reason, std::optional<Outgoing> notice) {
  phase_ = ServerPhase::aborted;
  abort_reason_ = reason;
  std::vector<Outgoing> out;
  if (notice) out.push_back(std::move(*notice));
  auto shutdown = broadcast_shutdown("round " + std::to_string(round_) + " aborted: " + reason);
  for (auto& o : shutdown) {
    if (!notice || o.link != notice->link) out.push_back(std::move(o));
  }
  return out;
}

std::vector<Outgoing> Server::link_closed(std::size_t link, const std::string& detail) {
  if (finished()) return {};
  auto id = client_id_of(link);
  if (!id) return {};
  auto out = abort("client " + std::to_string(*id) + " disconnected (" + detail + ")");
  std::erase_if(out, [&](const Outgoing& o) { return o.link == link; });
  return out;
}

}  // namespace fednlp::fl
