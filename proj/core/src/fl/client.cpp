#include "fednlp/fl/client.hpp"

#include "fednlp/fl/session.hpp"
#include "fednlp/tensor/errors.hpp"

namespace fednlp::fl {

Client::Client(std::string name, std::string auth_token, LocalTrainer& trainer)
    : name_(std::move(name)), auth_token_(std::move(auth_token)), trainer_(trainer) {}

FlMessage Client::hello() {
  if (phase_ != ClientPhase::unprovisioned) throw UsageError("client: hello already sent");
  phase_ = ClientPhase::awaiting_provision;
  return Hello{name_, auth_token_};
}

std::vector<FlMessage> Client::fail(ErrorCode code, std::string detail) {
  Error e{code, std::move(detail)};
  error_ = e;
  phase_ = ClientPhase::done;
  return {e};
}

std::vector<FlMessage> Client::handle(const FlMessage& message) {
  if (phase_ == ClientPhase::done) return {};
  if (const auto* s = std::get_if<Shutdown>(&message)) {
    shutdown_reason_ = s->reason;
    phase_ = ClientPhase::done;
    return {};
  }
  if (const auto* e = std::get_if<Error>(&message)) {
    error_ = *e;
    phase_ = ClientPhase::done;
    return {};
  }
  if (const auto* p = std::get_if<Provisioned>(&message)) {
    if (phase_ != ClientPhase::awaiting_provision) return fail(ErrorCode::unexpected_message, "unexpected Provisioned");
    client_id_ = p->client_id;
    session_key_ = p->session_key;
    plan_ = p->round_plan;
    phase_ = ClientPhase::ready;
    return {};
  }
  if (phase_ != ClientPhase::ready) return fail(ErrorCode::unexpected_message, "message before provisioning");
  if (const auto* gm = std::get_if<GlobalModel>(&message)) return on_global(*gm);
  if (const auto* rc = std::get_if<RoundComplete>(&message)) {
    if (!verify(session_key_, *rc)) return fail(ErrorCode::bad_session, "RoundComplete has a bad session tag");
    completed_.push_back(*rc);
    return {};
  }
  return fail(ErrorCode::unexpected_message,
              "clients do not accept " + std::string(message_type_name(message_type(message))));
}

std::vector<FlMessage> Client::on_global(const GlobalModel& gm) {
  if (!verify(session_key_, gm)) return fail(ErrorCode::bad_session, "GlobalModel has a bad session tag");
  if (gm.round != last_round_ + 1) {
    return fail(ErrorCode::stale_round,
                "expected round " + std::to_string(last_round_ + 1) + ", got " + std::to_string(gm.round));
  }
  if (!trainer_.accepts(gm.params)) return fail(ErrorCode::manifest_mismatch, "global model does not fit this client");
  last_round_ = gm.round;
  LocalResult r = trainer_.train(gm.params, gm.directive, gm.round);
  ParameterSet params = quantize_to_f32(r.params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params.tensor(i).all_finite()) {
      return fail(ErrorCode::aborted, "local training diverged in '" + params.name(i) + "'");
    }
  }
  if (!params.same_manifest(gm.params)) return fail(ErrorCode::manifest_mismatch, "local update changed the manifest");
  LocalUpdate update{*client_id_, gm.round, std::move(params), r.n_samples, r.metrics, 0};
  return {sign(session_key_, std::move(update))};
}

}  // namespace fednlp::fl
