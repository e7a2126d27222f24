#include "fednlp/experiment/runner.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <memory>
#include <thread>

#include "fednlp/tensor/errors.hpp"
#include "fednlp/tensor/rng.hpp"
#include "fednlp/transport/wire.hpp"

namespace fednlp::experiment {

namespace {

using Clock = std::chrono::steady_clock;

models::Head head_for(Phase phase) { return phase == Phase::pretrain_mlm ? models::Head::mlm : models::Head::classify; }

std::string phase_tag(Phase phase) { return phase == Phase::pretrain_mlm ? "pretrain" : "finetune"; }

class Recorder {
 public:
  Recorder(const ExperimentConfig& config, std::string run_id, const RunHooks& hooks)
      : config_(config), run_id_(std::move(run_id)), hooks_(hooks), start_(Clock::now()) {}

  void add(std::uint32_t round, std::string scope, std::string split, double loss, double accuracy) {
    MetricsRecord r;
    r.run_id = run_id_;
    r.mode = std::string(mode_name(config_.mode));
    r.model = config_.model;
    r.round = round;
    r.scope = std::move(scope);
    r.split = std::move(split);
    r.loss = loss;
    r.top1_accuracy = accuracy;
    r.wall_time_ms = std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
    if (hooks_.on_record) hooks_.on_record(r);
    records_.push_back(std::move(r));
  }

  std::vector<MetricsRecord> take() {
    sort_records(records_);
    return std::move(records_);
  }

 private:
  const ExperimentConfig& config_;
  std::string run_id_;
  const RunHooks& hooks_;
  Clock::time_point start_;
  std::vector<MetricsRecord> records_;
};

std::string phase_run_id(const ExperimentConfig& config, Phase phase) {
  if (config.phase != Phase::pretrain_then_finetune) return config.run_id;
  return config.run_id + "-" + phase_tag(phase);
}

// Rounds of `local_epochs` epochs with wire-precision parameters at every
// round boundary, as a federated client would see them.
PhaseResult run_pooled(const ExperimentConfig& config, const PreparedData& data, Phase phase,
                       const std::vector<ParameterSet>& initial, const RunHooks& hooks) {
  const models::Head head = head_for(phase);
  const auto validate = make_validator(config, data, head);
  const auto directive = train_directive(config);
  const std::uint32_t rounds = config.rounds_for(phase);
  const bool standalone = config.mode == Mode::standalone;

  PhaseResult result;
  result.phase = phase;
  result.run_id = phase_run_id(config, phase);
  Recorder rec(config, result.run_id, hooks);

  std::vector<std::unique_ptr<fl::ShardTrainer>> learners;
  if (standalone) {
    for (std::size_t k = 0; k < data.shards.size(); ++k) {
      learners.push_back(std::make_unique<fl::ShardTrainer>(learner_options(config, data, head, k),
                                                            data.shards[k].train,
                                                            std::vector<data::EncodedRecord>{}));
    }
  } else {
    learners.push_back(std::make_unique<fl::ShardTrainer>(learner_options(config, data, head, 0), data.pooled_train(),
                                                          std::vector<data::EncodedRecord>{}));
  }
  if (initial.size() != 1 && initial.size() != learners.size()) {
    throw UsageError("runner: " + std::to_string(initial.size()) + " initial parameter sets for " +
                     std::to_string(learners.size()) + " learners");
  }

  std::vector<ParameterSet> params;
  std::vector<fl::ValidationResult> val;
  for (std::size_t k = 0; k < learners.size(); ++k) {
    params.push_back(quantize_to_f32(initial.size() == 1 ? initial[0] : initial[k]));
    val.push_back(validate(params.back()));
  }

  auto emit_validation = [&](std::uint32_t round) {
    double loss = 0.0;
    double acc = 0.0;
    for (std::size_t k = 0; k < learners.size(); ++k) {
      if (standalone) rec.add(round, client_scope(k), "validation", val[k].loss, val[k].accuracy);
      loss += val[k].loss;
      acc += val[k].accuracy;
    }
    auto n = static_cast<double>(learners.size());
    rec.add(round, "global", "validation", loss / n, acc / n);
    return std::pair{loss / n, acc / n};
  };

  std::tie(result.initial_loss, result.initial_accuracy) = emit_validation(0);
  result.final_loss = result.initial_loss;
  result.final_accuracy = result.initial_accuracy;

  for (std::uint32_t r = 1; r <= rounds; ++r) {
    double train_loss = 0.0;
    double train_acc = 0.0;
    double n_total = 0.0;
    for (std::size_t k = 0; k < learners.size(); ++k) {
      fl::LocalResult out = learners[k]->train(params[k], directive, r);
      params[k] = quantize_to_f32(out.params);
      val[k] = validate(params[k]);
      auto n = static_cast<double>(out.n_samples);
      if (standalone) rec.add(r, client_scope(k), "train", out.metrics.train_loss, out.metrics.train_accuracy);
      train_loss += n * out.metrics.train_loss;
      train_acc += n * out.metrics.train_accuracy;
      n_total += n;
    }
    rec.add(r, "global", "train", train_loss / n_total, train_acc / n_total);
    std::tie(result.final_loss, result.final_accuracy) = emit_validation(r);
    if (hooks.keep_round_params && !standalone) result.round_params.push_back(params[0]);
  }

  if (standalone) {
    for (const auto& v : val) result.client_final_accuracy.push_back(v.accuracy);
    result.client_params = std::move(params);
    result.checksum = params_checksum(result.client_params);
  } else {
    result.final_params = std::move(params[0]);
    result.checksum = params_checksum(std::span<const ParameterSet>(&result.final_params, 1));
  }
  result.records = rec.take();
  return result;
}

using Driver = std::function<void(fl::Server&, const fl::ServeHooks&)>;

PhaseResult run_session(const ExperimentConfig& config, const PreparedData& data, Phase phase,
                        const ParameterSet& initial, const RunHooks& hooks, fl::ProvisionGate* gate,
                        const Driver& drive) {
  const models::Head head = head_for(phase);
  fl::ServerOptions options;
  options.n_clients = data.shards.size();
  options.auth_token = config.auth_token;
  options.rounds = config.rounds_for(phase);
  options.directive = train_directive(config);
  options.rule = config.aggregation;
  options.key_seed = Rng::derive(config.seeds.init, {0x5E55});
  options.keep_round_params = hooks.keep_round_params;

  PhaseResult result;
  result.phase = phase;
  result.run_id = phase_run_id(config, phase);
  Recorder rec(config, result.run_id, hooks);

  fl::Server server(options, initial, make_validator(config, data, head));
  result.initial_loss = server.initial_validation().loss;
  result.initial_accuracy = server.initial_validation().accuracy;
  result.final_loss = result.initial_loss;
  result.final_accuracy = result.initial_accuracy;
  rec.add(0, "global", "validation", result.initial_loss, result.initial_accuracy);

  fl::ServeHooks serve_hooks;
  serve_hooks.gate = gate;
  serve_hooks.on_round = [&](const fl::RoundSummary& s) {
    double n_total = 0.0;
    double loss = 0.0;
    double acc = 0.0;
    for (const auto& c : s.clients) {
      auto n = static_cast<double>(c.n_samples);
      n_total += n;
      loss += n * c.metrics.train_loss;
      acc += n * c.metrics.train_accuracy;
    }
    rec.add(s.round, "global", "train", n_total > 0 ? loss / n_total : 0.0, n_total > 0 ? acc / n_total : 0.0);
    rec.add(s.round, "global", "validation", s.metrics.val_loss, s.metrics.val_accuracy);
    for (const auto& c : s.clients) {
      rec.add(s.round, client_scope(c.client_id), "train", c.metrics.train_loss, c.metrics.train_accuracy);
      rec.add(s.round, client_scope(c.client_id), "validation", c.metrics.val_loss, c.metrics.val_accuracy);
    }
    result.final_loss = s.metrics.val_loss;
    result.final_accuracy = s.metrics.val_accuracy;
  };

  drive(server, serve_hooks);

  result.final_params = server.global();
  result.round_params = server.round_params();
  result.checksum = params_checksum(std::span<const ParameterSet>(&result.final_params, 1));
  result.records = rec.take();
  return result;
}

PhaseResult run_federated(const ExperimentConfig& config, const PreparedData& data, Phase phase,
                          const ParameterSet& initial, const RunHooks& hooks) {
  const models::Head head = head_for(phase);
  std::vector<std::unique_ptr<fl::ShardTrainer>> trainers;
  std::vector<fl::LocalTrainer*> ptrs;
  auto make_trainers = [&] {
    for (std::size_t k = 0; k < data.shards.size(); ++k) {
      trainers.push_back(std::make_unique<fl::ShardTrainer>(learner_options(config, data, head, k),
                                                            data.shards[k].train, data.shards[k].holdout));
      ptrs.push_back(trainers.back().get());
    }
  };

  if (config.transport == TransportKind::channel) {
    make_trainers();
    return run_session(config, data, phase, initial, hooks, nullptr,
                       [&](fl::Server& s, const fl::ServeHooks& h) { fl::run_in_process(s, ptrs, {}, h); });
  }
  if (!hooks.launch_clients) {
    make_trainers();
    return run_session(config, data, phase, initial, hooks, nullptr,
                       [&](fl::Server& s, const fl::ServeHooks& h) { fl::run_over_loopback_tcp(s, ptrs, h); });
  }

  transport::TcpServer tcp(transport::Address{"127.0.0.1", 0});
  fl::ProvisionGate gate;
  std::exception_ptr launch_error;
  std::thread launcher([&] {
    try {
      hooks.launch_clients(transport::Address{"127.0.0.1", tcp.port()}, phase, gate);
    } catch (...) {
      launch_error = std::current_exception();
      tcp.close();
    }
  });
  PhaseResult result;
  try {
    result = serve_phase(config, data, phase, initial, tcp, hooks, &gate);
  } catch (...) {
    gate.cancel();
    launcher.join();
    throw;
  }
  launcher.join();
  if (launch_error) std::rethrow_exception(launch_error);
  return result;
}

PhaseResult run_phase(const ExperimentConfig& config, const PreparedData& data, Phase phase,
                      const std::vector<ParameterSet>& initial, const RunHooks& hooks) {
  if (config.mode == Mode::federated) return run_federated(config, data, phase, initial.at(0), hooks);
  return run_pooled(config, data, phase, initial, hooks);
}

}  // namespace

models::ModelConfig model_config(const ExperimentConfig& config, const PreparedData& data) {
  return models::preset(config.model, data.vocab.size(), config.max_seq_len);
}

fl::Server::Validator make_validator(const ExperimentConfig& config, const PreparedData& data, models::Head head) {
  models::EvalOptions eval;
  eval.task = head == models::Head::mlm ? models::Task::mlm : models::Task::classify;
  eval.batch_size = config.eval_batch_size;
  eval.masking = config.masking;
  eval.mask_seed = Rng::derive(config.seeds.batch, {0x7A1D});
  models::ModelConfig mc = model_config(config, data);
  const auto* records = &data.validation;
  return [mc, head, eval, records](const ParameterSet& params) {
    if (records->empty()) return fl::ValidationResult{};
    models::Metrics m = models::evaluate(mc, head, params, *records, eval);
    return fl::ValidationResult{m.loss, m.top1_accuracy};
  };
}

fl::LearnerOptions learner_options(const ExperimentConfig& config, const PreparedData& data, models::Head head,
                                   std::uint64_t stream) {
  fl::LearnerOptions o;
  o.config = model_config(config, data);
  o.head = head;
  o.batch_size = config.batch_size;
  o.eval_batch_size = config.eval_batch_size;
  o.masking = config.masking;
  o.seed = config.seeds.batch;
  o.stream = stream;
  o.adam.lr = config.lr;
  return o;
}

fl::TrainDirective train_directive(const ExperimentConfig& config) {
  return fl::TrainDirective{config.local_epochs, config.lr, config.reset_optimizer};
}

ParameterSet initial_parameters(const ExperimentConfig& config, const PreparedData& data, Phase phase,
                                const ParameterSet* encoder) {
  models::Model model = models::init_model(model_config(config, data), head_for(phase), config.seeds.init);
  if (phase == Phase::pretrain_mlm) return model.parameters();
  if (encoder != nullptr) {
    model.load_encoder(*encoder);
  } else if (!config.init_from.empty()) {
    if (!std::filesystem::exists(config.init_from)) {
      throw UsageError("pretraining snapshot " + config.init_from.string() + " does not exist");
    }
    model.load_encoder(load_params(config.init_from));
  }
  return model.parameters();
}

RunResult run_experiment(const ExperimentConfig& config, const RunHooks& hooks) {
  config.validate();
  return run_experiment(config, prepare_data(config), hooks);
}

RunResult run_experiment(const ExperimentConfig& config, const PreparedData& data, const RunHooks& hooks) {
  config.validate();
  RunResult result;
  if (config.phase == Phase::pretrain_then_finetune) {
    result.phases.push_back(
        run_phase(config, data, Phase::pretrain_mlm, {initial_parameters(config, data, Phase::pretrain_mlm)}, hooks));
    const PhaseResult& pre = result.phases.back();
    std::vector<ParameterSet> init;
    if (config.mode == Mode::standalone) {
      for (const auto& p : pre.client_params) init.push_back(initial_parameters(config, data, Phase::finetune_classify, &p));
    } else {
      init.push_back(initial_parameters(config, data, Phase::finetune_classify, &pre.final_params));
    }
    result.phases.push_back(run_phase(config, data, Phase::finetune_classify, init, hooks));
  } else {
    result.phases.push_back(
        run_phase(config, data, config.phase, {initial_parameters(config, data, config.phase)}, hooks));
  }
  return result;
}

void run_remote_client(const ExperimentConfig& config, const PreparedData& data, std::size_t site, Phase phase,
                       const transport::Address& server) {
  if (site >= data.shards.size()) {
    throw ConfigError("site " + std::to_string(site) + " out of range for " + std::to_string(data.shards.size()) +
                      " shards");
  }
  fl::ShardTrainer trainer(learner_options(config, data, head_for(phase), site), data.shards[site].train,
                           data.shards[site].holdout);
  auto endpoint = transport::tcp_connect(server, std::chrono::seconds(30));
  fl::Client client(fl::site_name(site), config.auth_token, trainer);
  fl::run_client(client, *endpoint);
  if (client.error()) {
    throw std::runtime_error(std::string(fl::error_code_name(client.error()->code)) + ": " + client.error()->detail);
  }
  if (!client.shutdown_reason()) throw std::runtime_error("connection to the server was lost");
  if (client.completed_rounds().size() != client.round_plan().total_rounds) {
    throw std::runtime_error("session ended early: " + *client.shutdown_reason());
  }
}

PhaseResult serve_phase(const ExperimentConfig& config, const PreparedData& data, Phase phase,
                        const ParameterSet& initial, transport::ServerEndpoint& endpoint, const RunHooks& hooks,
                        fl::ProvisionGate* gate) {
  return run_session(config, data, phase, initial, hooks, gate,
                     [&](fl::Server& s, const fl::ServeHooks& h) { fl::serve(s, endpoint, h); });
}

void save_params(const std::filesystem::path& path, const ParameterSet& params) {
  auto bytes = transport::encode_message(fl::GlobalModel{0, params, {}, 0});
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

ParameterSet load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto decoded = transport::decode_message(bytes);
  if (auto* err = std::get_if<transport::DecodeError>(&decoded)) {
    throw std::runtime_error(path.string() + ": " + std::string(transport::decode_error_name(err->code)) + ": " +
                             err->detail);
  }
  auto* gm = std::get_if<fl::GlobalModel>(&std::get<fl::FlMessage>(decoded));
  if (gm == nullptr) throw std::runtime_error(path.string() + " does not hold a parameter set");
  return gm->params;
}

std::uint32_t params_checksum(std::span<const ParameterSet> sets) {
  std::vector<std::uint8_t> bytes;
  for (const auto& p : sets) {
    auto payload = transport::encode_payload(fl::GlobalModel{0, p, {}, 0});
    bytes.insert(bytes.end(), payload.begin(), payload.end());
  }
  return transport::crc32(bytes);
}

std::string checksum_hex(std::uint32_t checksum) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x", checksum);
  return buf;
}

std::string metrics_file_name(const ExperimentConfig& config, Phase phase) {
  if (config.phase != Phase::pretrain_then_finetune) return "metrics.csv";
  return "metrics_" + phase_tag(phase) + ".csv";
}

void write_outputs(const ExperimentConfig& config, const RunResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "config.json", std::ios::trunc);
    out << config_to_json(config);
    if (!out) throw std::runtime_error("cannot write " + (out_dir / "config.json").string());
  }
  for (const auto& phase : result.phases) {
    emit_metrics(phase.records, out_dir / metrics_file_name(config, phase.phase));
    std::string stem =
        config.phase == Phase::pretrain_then_finetune && phase.phase == Phase::pretrain_mlm ? "pretrain" : "final";
    if (phase.client_params.empty()) {
      save_params(out_dir / (stem + ".params"), phase.final_params);
    } else {
      for (std::size_t k = 0; k < phase.client_params.size(); ++k) {
        save_params(out_dir / (stem + "_" + client_scope(k) + ".params"), phase.client_params[k]);
      }
    }
  }
}

}  // namespace fednlp::experiment
