#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "fednlp/data/corpus.hpp"
#include "fednlp/experiment/compare.hpp"
#include "fednlp/experiment/config.hpp"
#include "fednlp/experiment/dataset.hpp"
#include "fednlp/experiment/runner.hpp"
#include "fednlp/fl/server.hpp"
#include "fednlp/tensor/errors.hpp"
#include "fednlp/transport/tcp.hpp"

extern char** environ;

namespace {

using namespace fednlp;
using namespace fednlp::experiment;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

class UsageFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

ExperimentConfig resolve_config(const CommonArgs& args) {
  if (args.config_path.empty()) return parse_config("{}", args.overrides);
  return load_config(args.config_path, args.overrides);
}

void print_record(const MetricsRecord& r) {
  if (r.scope != "global") return;
  std::printf("[%s] round %u %-10s loss %.4f  top1 %.4f\n", r.run_id.c_str(), r.round, r.split.c_str(), r.loss,
              r.top1_accuracy);
  std::fflush(stdout);
}

void print_summary(const RunResult& result) {
  for (const auto& p : result.phases) {
    std::printf("%s: validation loss %.4f -> %.4f, top1 %.4f -> %.4f\n", p.run_id.c_str(), p.initial_loss,
                p.final_loss, p.initial_accuracy, p.final_accuracy);
  }
  std::printf("final params checksum: %s\n", checksum_hex(result.last().checksum).c_str());
}

std::string self_exe() {
  std::error_code ec;
  auto p = std::filesystem::read_symlink("/proc/self/exe", ec);
  return ec ? std::string("/proc/self/exe") : p.string();
}

// Launches `client` subprocesses for one session, each after its predecessor
// holds a client id, and waits for all of them.
ClientLauncher process_launcher(const CommonArgs& args, std::size_t n_clients) {
  return [args, n_clients](const transport::Address& server, Phase phase, fl::ProvisionGate& gate) {
    std::vector<pid_t> children;
    std::string exe = self_exe();
    for (std::size_t i = 0; i < n_clients; ++i) {
      if (!gate.wait_for(i)) break;
      std::vector<std::string> argv = {exe, "client", "--addr", server.to_string(), "--site", std::to_string(i),
                                       "--stage", phase == Phase::pretrain_mlm ? "pretrain" : "finetune"};
      if (!args.config_path.empty()) {
        argv.push_back("--config");
        argv.push_back(args.config_path);
      }
      for (const auto& o : args.overrides) {
        argv.push_back("--set");
        argv.push_back(o);
      }
      std::vector<char*> cargv;
      for (auto& a : argv) cargv.push_back(a.data());
      cargv.push_back(nullptr);
      pid_t pid = 0;
      if (posix_spawn(&pid, exe.c_str(), nullptr, nullptr, cargv.data(), environ) != 0) {
        throw std::runtime_error("cannot spawn client process " + std::to_string(i));
      }
      children.push_back(pid);
    }
    int failures = 0;
    for (pid_t pid : children) {
      int status = 0;
      while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
      }
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) ++failures;
    }
    if (failures > 0) std::fprintf(stderr, "warning: %d client process(es) exited with an error\n", failures);
  };
}

int cmd_gen_data(const CommonArgs& args, const std::string& out) {
  ExperimentConfig cfg = resolve_config(args);
  if (!cfg.data.corpus_path.empty()) throw UsageFailure("gen-data generates a synthetic corpus; unset data.corpus_path");
  auto records = load_records(cfg);
  data::write_corpus(out, records);
  std::size_t positives = 0;
  for (const auto& r : records) positives += r.label == 1 ? 1 : 0;
  std::printf("wrote %zu records (%zu positive) to %s\n", records.size(), positives, out.c_str());
  return kExitOk;
}

int cmd_run(const CommonArgs& args, const std::string& out, const std::string& transport) {
  CommonArgs effective = args;
  if (!transport.empty()) effective.overrides.push_back("transport=" + transport);
  ExperimentConfig cfg = resolve_config(effective);
  PreparedData data = prepare_data(cfg);
  RunHooks hooks;
  hooks.on_record = print_record;
  if (cfg.mode == Mode::federated && cfg.transport == TransportKind::tcp) {
    hooks.launch_clients = process_launcher(effective, data.shards.size());
  }
  RunResult result = run_experiment(cfg, data, hooks);
  if (!out.empty()) {
    write_outputs(cfg, result, out);
    std::printf("outputs written to %s\n", out.c_str());
  }
  print_summary(result);
  return kExitOk;
}

int cmd_serve(const CommonArgs& args, const std::string& addr, const std::string& out) {
  ExperimentConfig cfg = resolve_config(args);
  if (cfg.mode != Mode::federated) throw UsageFailure("serve requires mode federated");
  PreparedData data = prepare_data(cfg);
  transport::TcpServer server(transport::parse_address(addr));
  std::printf("listening on port %u for %zu clients\n", server.port(), data.shards.size());
  std::fflush(stdout);
  RunHooks hooks;
  hooks.on_record = print_record;
  const std::size_t n_clients = data.shards.size();
  auto serve_logged = [&](Phase phase, const ParameterSet& initial) {
    fl::ProvisionGate gate;
    std::thread log([&] {
      for (std::size_t i = 1; i <= n_clients && gate.wait_for(i); ++i) {
        std::printf("%zu/%zu clients provisioned\n", i, n_clients);
        std::fflush(stdout);
      }
    });
    try {
      auto r = serve_phase(cfg, data, phase, initial, server, hooks, &gate);
      gate.cancel();
      log.join();
      return r;
    } catch (...) {
      gate.cancel();
      log.join();
      throw;
    }
  };
  RunResult result;
  if (cfg.phase == Phase::pretrain_then_finetune) {
    result.phases.push_back(serve_logged(Phase::pretrain_mlm, initial_parameters(cfg, data, Phase::pretrain_mlm)));
    auto init = initial_parameters(cfg, data, Phase::finetune_classify, &result.phases.back().final_params);
    result.phases.push_back(serve_logged(Phase::finetune_classify, init));
  } else {
    result.phases.push_back(serve_logged(cfg.phase, initial_parameters(cfg, data, cfg.phase)));
  }
  if (!out.empty()) write_outputs(cfg, result, out);
  print_summary(result);
  return kExitOk;
}

int cmd_client(const CommonArgs& args, const std::string& addr, std::size_t site, const std::string& stage) {
  ExperimentConfig cfg = resolve_config(args);
  PreparedData data = prepare_data(cfg);
  auto address = transport::parse_address(addr);
  std::vector<Phase> phases;
  if (stage == "pretrain") {
    phases = {Phase::pretrain_mlm};
  } else if (stage == "finetune") {
    phases = {Phase::finetune_classify};
  } else if (cfg.phase == Phase::pretrain_then_finetune) {
    phases = {Phase::pretrain_mlm, Phase::finetune_classify};
  } else {
    phases = {cfg.phase};
  }
  for (Phase p : phases) run_remote_client(cfg, data, site, p, address);
  std::printf("%s finished\n", fl::site_name(site).c_str());
  return kExitOk;
}

int cmd_compare(const CommonArgs& args, const std::string& out, bool force) {
  ExperimentConfig cfg = resolve_config(args);
  CompareOptions options;
  options.out_dir = out.empty() ? "compare" : out;
  options.force = force;
  auto table = run_compare(cfg, options, [](const std::string& line) {
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
  });
  std::printf("\n%s", table.format().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated clinical NLP: synthetic data, local and networked training, comparisons"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  CommonArgs common;
  std::string out;
  std::string transport;
  std::string addr = "127.0.0.1:" + std::to_string(transport::kDefaultPort);
  std::size_t site = 0;
  std::string stage;
  bool force = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--set", common.overrides, "Override a config key, e.g. --set rounds=3 (repeatable)")
        ->take_all()
        ->allow_extra_args(false);
  };

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic corpus (label<TAB>tokens per line)");
  add_common(gen);
  gen->add_option("--out", out, "Output corpus file")->required();

  auto* run = app.add_subcommand("run", "Run an experiment config");
  add_common(run);
  run->add_option("--out", out, "Directory for metrics, parameters and the resolved config");
  run->add_option("--transport", transport, "Federated transport")->check(CLI::IsMember({"channel", "tcp"}));

  auto* serve = app.add_subcommand("serve", "Run the federated server over TCP");
  add_common(serve);
  serve->add_option("--addr", addr, "Listen address HOST:PORT");
  serve->add_option("--out", out, "Directory for metrics and parameters");

  auto* client = app.add_subcommand("client", "Run one federated client over TCP");
  add_common(client);
  client->add_option("--addr", addr, "Server address HOST:PORT");
  client->add_option("--site", site, "Shard index this client trains on")->required();
  client->add_option("--stage", stage, "Only join the given stage")->check(CLI::IsMember({"pretrain", "finetune"}));

  auto* compare = app.add_subcommand("compare", "Run the centralized / standalone / FL grid for every model");
  add_common(compare);
  compare->add_option("--out", out, "Directory holding one subdirectory per cell");
  compare->add_flag("--force", force, "Re-run cells that already have results");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(common, out);
    if (*run) return cmd_run(common, out, transport);
    if (*serve) return cmd_serve(common, addr, out);
    if (*client) return cmd_client(common, addr, site, stage);
    if (*compare) return cmd_compare(common, out, force);
  } catch (const ConfigParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const UsageFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const fl::RoundAborted& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}
