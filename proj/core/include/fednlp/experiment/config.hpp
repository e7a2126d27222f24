#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fednlp/data/corpus.hpp"
#include "fednlp/data/masking.hpp"
#include "fednlp/data/partition.hpp"
#include "fednlp/fl/aggregate.hpp"

namespace fednlp::experiment {

enum class Mode { centralized, standalone, federated };
enum class Phase { pretrain_mlm, finetune_classify, pretrain_then_finetune };
enum class TransportKind { channel, tcp };

std::string_view mode_name(Mode mode);
std::string_view phase_name(Phase phase);
std::string_view transport_name(TransportKind kind);

struct Seeds {
  std::uint64_t corpus = 1;
  std::uint64_t partition = 2;
  std::uint64_t init = 3;
  std::uint64_t batch = 4;
};

struct DataSource {
  /// Empty: generate a synthetic corpus. Otherwise a corpus file (label<TAB>tokens).
  std::filesystem::path corpus_path;
  std::size_t n_patients = 8638;
  std::size_t min_len = 16;
  std::size_t max_len = 64;
  double prevalence = 1824.0 / 8638.0;
  double label_noise = 0.05;
  double decoy_rate = 0.3;

  data::GrammarParams grammar() const;
};

/// A declarative experiment. Every field has a default; JSON files and
/// `--set` overrides only name what differs.
struct ExperimentConfig {
  std::string run_id = "run";
  Mode mode = Mode::federated;
  Phase phase = Phase::finetune_classify;
  std::string model = "bert_mini";
  data::PartitionSpec partition{};
  std::uint32_t rounds = 10;
  /// Rounds of the MLM phase in pretrain_then_finetune; 0 means `rounds`.
  std::uint32_t pretrain_rounds = 0;
  std::uint32_t local_epochs = 1;
  std::size_t batch_size = 32;
  std::size_t eval_batch_size = 64;
  double lr = 1e-2;
  bool reset_optimizer = true;
  fl::AggregationRule aggregation = fl::AggregationRule::weighted;
  std::size_t vocab_size = 2000;
  /// Longest input the model accepts, cls included.
  std::size_t max_seq_len = 65;
  double validation_fraction = 0.1;
  double holdout_fraction = 0.2;
  data::MaskingConfig masking{};
  Seeds seeds{};
  TransportKind transport = TransportKind::channel;
  std::string auth_token = "fednlp-demo-token";
  /// Encoder weights for finetune_classify (a params file from a pretraining run).
  std::filesystem::path init_from;
  /// Permits federated mode with a single client.
  bool allow_single_client = false;
  DataSource data{};
  /// Replicate indices averaged by `compare`.
  std::vector<std::uint64_t> compare_seeds = {0};

  /// Rejects combinations the runner cannot honor (ConfigError).
  void validate() const;

  std::uint32_t rounds_for(Phase single_phase) const;
  /// All four seeds shifted for replicate `r` (r = 0 leaves them unchanged).
  ExperimentConfig replicate(std::uint64_t r) const;
};

/// Malformed JSON or a field of the wrong type/unknown name.
class ConfigParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses JSON text. Syntax errors report line and column.
ExperimentConfig parse_config(std::string_view json_text, const std::vector<std::string>& overrides = {});

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// The fully resolved config as pretty-printed JSON.
std::string config_to_json(const ExperimentConfig& config);

}  // namespace fednlp::experiment
