#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fednlp/tensor/tensor.hpp"

namespace fednlp::models {

enum class ModelKind { lstm, transformer };

/// Which output head a model instance carries.
enum class Head { mlm, classify };

struct ModelConfig {
  ModelKind kind = ModelKind::transformer;
  std::size_t d_model = 50;
  std::size_t n_heads = 2;  ///< transformer only
  std::size_t n_layers = 6;
  std::size_t vocab_size = 0;
  std::size_t max_seq_len = 64;
  std::size_t n_classes = 2;

  /// floor(d_model / n_heads). With 128 / 6 this is 21: the six heads
  /// concatenate to 126 columns and the output projection maps back to 128.
  std::size_t head_dim() const { return n_heads ? d_model / n_heads : 0; }
  std::size_t attention_width() const { return head_dim() * n_heads; }
  std::size_t ffn_dim() const { return 4 * d_model; }

  /// Throws ConfigError on an unusable configuration (e.g. head_dim == 0).
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// 128 hidden / 6 heads / 12 layers.
ModelConfig bert_preset(std::size_t vocab_size, std::size_t max_seq_len);
/// 50 hidden / 2 heads / 6 layers.
ModelConfig bert_mini_preset(std::size_t vocab_size, std::size_t max_seq_len);
/// 128 hidden / 3 stacked layers.
ModelConfig lstm_preset(std::size_t vocab_size, std::size_t max_seq_len);

/// "bert", "bert_mini" or "lstm".
ModelConfig preset(std::string_view name, std::size_t vocab_size, std::size_t max_seq_len);

/// Ordered (name, shape) list of every parameter. A pure function of the
/// config and head; this order is the serialization and aggregation key.
std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& config, Head head);

std::vector<std::string> parameter_manifest(const ModelConfig& config, Head head);

/// Name prefixes of the shared body (everything but the output head).
std::vector<std::string> encoder_prefixes(const ModelConfig& config);

}  // namespace fednlp::models
