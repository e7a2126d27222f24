#include "fednlp/models/config.hpp"

#include "fednlp/tensor/errors.hpp"

namespace fednlp::models {

void ModelConfig::validate() const {
  if (d_model == 0 || n_layers == 0) throw ConfigError("model needs positive d_model and n_layers");
  if (vocab_size <= 4) throw ConfigError("model vocabulary must hold more than the 4 reserved tokens");
  if (max_seq_len == 0) throw ConfigError("model max_seq_len must be positive");
  if (n_classes == 0) throw ConfigError("model needs at least one class");
  if (kind == ModelKind::transformer) {
    if (n_heads == 0) throw ConfigError("transformer needs at least one attention head");
    if (head_dim() == 0) {
      throw ConfigError("d_model " + std::to_string(d_model) + " is too small for " + std::to_string(n_heads) +
                        " heads (head dim 0)");
    }
  }
}

ModelConfig bert_preset(std::size_t vocab_size, std::size_t max_seq_len) {
  return {ModelKind::transformer, 128, 6, 12, vocab_size, max_seq_len, 2};
}

ModelConfig bert_mini_preset(std::size_t vocab_size, std::size_t max_seq_len) {
  return {ModelKind::transformer, 50, 2, 6, vocab_size, max_seq_len, 2};
}

ModelConfig lstm_preset(std::size_t vocab_size, std::size_t max_seq_len) {
  return {ModelKind::lstm, 128, 0, 3, vocab_size, max_seq_len, 2};
}

ModelConfig preset(std::string_view name, std::size_t vocab_size, std::size_t max_seq_len) {
  if (name == "bert") return bert_preset(vocab_size, max_seq_len);
  if (name == "bert_mini") return bert_mini_preset(vocab_size, max_seq_len);
  if (name == "lstm") return lstm_preset(vocab_size, max_seq_len);
  throw ConfigError("unknown model preset '" + std::string(name) + "' (expected bert, bert_mini or lstm)");
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& c, Head head) {
  c.validate();
  const std::size_t d = c.d_model;
  std::vector<std::pair<std::string, Shape>> layout;
  layout.emplace_back("emb.tok", Shape{c.vocab_size, d});
  if (c.kind == ModelKind::transformer) {
    const std::size_t w = c.attention_width();
    const std::size_t f = c.ffn_dim();
    layout.emplace_back("emb.pos", Shape{c.max_seq_len, d});
    for (std::size_t l = 0; l < c.n_layers; ++l) {
      const std::string p = "enc." + std::to_string(l) + ".";
      layout.emplace_back(p + "attn.wq", Shape{d, w});
      layout.emplace_back(p + "attn.bq", Shape{w});
      layout.emplace_back(p + "attn.wk", Shape{d, w});
      layout.emplace_back(p + "attn.bk", Shape{w});
      layout.emplace_back(p + "attn.wv", Shape{d, w});
      layout.emplace_back(p + "attn.bv", Shape{w});
      layout.emplace_back(p + "attn.wo", Shape{w, d});
      layout.emplace_back(p + "attn.bo", Shape{d});
      layout.emplace_back(p + "ln1.gain", Shape{d});
      layout.emplace_back(p + "ln1.bias", Shape{d});
      layout.emplace_back(p + "ffn.w1", Shape{d, f});
      layout.emplace_back(p + "ffn.b1", Shape{f});
      layout.emplace_back(p + "ffn.w2", Shape{f, d});
      layout.emplace_back(p + "ffn.b2", Shape{d});
      layout.emplace_back(p + "ln2.gain", Shape{d});
      layout.emplace_back(p + "ln2.bias", Shape{d});
    }
  } else {
    for (std::size_t l = 0; l < c.n_layers; ++l) {
      const std::string p = "lstm." + std::to_string(l) + ".";
      layout.emplace_back(p + "wx", Shape{d, 4 * d});
      layout.emplace_back(p + "wh", Shape{d, 4 * d});
      layout.emplace_back(p + "b", Shape{4 * d});
    }
  }
  if (head == Head::mlm) {
    if (c.kind != ModelKind::transformer) throw ConfigError("the MLM head requires a transformer encoder");
    layout.emplace_back("mlm.w", Shape{d, c.vocab_size});
    layout.emplace_back("mlm.b", Shape{c.vocab_size});
  } else {
    layout.emplace_back("cls.w", Shape{d, c.n_classes});
    layout.emplace_back("cls.b", Shape{c.n_classes});
  }
  return layout;
}

std::vector<std::string> parameter_manifest(const ModelConfig& config, Head head) {
  std::vector<std::string> names;
  for (auto& [name, shape] : parameter_layout(config, head)) names.push_back(name);
  return names;
}

std::vector<std::string> encoder_prefixes(const ModelConfig& config) {
  if (config.kind == ModelKind::transformer) return {"emb.", "enc."};
  return {"emb.", "lstm."};
}

}  // namespace fednlp::models
