#include "fednlp/experiment/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fednlp/tensor/errors.hpp"
#include "json.hpp"

namespace fednlp::experiment {

using nlohmann::json;

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::centralized: return "centralized";
    case Mode::standalone: return "standalone";
    case Mode::federated: return "federated";
  }
  return "unknown";
}

std::string_view phase_name(Phase phase) {
  switch (phase) {
    case Phase::pretrain_mlm: return "pretrain_mlm";
    case Phase::finetune_classify: return "finetune_classify";
    case Phase::pretrain_then_finetune: return "pretrain_then_finetune";
  }
  return "unknown";
}

std::string_view transport_name(TransportKind kind) { return kind == TransportKind::tcp ? "tcp" : "channel"; }

namespace {

std::string_view partition_mode_name(data::PartitionMode mode) {
  switch (mode) {
    case data::PartitionMode::balanced: return "balanced";
    case data::PartitionMode::imbalanced: return "imbalanced";
    case data::PartitionMode::small: return "small";
  }
  return "unknown";
}

template <typename E>
E parse_enum(const json& value, const std::string& key, std::initializer_list<std::pair<std::string_view, E>> options) {
  if (!value.is_string()) throw ConfigParseError("'" + key + "' must be a string");
  const auto& text = value.get_ref<const std::string&>();
  std::string expected;
  for (const auto& [name, e] : options) {
    if (text == name) return e;
    expected += (expected.empty() ? "" : ", ") + std::string(name);
  }
  throw ConfigParseError("'" + key + "' must be one of " + expected + "; got '" + text + "'");
}

// Reads the members of one JSON object, rejecting names nobody asked for.
class Fields {
 public:
  Fields(const json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) throw ConfigParseError("'" + label() + "' must be an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }

  std::string key(const std::string& name) const { return path_.empty() ? name : path_ + "." + name; }

  template <typename T>
  void read(const std::string& name, T& out) {
    const json* v = find(name);
    if (v == nullptr) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw ConfigParseError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw ConfigParseError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_unsigned()) throw ConfigParseError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw ConfigParseError("");
      }
      out = v->get<T>();
    } catch (const std::exception&) {
      throw ConfigParseError("'" + key(name) + "' has the wrong type (" + std::string(v->type_name()) + ")");
    }
  }

  void finish() const {
    for (auto it = object_.begin(); it != object_.end(); ++it) {
      if (seen_.count(it.key()) == 0) throw ConfigParseError("unknown config key '" + key(it.key()) + "'");
    }
  }

 private:
  std::string label() const { return path_.empty() ? "config" : path_; }
  const json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_partition(const json& j, ExperimentConfig& cfg) {
  Fields f(j, "partition");
  data::PartitionMode mode = cfg.partition.mode;
  if (const json* m = f.find("mode")) {
    mode = parse_enum<data::PartitionMode>(*m, "partition.mode",
                                           {{"balanced", data::PartitionMode::balanced},
                                            {"imbalanced", data::PartitionMode::imbalanced},
                                            {"small", data::PartitionMode::small}});
  }
  std::optional<std::size_t> n;
  if (const json* v = f.find("n_clients")) {
    if (!v->is_number_unsigned()) throw ConfigParseError("'partition.n_clients' must be a non-negative integer");
    n = v->get<std::size_t>();
  }
  std::optional<std::vector<double>> ratios;
  if (const json* v = f.find("ratios")) {
    if (!v->is_array()) throw ConfigParseError("'partition.ratios' must be an array of numbers");
    std::vector<double> r;
    for (const auto& x : *v) {
      if (!x.is_number()) throw ConfigParseError("'partition.ratios' must be an array of numbers");
      r.push_back(x.get<double>());
    }
    ratios = std::move(r);
  }
  f.finish();
  if (mode == data::PartitionMode::balanced) {
    cfg.partition = data::PartitionSpec::balanced(n.value_or(cfg.partition.n_clients));
  } else {
    std::vector<double> r = ratios.value_or(cfg.partition.mode == data::PartitionMode::balanced
                                                ? data::PartitionSpec::default_ratios()
                                                : cfg.partition.ratios);
    cfg.partition = mode == data::PartitionMode::small ? data::PartitionSpec::small(std::move(r))
                                                       : data::PartitionSpec::imbalanced(std::move(r));
    if (n && *n != cfg.partition.n_clients) {
      throw ConfigParseError("'partition.n_clients' (" + std::to_string(*n) + ") disagrees with " +
                             std::to_string(cfg.partition.n_clients) + " ratios");
    }
  }
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig cfg;
  Fields f(j, "");
  f.read("run_id", cfg.run_id);
  if (const json* v = f.find("mode")) {
    cfg.mode = parse_enum<Mode>(
        *v, "mode", {{"centralized", Mode::centralized}, {"standalone", Mode::standalone}, {"federated", Mode::federated}});
  }
  if (const json* v = f.find("phase")) {
    cfg.phase = parse_enum<Phase>(*v, "phase",
                                  {{"pretrain_mlm", Phase::pretrain_mlm},
                                   {"finetune_classify", Phase::finetune_classify},
                                   {"pretrain_then_finetune", Phase::pretrain_then_finetune}});
  }
  f.read("model", cfg.model);
  if (const json* v = f.find("partition")) read_partition(*v, cfg);
  f.read("rounds", cfg.rounds);
  f.read("pretrain_rounds", cfg.pretrain_rounds);
  f.read("local_epochs", cfg.local_epochs);
  f.read("batch_size", cfg.batch_size);
  f.read("eval_batch_size", cfg.eval_batch_size);
  f.read("lr", cfg.lr);
  f.read("reset_optimizer", cfg.reset_optimizer);
  if (const json* v = f.find("aggregation")) {
    cfg.aggregation = parse_enum<fl::AggregationRule>(
        *v, "aggregation", {{"weighted", fl::AggregationRule::weighted}, {"unweighted", fl::AggregationRule::unweighted}});
  }
  f.read("vocab_size", cfg.vocab_size);
  f.read("max_seq_len", cfg.max_seq_len);
  f.read("validation_fraction", cfg.validation_fraction);
  f.read("holdout_fraction", cfg.holdout_fraction);
  if (const json* v = f.find("masking")) {
    Fields m(*v, "masking");
    m.read("select_prob", cfg.masking.select_prob);
    m.read("mask_frac", cfg.masking.mask_frac);
    m.read("random_frac", cfg.masking.random_frac);
    m.read("keep_frac", cfg.masking.keep_frac);
    m.finish();
  }
  if (const json* v = f.find("seeds")) {
    Fields s(*v, "seeds");
    s.read("corpus", cfg.seeds.corpus);
    s.read("partition", cfg.seeds.partition);
    s.read("init", cfg.seeds.init);
    s.read("batch", cfg.seeds.batch);
    s.finish();
  }
  if (const json* v = f.find("transport")) {
    cfg.transport = parse_enum<TransportKind>(*v, "transport", {{"channel", TransportKind::channel}, {"tcp", TransportKind::tcp}});
  }
  f.read("auth_token", cfg.auth_token);
  std::string init_from;
  f.read("init_from", init_from);
  cfg.init_from = init_from;
  f.read("allow_single_client", cfg.allow_single_client);
  if (const json* v = f.find("data")) {
    Fields d(*v, "data");
    std::string path;
    d.read("corpus_path", path);
    cfg.data.corpus_path = path;
    d.read("n_patients", cfg.data.n_patients);
    d.read("min_len", cfg.data.min_len);
    d.read("max_len", cfg.data.max_len);
    d.read("prevalence", cfg.data.prevalence);
    d.read("label_noise", cfg.data.label_noise);
    d.read("decoy_rate", cfg.data.decoy_rate);
    d.finish();
  }
  if (const json* v = f.find("compare")) {
    Fields c(*v, "compare");
    c.read("seeds", cfg.compare_seeds);
    c.finish();
  }
  f.finish();
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  json j;
  j["run_id"] = cfg.run_id;
  j["mode"] = mode_name(cfg.mode);
  j["phase"] = phase_name(cfg.phase);
  j["model"] = cfg.model;
  j["partition"] = {{"mode", partition_mode_name(cfg.partition.mode)},
                    {"n_clients", cfg.partition.n_clients},
                    {"ratios", cfg.partition.ratios}};
  j["rounds"] = cfg.rounds;
  j["pretrain_rounds"] = cfg.pretrain_rounds;
  j["local_epochs"] = cfg.local_epochs;
  j["batch_size"] = cfg.batch_size;
  j["eval_batch_size"] = cfg.eval_batch_size;
  j["lr"] = cfg.lr;
  j["reset_optimizer"] = cfg.reset_optimizer;
  j["aggregation"] = fl::aggregation_rule_name(cfg.aggregation);
  j["vocab_size"] = cfg.vocab_size;
  j["max_seq_len"] = cfg.max_seq_len;
  j["validation_fraction"] = cfg.validation_fraction;
  j["holdout_fraction"] = cfg.holdout_fraction;
  j["masking"] = {{"select_prob", cfg.masking.select_prob},
                  {"mask_frac", cfg.masking.mask_frac},
                  {"random_frac", cfg.masking.random_frac},
                  {"keep_frac", cfg.masking.keep_frac}};
  j["seeds"] = {{"corpus", cfg.seeds.corpus}, {"partition", cfg.seeds.partition}, {"init", cfg.seeds.init},
                {"batch", cfg.seeds.batch}};
  j["transport"] = transport_name(cfg.transport);
  j["auth_token"] = cfg.auth_token;
  j["init_from"] = cfg.init_from.string();
  j["allow_single_client"] = cfg.allow_single_client;
  j["data"] = {{"corpus_path", cfg.data.corpus_path.string()},
               {"n_patients", cfg.data.n_patients},
               {"min_len", cfg.data.min_len},
               {"max_len", cfg.data.max_len},
               {"prevalence", cfg.data.prevalence},
               {"label_noise", cfg.data.label_noise},
               {"decoy_rate", cfg.data.decoy_rate}};
  j["compare"] = {{"seeds", cfg.compare_seeds}};
  return j;
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

void apply_override(json& root, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigParseError("override '" + assignment + "' must look like key=value");
  }
  std::string path = assignment.substr(0, eq);
  std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &root;
  std::size_t start = 0;
  for (;;) {
    auto dot = path.find('.', start);
    std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigParseError("override key '" + path + "' has an empty component");
    if (!node->is_object()) throw ConfigParseError("override key '" + path + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

}  // namespace

data::GrammarParams DataSource::grammar() const {
  data::GrammarParams g = data::GrammarParams::clinical_defaults();
  g.min_len = min_len;
  g.max_len = max_len;
  g.prevalence = prevalence;
  g.label_noise = label_noise;
  g.decoy_rate = decoy_rate;
  return g;
}

void ExperimentConfig::validate() const {
  if (model != "bert" && model != "bert_mini" && model != "lstm") {
    throw ConfigError("model must be bert, bert_mini or lstm; got '" + model + "'");
  }
  if (model == "lstm" && phase != Phase::finetune_classify) {
    throw ConfigError("the lstm preset has no MLM path; use phase finetune_classify");
  }
  partition.validate();
  if (mode == Mode::federated && partition.shard_count() < 2 && !allow_single_client) {
    throw ConfigError("federated mode needs at least 2 clients (set allow_single_client to override)");
  }
  if (local_epochs == 0) throw ConfigError("local_epochs must be positive");
  if (batch_size == 0 || eval_batch_size == 0) throw ConfigError("batch sizes must be positive");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (vocab_size < 5) throw ConfigError("vocab_size must be at least 5");
  if (max_seq_len < 2) throw ConfigError("max_seq_len must be at least 2");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) throw ConfigError("holdout_fraction must lie in [0, 1)");
  masking.validate();
  if (data.corpus_path.empty()) data.grammar().validate();
  if (compare_seeds.empty()) throw ConfigError("compare.seeds must not be empty");
}

std::uint32_t ExperimentConfig::rounds_for(Phase single_phase) const {
  if (phase == Phase::pretrain_then_finetune && single_phase == Phase::pretrain_mlm && pretrain_rounds > 0) {
    return pretrain_rounds;
  }
  return rounds;
}

ExperimentConfig ExperimentConfig::replicate(std::uint64_t r) const {
  ExperimentConfig c = *this;
  c.seeds.corpus += 1000 * r;
  c.seeds.partition += 1000 * r;
  c.seeds.init += 1000 * r;
  c.seeds.batch += 1000 * r;
  return c;
}

ExperimentConfig parse_config(std::string_view json_text, const std::vector<std::string>& overrides) {
  json root;
  try {
    root = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    auto [line, column] = line_column(json_text, e.byte == 0 ? 0 : e.byte - 1);
    std::string what = e.what();
    auto colon = what.find("; ");
    throw ConfigParseError("malformed JSON at line " + std::to_string(line) + ", column " + std::to_string(column) +
                           (colon == std::string::npos ? "" : ": " + what.substr(colon + 2)));
  }
  if (!root.is_object()) throw ConfigParseError("config must be a JSON object");
  for (const auto& o : overrides) apply_override(root, o);
  ExperimentConfig cfg = from_json(root);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigParseError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), overrides);
}

std::string config_to_json(const ExperimentConfig& config) { return to_json(config).dump(2) + "\n"; }

}  // namespace fednlp::experiment
