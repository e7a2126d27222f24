#include "fednlp/data/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "fednlp/tensor/errors.hpp"
#include "fednlp/tensor/rng.hpp"

namespace fednlp::data {

GrammarParams GrammarParams::clinical_defaults() {
  GrammarParams g;
  g.categories = {
      {"dx", "dx_", 600, 1.0},     {"drug", "drug_", 450, 1.0}, {"dose", "dose_", 6, 0.5},
      {"lab", "lab_", 450, 1.0},   {"level", "level_", 5, 0.5}, {"proc", "proc_", 400, 1.0},
      {"gene", "gene_", 120, 1.0}, {"dept", "dept_", 12, 0.8},
  };
  g.templates = {
      {"visit", 3.0, {"visit", "{dept}", "{dx}", "{dx}"}},
      {"prescription", 2.5, {"rx", "{drug}", "{dose}"}},
      {"lab", 2.0, {"lab", "{lab}", "{level}"}},
      {"procedure", 1.0, {"proc", "{proc}"}},
      {"genotype", 0.5, {"geno", "{gene}"}},
  };
  g.trigger_a = {"trigger_prescription", 1.0, {"rx", "clopidogrel", "{dose}"}};
  g.trigger_b = {"trigger_genotype", 1.0, {"geno", "cyp2c19_lof"}};
  g.rule_token_a = "clopidogrel";
  g.rule_token_b = "cyp2c19_lof";
  return g;
}

namespace {

struct CompiledCategory {
  std::vector<std::string> tokens;
  std::vector<double> cumulative;  // normalized CDF
};

std::string category_token(const TokenCategory& c, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return c.prefix + buf;
}

bool is_slot(const std::string& s) { return s.size() > 2 && s.front() == '{' && s.back() == '}'; }

class Grammar {
 public:
  explicit Grammar(const GrammarParams& p) : p_(p) {
    for (const auto& c : p.categories) {
      CompiledCategory cc;
      double total = 0.0;
      for (std::size_t i = 0; i < c.size; ++i) {
        cc.tokens.push_back(category_token(c, i));
        total += 1.0 / std::pow(static_cast<double>(i + 1), c.zipf_exponent);
        cc.cumulative.push_back(total);
      }
      for (double& v : cc.cumulative) v /= total;
      categories_.emplace(c.name, std::move(cc));
    }
    double total = 0.0;
    for (const auto& t : p.templates) {
      total += t.weight;
      template_cdf_.push_back(total);
    }
    for (double& v : template_cdf_) v /= total;
  }

  std::vector<std::string> expand(const EventTemplate& t, Rng& rng) const {
    std::vector<std::string> out;
    out.reserve(t.slots.size());
    for (const auto& slot : t.slots) {
      if (!is_slot(slot)) {
        out.push_back(slot);
        continue;
      }
      const auto& cat = categories_.at(slot.substr(1, slot.size() - 2));
      out.push_back(cat.tokens[draw(cat.cumulative, rng)]);
    }
    return out;
  }

  const EventTemplate& background(Rng& rng) const { return p_.templates[draw(template_cdf_, rng)]; }

 private:
  static std::size_t draw(const std::vector<double>& cdf, Rng& rng) {
    const double u = rng.uniform();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
  }

  const GrammarParams& p_;
  std::map<std::string, CompiledCategory> categories_;
  std::vector<double> template_cdf_;
};

}  // namespace

std::size_t GrammarParams::token_inventory() const {
  std::set<std::string> literals;
  std::size_t from_categories = 0;
  for (const auto& c : categories) from_categories += c.size;
  for (const auto* list : {&templates}) {
    for (const auto& t : *list) {
      for (const auto& s : t.slots) {
        if (!is_slot(s)) literals.insert(s);
      }
    }
  }
  for (const auto* t : {&trigger_a, &trigger_b}) {
    for (const auto& s : t->slots) {
      if (!is_slot(s)) literals.insert(s);
    }
  }
  return from_categories + literals.size();
}

void GrammarParams::validate() const {
  if (templates.empty()) throw ConfigError("grammar has no event templates");
  std::set<std::string> names;
  for (const auto& c : categories) {
    if (c.size == 0) throw ConfigError("token category '" + c.name + "' is empty");
    if (!names.insert(c.name).second) throw ConfigError("duplicate token category '" + c.name + "'");
  }
  auto check_template = [&](const EventTemplate& t) {
    if (t.slots.empty()) throw ConfigError("event template '" + t.name + "' has no slots");
    if (!(t.weight > 0.0)) throw ConfigError("event template '" + t.name + "' needs a positive weight");
    for (const auto& s : t.slots) {
      if (is_slot(s) && !names.count(s.substr(1, s.size() - 2))) {
        throw ConfigError("event template '" + t.name + "' references unknown category " + s);
      }
      if (!is_slot(s) && (s == rule_token_a || s == rule_token_b) && &t != &trigger_a && &t != &trigger_b) {
        throw ConfigError("background template '" + t.name + "' emits a rule token");
      }
    }
  };
  for (const auto& t : templates) check_template(t);
  check_template(trigger_a);
  check_template(trigger_b);
  auto contains = [](const EventTemplate& t, const std::string& tok) {
    return std::find(t.slots.begin(), t.slots.end(), tok) != t.slots.end();
  };
  if (rule_token_a.empty() || rule_token_b.empty() || !contains(trigger_a, rule_token_a) ||
      !contains(trigger_b, rule_token_b)) {
    throw ConfigError("each trigger template must contain its rule token");
  }
  if (min_len < trigger_a.slots.size() + trigger_b.slots.size() + 1 || max_len < min_len) {
    throw ConfigError("record length range [" + std::to_string(min_len) + ", " + std::to_string(max_len) +
                      "] cannot hold both trigger events");
  }
  if (!(label_noise >= 0.0 && label_noise < 0.5)) throw ConfigError("label_noise must lie in [0, 0.5)");
  if (!(prevalence >= label_noise && prevalence <= 1.0 - label_noise)) {
    throw ConfigError("prevalence must lie in [label_noise, 1 - label_noise]");
  }
  if (!(decoy_rate >= 0.0 && decoy_rate <= 1.0)) throw ConfigError("decoy_rate must lie in [0, 1]");
}

std::vector<Record> generate_corpus(std::uint64_t seed, std::size_t n_patients, const GrammarParams& params) {
  params.validate();
  if (n_patients < 2) throw ConfigError("gen_synthetic_corpus: need at least 2 patients");
  const Grammar grammar(params);
  // Solve q(1-e) + (1-q)e = prevalence for the rule-positive rate q.
  const double rule_rate = (params.prevalence - params.label_noise) / (1.0 - 2.0 * params.label_noise);

  std::vector<Record> records;
  records.reserve(n_patients);
  for (std::size_t i = 0; i < n_patients; ++i) {
    Rng rng = Rng::stream(seed, {0xC0, i});
    const std::size_t target = params.min_len + rng.below(params.max_len - params.min_len + 1);
    const bool positive = rng.bernoulli(rule_rate);

    std::vector<std::vector<std::string>> triggers;
    if (positive) {
      triggers.push_back(grammar.expand(params.trigger_a, rng));
      triggers.push_back(grammar.expand(params.trigger_b, rng));
    } else if (rng.bernoulli(params.decoy_rate)) {
      triggers.push_back(grammar.expand(rng.bernoulli(0.5) ? params.trigger_a : params.trigger_b, rng));
    }
    std::size_t budget = target;
    for (const auto& t : triggers) budget -= t.size();

    std::vector<std::vector<std::string>> events;
    std::size_t used = 0;
    while (used < budget) {
      auto ev = grammar.expand(grammar.background(rng), rng);
      if (used + ev.size() > budget) ev.resize(budget - used);
      used += ev.size();
      events.push_back(std::move(ev));
    }
    for (auto& t : triggers) {
      const std::size_t pos = rng.below(events.size() + 1);
      events.insert(events.begin() + static_cast<std::ptrdiff_t>(pos), std::move(t));
    }

    Record rec;
    for (auto& ev : events) {
      for (auto& tok : ev) rec.tokens.push_back(std::move(tok));
    }
    const bool flip = rng.bernoulli(params.label_noise);
    rec.label = (positive != flip) ? 1 : 0;
    records.push_back(std::move(rec));
  }
  return records;
}

bool planted_rule(std::span<const std::string> tokens, const GrammarParams& grammar) {
  bool a = false, b = false;
  for (const auto& t : tokens) {
    a = a || t == grammar.rule_token_a;
    b = b || t == grammar.rule_token_b;
  }
  return a && b;
}

std::string format_record(const Record& record) {
  std::string line = std::to_string(record.label);
  line.push_back('\t');
  for (std::size_t i = 0; i < record.tokens.size(); ++i) {
    if (i) line.push_back(' ');
    line += record.tokens[i];
  }
  return line;
}

Record parse_record(std::string_view line) {
  const auto tab = line.find('\t');
  if (tab == std::string_view::npos) throw ConfigError("corpus line lacks a tab separator");
  const std::string label(line.substr(0, tab));
  Record rec;
  if (label == "0") {
    rec.label = 0;
  } else if (label == "1") {
    rec.label = 1;
  } else {
    throw ConfigError("corpus label must be 0 or 1, got '" + label + "'");
  }
  rec.tokens = tokenize(line.substr(tab + 1));
  return rec;
}

void write_corpus(const std::filesystem::path& path, std::span<const Record> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& r : records) out << format_record(r) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<Record> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<Record> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      records.push_back(parse_record(line));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return records;
}

std::vector<std::string> corpus_lines(std::span<const Record> records) {
  std::vector<std::string> lines;
  lines.reserve(records.size());
  for (const auto& r : records) {
    std::string line;
    for (std::size_t i = 0; i < r.tokens.size(); ++i) {
      if (i) line.push_back(' ');
      line += r.tokens[i];
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<EncodedRecord> encode_records(std::span<const Record> records, const Vocabulary& vocab) {
  std::vector<EncodedRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.label, vocab.encode(r.tokens)});
  return out;
}

}  // namespace fednlp::data
