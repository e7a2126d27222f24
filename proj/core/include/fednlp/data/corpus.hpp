#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fednlp/data/vocabulary.hpp"

namespace fednlp::data {

/// One patient: a token sequence and a binary label (1 = adverse-reaction surrogate).
struct Record {
  std::int32_t label = 0;
  std::vector<std::string> tokens;

  friend bool operator==(const Record&, const Record&) = default;
};

struct EncodedRecord {
  std::int32_t label = 0;
  std::vector<std::int32_t> ids;

  friend bool operator==(const EncodedRecord&, const EncodedRecord&) = default;
};

/// A family of tokens `prefix0000 .. prefix{size-1}` sampled with Zipf weights.
struct TokenCategory {
  std::string name;
  std::string prefix;
  std::size_t size = 0;
  double zipf_exponent = 1.0;
};

/// An event: literal tokens and `{category}` slots, e.g. {"rx", "{drug}", "{dose}"}.
struct EventTemplate {
  std::string name;
  double weight = 1.0;
  std::vector<std::string> slots;
};

/// Probabilistic template grammar for synthetic clinical timelines.
///
/// Records are built from weighted background events up to a length drawn
/// uniformly from [min_len, max_len]. The planted rule labels a record
/// positive iff it contains both `rule_token_a` and `rule_token_b`; those
/// tokens only enter a record through `trigger_a` / `trigger_b`. Negative
/// records carry one trigger as a decoy with probability `decoy_rate`.
/// Labels are then flipped with probability `label_noise`; the rule-positive
/// rate is chosen so that the noisy positive rate equals `prevalence`.
struct GrammarParams {
  std::vector<TokenCategory> categories;
  std::vector<EventTemplate> templates;
  EventTemplate trigger_a;
  EventTemplate trigger_b;
  std::string rule_token_a;
  std::string rule_token_b;
  std::size_t min_len = 16;
  std::size_t max_len = 64;
  double prevalence = 1824.0 / 8638.0;
  double label_noise = 0.05;
  double decoy_rate = 0.3;

  /// Visits, prescriptions, labs, procedures and genotype events, with a
  /// clopidogrel / CYP2C19 loss-of-function co-occurrence as the planted rule.
  static GrammarParams clinical_defaults();

  /// Number of distinct tokens the grammar can emit.
  std::size_t token_inventory() const;

  void validate() const;
};

/// Deterministic synthetic corpus of `n_patients` labeled records.
std::vector<Record> generate_corpus(std::uint64_t seed, std::size_t n_patients, const GrammarParams& grammar);

/// The noise-free label of a token sequence under the planted rule.
bool planted_rule(std::span<const std::string> tokens, const GrammarParams& grammar);

/// `label<TAB>token token ...`
std::string format_record(const Record& record);
Record parse_record(std::string_view line);

void write_corpus(const std::filesystem::path& path, std::span<const Record> records);
std::vector<Record> read_corpus(const std::filesystem::path& path);

/// Space-joined token lines, the input expected by Vocabulary::build.
std::vector<std::string> corpus_lines(std::span<const Record> records);

std::vector<EncodedRecord> encode_records(std::span<const Record> records, const Vocabulary& vocab);

}  // namespace fednlp::data
