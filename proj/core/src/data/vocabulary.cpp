#include "fednlp/data/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

#include "fednlp/tensor/errors.hpp"

namespace fednlp::data {

namespace {

const std::string kReservedNames[kReservedCount] = {"[pad]", "[unk]", "[mask]", "[cls]"};

}  // namespace

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : line) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

Vocabulary Vocabulary::build(std::span<const std::string> lines, std::size_t max_size) {
  if (lines.empty()) throw UsageError("build_vocab: empty corpus");
  if (max_size < kReservedCount) throw ConfigError("build_vocab: max_size must be at least 4");
  std::map<std::string, std::size_t> counts;
  for (const auto& line : lines) {
    for (auto& tok : tokenize(line)) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = std::min(ranked.size(), max_size - kReservedCount);
  std::vector<std::string> tokens;
  tokens.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(ranked[i].first);
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary vocab;
  vocab.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < vocab.tokens_.size(); ++i) {
    const auto& tok = vocab.tokens_[i];
    if (tok.empty()) throw ConfigError("vocabulary token must be non-empty");
    if (!vocab.ids_.emplace(tok, static_cast<std::int32_t>(i + kReservedCount)).second) {
      throw ConfigError("duplicate vocabulary token '" + tok + "'");
    }
  }
  return vocab;
}

std::int32_t Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= size()) {
    throw IndexError("vocabulary id " + std::to_string(id) + " outside [0, " + std::to_string(size()) + ")");
  }
  if (id < kFirstTokenId) return kReservedNames[id];
  return tokens_[static_cast<std::size_t>(id - kFirstTokenId)];
}

std::vector<std::int32_t> Vocabulary::encode(std::string_view line) const {
  const auto toks = tokenize(line);
  return encode(toks);
}

std::vector<std::int32_t> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<std::int32_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& tok : tokens_) out << tok << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

}  // namespace fednlp::data
