#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fednlp::data {

inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kUnkId = 1;
inline constexpr std::int32_t kMaskId = 2;
inline constexpr std::int32_t kClsId = 3;
inline constexpr std::int32_t kFirstTokenId = 4;
inline constexpr std::size_t kReservedCount = 4;

/// Whitespace split with ASCII lowercasing.
std::vector<std::string> tokenize(std::string_view line);

/// Token <-> id map with four reserved ids (pad, unk, mask, cls). Regular
/// tokens are numbered from 4 by descending frequency, ties broken
/// lexicographically.
class Vocabulary {
 public:
  /// Keeps the `max_size - 4` most frequent tokens of `lines`.
  static Vocabulary build(std::span<const std::string> lines, std::size_t max_size);

  /// Regular tokens in id order (first element gets id 4).
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return kReservedCount + tokens_.size(); }

  /// Id of `token`, or the unk id when it is not in the vocabulary.
  std::int32_t id(std::string_view token) const;
  const std::string& token(std::int32_t id) const;

  std::vector<std::int32_t> encode(std::string_view line) const;
  std::vector<std::int32_t> encode(std::span<const std::string> tokens) const;

  const std::vector<std::string>& tokens() const { return tokens_; }

  /// One token per line; line i (0-based) holds id i + 4.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

}  // namespace fednlp::data
