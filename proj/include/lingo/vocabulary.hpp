#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lingo {

using TokenId = std::size_t;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kBosToken = "<bos>";
inline constexpr std::string_view kEosToken = "<eos>";
inline constexpr std::string_view kSilenceToken = ".";

// Token <-> id bijection shared by teacher and learner.
class Vocabulary {
 public:
  // tokens must contain <pad>, <bos> and <eos>, each exactly once.
  explicit Vocabulary(std::vector<std::string> tokens);

  // Specials, ".", function words, directions, then the object lexicon.
  static Vocabulary for_objects(const std::vector<std::string>& objects);

  TokenId id(std::string_view token) const;  // throws VocabularyError
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  TokenId pad() const { return pad_; }
  TokenId bos() const { return bos_; }
  TokenId eos() const { return eos_; }
  // Tokens that may appear in generated output (everything but <bos>, <pad>).
  bool generatable(TokenId id) const { return id != bos_ && id != pad_ && id < tokens_.size(); }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId pad_ = 0, bos_ = 0, eos_ = 0;
};

// Token ids of one sentence; always terminated by <eos>.
struct Utterance {
  std::vector<TokenId> tokens;
  std::string surface;

  // Whitespace-separated words; unknown words throw VocabularyError.
  static Utterance parse(const Vocabulary& vocab, std::string_view text);
  // Accepts ids with or without a trailing <eos>.
  static Utterance from_ids(const Vocabulary& vocab, std::vector<TokenId> ids);

  std::size_t content_length() const { return tokens.empty() ? 0 : tokens.size() - 1; }
  bool operator==(const Utterance& other) const { return tokens == other.tokens; }
};

std::vector<std::string> split_words(std::string_view text);

}  // namespace lingo
