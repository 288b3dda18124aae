#include "lingo/vocabulary.hpp"

#include <sstream>

#include "lingo/errors.hpp"

namespace lingo {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (TokenId i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) {
      throw VocabularyError("duplicate token '" + tokens_[i] + "'");
    }
  }
  auto special = [&](std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw VocabularyError("vocabulary lacks " + std::string(name));
    return it->second;
  };
  pad_ = special(kPadToken);
  bos_ = special(kBosToken);
  eos_ = special(kEosToken);
}

Vocabulary Vocabulary::for_objects(const std::vector<std::string>& objects) {
  std::vector<std::string> tokens = {std::string(kPadToken), std::string(kBosToken),
                                     std::string(kEosToken), std::string(kSilenceToken),
                                     "what", "where", "is", "on", "the", "yes", "no",
                                     "north", "south", "east", "west"};
  tokens.insert(tokens.end(), objects.begin(), objects.end());
  return Vocabulary(std::move(tokens));
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(std::string_view token) const {
  if (auto found = find(token)) return *found;
  throw VocabularyError("unknown token '" + std::string(token) + "'");
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) words.push_back(word);
  return words;
}

Utterance Utterance::parse(const Vocabulary& vocab, std::string_view text) {
  std::vector<TokenId> ids;
  for (const std::string& w : split_words(text)) ids.push_back(vocab.id(w));
  return from_ids(vocab, std::move(ids));
}

Utterance Utterance::from_ids(const Vocabulary& vocab, std::vector<TokenId> ids) {
  Utterance u;
  for (TokenId id : ids) {
    if (id >= vocab.size()) throw VocabularyError("token id " + std::to_string(id) + " out of range");
  }
  if (ids.empty() || ids.back() != vocab.eos()) ids.push_back(vocab.eos());
  for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
    if (!u.surface.empty()) u.surface += ' ';
    u.surface += vocab.token(ids[i]);
  }
  u.tokens = std::move(ids);
  return u;
}

}  // namespace lingo
