#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "formfactor/candgen.hpp"
#include "formfactor/errors.hpp"

namespace formfactor {

// Lowercased token vocabulary. Index 0 is PAD and 1 is UNK.
class Vocab {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocab() : Vocab(std::vector<std::string>{}) {}

  // `words` excludes the reserved entries; they are stored lowercased.
  explicit Vocab(const std::vector<std::string>& words) {
    add(std::string(kPadToken));
    add(std::string(kUnkToken));
    for (const auto& w : words) {
      if (w == kPadToken || w == kUnkToken) throw InvariantError("vocab: reserved token listed as a word");
      if (!add(text::lower(w))) throw InvariantError("vocab: duplicate token " + w);
    }
  }

  // Restores a vocabulary from its full token list (reserved entries first).
  static Vocab from_tokens(const std::vector<std::string>& tokens) {
    if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken)
      throw InvariantError("vocab: token list must start with <pad>, <unk>");
    return Vocab(std::vector<std::string>(tokens.begin() + 2, tokens.end()));
  }

  std::int32_t lookup(std::string_view token) const {
    auto it = index_.find(text::lower(token));
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(std::string_view token) const { return index_.count(text::lower(token)) != 0; }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(std::int32_t i) const { return tokens_.at(static_cast<std::size_t>(i)); }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  bool add(const std::string& w) {
    if (!index_.emplace(w, static_cast<std::int32_t>(tokens_.size())).second) return false;
    tokens_.push_back(w);
    return true;
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

}  // namespace formfactor
