#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "fyseq/errors.hpp"

namespace fyseq {

// Token inventory with reserved control symbols at fixed indices. Data tokens
// are appended in first-occurrence order, so identical corpora always produce
// identical vocabularies.
class Vocabulary {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kPad = 2;

  Vocabulary() {
    add_unchecked("<bos>");
    add_unchecked("<eos>");
    add_unchecked("<pad>");
  }

  int add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    return add_unchecked(token);
  }

  int index_of(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) throw UnknownToken("token not in vocabulary: " + token);
    return it->second;
  }

  bool contains(const std::string& token) const { return index_.count(token) != 0; }

  const std::string& token(int index) const {
    if (index < 0 || static_cast<std::size_t>(index) >= tokens_.size())
      throw UnknownToken("token index out of range: " + std::to_string(index));
    return tokens_[static_cast<std::size_t>(index)];
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  static bool is_reserved_string(const std::string& token) {
    return token == "<bos>" || token == "<eos>" || token == "<pad>";
  }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  int add_unchecked(const std::string& token) {
    const int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    index_.emplace(token, id);
    return id;
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// One training example: raw source indices and an EOS-terminated target.
struct SequencePair {
  std::vector<int> source;
  std::vector<int> target;
};

inline void validate_pair(const SequencePair& pair) {
  if (pair.source.empty()) throw std::invalid_argument("source sequence must be nonempty");
  if (pair.target.empty() || pair.target.back() != Vocabulary::kEos)
    throw std::invalid_argument("target sequence must end with <eos>");
  for (int t : pair.target)
    if (t == Vocabulary::kPad) throw std::invalid_argument("target sequence must not contain <pad>");
}

}  // namespace fyseq
