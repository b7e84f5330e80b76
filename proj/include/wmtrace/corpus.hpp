#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace wmtrace {

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;
using ProbVector = Eigen::VectorXd;

inline constexpr std::string_view kUnkToken = "<unk>";

/// Lowercased whitespace split. ASCII whitespace separates tokens; letters in
/// the ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic blocks are folded.
std::vector<std::string> tokenize(std::string_view text);

bool is_valid_utf8(std::string_view text);

/// Ordered set of distinct tokens. Always contains the UNK token.
class Vocabulary {
 public:
  /// Appends UNK if `tokens` does not already contain it.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  TokenId unk_id() const noexcept { return unk_id_; }

  /// Index of `token`, or the UNK id when absent.
  TokenId lookup(std::string_view token) const;
  bool contains(std::string_view token) const;

  TokenSequence encode(std::span<const std::string> tokens) const;
  TokenSequence encode_text(std::string_view text) const { return encode(tokenize(text)); }
  std::string decode(std::span<const TokenId> ids) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId, Hash, std::equal_to<>> index_;
  TokenId unk_id_ = 0;
};

using VocabularyPtr = std::shared_ptr<const Vocabulary>;

/// True when both point at the same vocabulary or at equal token lists.
bool same_vocabulary(const VocabularyPtr& a, const VocabularyPtr& b);
void require_same_vocabulary(const VocabularyPtr& a, const VocabularyPtr& b, std::string_view what);

/// Counts tokens over raw documents; keeps those with count >= min_count,
/// ordered by descending count with lexicographic tie-break, then UNK.
VocabularyPtr build_vocabulary(std::span<const std::string> documents, std::size_t min_count = 1);

class Corpus {
 public:
  Corpus(VocabularyPtr vocabulary, std::vector<TokenSequence> documents);

  static Corpus from_text(VocabularyPtr vocabulary, std::span<const std::string> documents);

  const VocabularyPtr& vocabulary() const noexcept { return vocabulary_; }
  const std::vector<TokenSequence>& documents() const noexcept { return documents_; }
  std::size_t total_tokens() const noexcept { return total_tokens_; }

 private:
  VocabularyPtr vocabulary_;
  std::vector<TokenSequence> documents_;
  std::size_t total_tokens_ = 0;
};

/// Per-token probabilities over a vocabulary; entries in [0,1], sum 1.
class FrequencyTable {
 public:
  FrequencyTable(VocabularyPtr vocabulary, ProbVector freq);

  const VocabularyPtr& vocabulary() const noexcept { return vocabulary_; }
  const ProbVector& freq() const noexcept { return freq_; }
  double operator[](TokenId id) const { return freq_(id); }

 private:
  VocabularyPtr vocabulary_;
  ProbVector freq_;
};

/// Count(w) / total over the corpus.
FrequencyTable estimate_frequency(const Corpus& corpus);

/// One document per line. Trailing '\r' is stripped.
std::vector<std::string> read_lines(const std::string& path);

nlohmann::json to_json(const FrequencyTable& table);
FrequencyTable frequency_table_from_json(const nlohmann::json& j);
nlohmann::json vocabulary_to_json(const Vocabulary& vocabulary);
VocabularyPtr vocabulary_from_json(const nlohmann::json& j);

}  // namespace wmtrace
