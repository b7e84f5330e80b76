#include "wmtrace/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "wmtrace/error.hpp"

namespace wmtrace {
namespace {

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\v' || c == '\f' || c == '\r';
}

char32_t lower_codepoint(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  // Latin-1 supplement, excluding the multiplication sign.
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  // Latin Extended-A: even/odd case pairs, with the 0x138..0x148 block shifted.
  if (c >= 0x100 && c <= 0x137 && c != 0x130) return c | 1U;
  if (c >= 0x139 && c <= 0x148) return (c % 2 == 1) ? c + 1 : c;
  if (c >= 0x14A && c <= 0x177) return c | 1U;
  if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return c + 32;  // Greek
  if (c >= 0x410 && c <= 0x42F) return c + 32;                // Cyrillic
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  return c;
}

// Decodes one UTF-8 sequence at `pos`; returns 0 bytes consumed on error.
std::size_t decode_utf8(std::string_view s, std::size_t pos, char32_t& out) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  std::size_t len = 0;
  char32_t cp = 0;
  if (b0 < 0x80) {
    out = b0;
    return 1;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return 0;
  }
  if (pos + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[pos + k]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
  out = cp;
  return len;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string lowercase(std::string_view word) {
  std::string out;
  out.reserve(word.size());
  std::size_t pos = 0;
  while (pos < word.size()) {
    char32_t cp = 0;
    const std::size_t n = decode_utf8(word, pos, cp);
    if (n == 0) {
      // Invalid byte: pass through untouched.
      out.push_back(word[pos]);
      ++pos;
      continue;
    }
    append_utf8(out, lower_codepoint(cp));
    pos += n;
  }
  return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && is_ascii_space(static_cast<unsigned char>(text[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < text.size() && !is_ascii_space(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos > start) tokens.push_back(lowercase(text.substr(start, pos - start)));
  }
  return tokens;
}

bool is_valid_utf8(std::string_view text) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    char32_t cp = 0;
    const std::size_t n = decode_utf8(text, pos, cp);
    if (n == 0) return false;
    pos += n;
  }
  return true;
}

// --- Vocabulary -------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (std::find(tokens_.begin(), tokens_.end(), kUnkToken) == tokens_.end()) {
    tokens_.emplace_back(kUnkToken);
  }
  if (tokens_.size() < 2) {
    throw Error(ErrorKind::InvalidVocabulary, "vocabulary needs at least two tokens");
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) {
      throw Error(ErrorKind::InvalidVocabulary, "empty token at index " + std::to_string(i));
    }
    for (char c : tokens_[i]) {
      if (is_ascii_space(static_cast<unsigned char>(c))) {
        throw Error(ErrorKind::InvalidVocabulary, "token at index " + std::to_string(i) + " contains whitespace");
      }
    }
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted) throw Error(ErrorKind::InvalidVocabulary, "duplicate token '" + tokens_[i] + "'");
  }
  unk_id_ = index_.find(kUnkToken)->second;
}

TokenId Vocabulary::lookup(std::string_view token) const {
  auto it = index_.find(token);
  return it == index_.end() ? unk_id_ : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.find(token) != index_.end(); }

TokenSequence Vocabulary::encode(std::span<const std::string> tokens) const {
  TokenSequence ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(lookup(t));
  return ids;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += token(ids[i]);
  }
  return out;
}

bool same_vocabulary(const VocabularyPtr& a, const VocabularyPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

void require_same_vocabulary(const VocabularyPtr& a, const VocabularyPtr& b, std::string_view what) {
  if (!same_vocabulary(a, b)) {
    throw Error(ErrorKind::VocabularyMismatch, std::string(what));
  }
}

VocabularyPtr build_vocabulary(std::span<const std::string> documents, std::size_t min_count) {
  if (documents.empty()) throw Error(ErrorKind::EmptyCorpus, "no documents");
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : documents) {
    for (auto& tok : tokenize(doc)) {
      if (tok != kUnkToken) ++counts[std::move(tok)];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= std::max<std::size_t>(min_count, 1)) kept.emplace_back(tok, n);
  }
  if (kept.empty()) {
    throw Error(ErrorKind::EmptyCorpus, "no token reaches min_count=" + std::to_string(min_count));
  }
  // counts is a std::map, so a stable sort on count keeps lexicographic ties.
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size() + 1);
  for (auto& [tok, n] : kept) tokens.push_back(std::move(tok));
  tokens.emplace_back(kUnkToken);
  return std::make_shared<const Vocabulary>(std::move(tokens));
}

// --- Corpus -----------------------------------------------------------------

Corpus::Corpus(VocabularyPtr vocabulary, std::vector<TokenSequence> documents)
    : vocabulary_(std::move(vocabulary)), documents_(std::move(documents)) {
  if (!vocabulary_) throw Error(ErrorKind::InvalidArgument, "corpus without vocabulary");
  const auto v = static_cast<TokenId>(vocabulary_->size());
  for (const auto& doc : documents_) {
    for (TokenId id : doc) {
      if (id < 0 || id >= v) {
        throw Error(ErrorKind::InvalidArgument, "token id " + std::to_string(id) + " out of range");
      }
    }
    total_tokens_ += doc.size();
  }
}

Corpus Corpus::from_text(VocabularyPtr vocabulary, std::span<const std::string> documents) {
  std::vector<TokenSequence> docs;
  docs.reserve(documents.size());
  for (const auto& d : documents) docs.push_back(vocabulary->encode_text(d));
  return Corpus(std::move(vocabulary), std::move(docs));
}

// --- FrequencyTable ---------------------------------------------------------

FrequencyTable::FrequencyTable(VocabularyPtr vocabulary, ProbVector freq)
    : vocabulary_(std::move(vocabulary)), freq_(std::move(freq)) {
  if (!vocabulary_) throw Error(ErrorKind::InvalidArgument, "frequency table without vocabulary");
  if (static_cast<std::size_t>(freq_.size()) != vocabulary_->size()) {
    throw Error(ErrorKind::VocabularyMismatch, "frequency vector length " + std::to_string(freq_.size()) +
                                                   " != vocabulary size " + std::to_string(vocabulary_->size()));
  }
  if (!freq_.allFinite() || (freq_.array() < 0.0).any() || (freq_.array() > 1.0).any()) {
    throw Error(ErrorKind::InvalidArgument, "frequency entries must lie in [0, 1]");
  }
  if (std::abs(freq_.sum() - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidArgument, "frequency entries must sum to 1");
  }
}

FrequencyTable estimate_frequency(const Corpus& corpus) {
  if (corpus.total_tokens() == 0) throw Error(ErrorKind::EmptyCorpus, "corpus has no tokens");
  const auto v = static_cast<Eigen::Index>(corpus.vocabulary()->size());
  Eigen::Matrix<std::uint64_t, Eigen::Dynamic, 1> counts = Eigen::Matrix<std::uint64_t, Eigen::Dynamic, 1>::Zero(v);
  for (const auto& doc : corpus.documents()) {
    for (TokenId id : doc) ++counts(id);
  }
  ProbVector freq = counts.cast<double>() / static_cast<double>(corpus.total_tokens());
  return FrequencyTable(corpus.vocabulary(), std::move(freq));
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

// --- serialization ----------------------------------------------------------

nlohmann::json vocabulary_to_json(const Vocabulary& vocabulary) {
  return {{"version", 1}, {"tokens", vocabulary.tokens()}};
}

VocabularyPtr vocabulary_from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != 1) throw Error(ErrorKind::Parse, "unsupported vocabulary version");
  return std::make_shared<const Vocabulary>(j.at("tokens").get<std::vector<std::string>>());
}

nlohmann::json to_json(const FrequencyTable& table) {
  std::vector<double> freq(table.freq().data(), table.freq().data() + table.freq().size());
  return {{"version", 1}, {"tokens", table.vocabulary()->tokens()}, {"freq", freq}};
}

FrequencyTable frequency_table_from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != 1) throw Error(ErrorKind::Parse, "unsupported frequency table version");
  auto vocab = std::make_shared<const Vocabulary>(j.at("tokens").get<std::vector<std::string>>());
  const auto values = j.at("freq").get<std::vector<double>>();
  if (values.size() != vocab->size()) throw Error(ErrorKind::Parse, "tokens and freq arrays differ in length");
  return FrequencyTable(std::move(vocab), Eigen::Map<const ProbVector>(values.data(), values.size()));
}

}  // namespace wmtrace
