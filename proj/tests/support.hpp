#pragma once

// Fixtures shared by the unit and acceptance suites.

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "wmtrace/harness.hpp"

namespace wmtrace::testing {

/// Vocabulary t00..t(n-2) plus UNK: n tokens in total.
inline VocabularyPtr numbered_vocabulary(std::size_t n) {
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "t%02zu", i);
    tokens.emplace_back(buf);
  }
  return std::make_shared<const Vocabulary>(std::move(tokens));
}

/// Unigram model that is exactly uniform: every token counted once.
inline NGramModelPtr uniform_unigram(const VocabularyPtr& vocab) {
  NGramModel model(vocab, 1, 0.1);
  for (std::size_t i = 0; i < vocab->size(); ++i) model.add_count({}, static_cast<TokenId>(i));
  return std::make_shared<const NGramModel>(std::move(model));
}

/// Unigram model from raw counts. Smoothing still applies, so compare against
/// the model's own next_distribution rather than the raw ratios.
inline NGramModelPtr unigram_from_counts(const VocabularyPtr& vocab, const std::vector<std::uint64_t>& counts) {
  NGramModel model(vocab, 1, 0.1);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0) model.add_count({}, static_cast<TokenId>(i), counts[i]);
  }
  return std::make_shared<const NGramModel>(std::move(model));
}

/// Watermark bundle over a uniform |V|-token unigram base.
inline WatermarkBundle uniform_bundle(std::size_t vocab_size, double sigma, std::uint64_t seed) {
  auto base = uniform_unigram(numbered_vocabulary(vocab_size));
  const ProbVector uniform = base->next_distribution({});
  return make_bundle(base, FrequencyTable(base->vocabulary(), uniform), WatermarkKey(seed, sigma),
                     kDefaultFloorEpsilon, FrequencySource::ModelGenerated);
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("wmtrace_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::FILE* f = std::fopen(p.string().c_str(), "wb");
  std::fwrite(content.data(), 1, content.size(), f);
  std::fclose(f);
}

}  // namespace wmtrace::testing
