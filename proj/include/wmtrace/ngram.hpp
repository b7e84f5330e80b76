#pragma once

#include <concepts>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "wmtrace/corpus.hpp"
#include "wmtrace/random.hpp"
#include "wmtrace/watermark.hpp"

namespace wmtrace {

inline constexpr double kBackoffFactor = 0.4;
inline constexpr double kDefaultSmoothingAlpha = 0.1;

/// Autoregressive n-gram model with stupid backoff.
///
/// The order-1 level is the additively smoothed unigram (c + alpha) / (N + alpha V),
/// which is strictly positive. At a seen context h of length k, an observed
/// successor w scores c(h, w) / c(h) and an unobserved one scores
/// kBackoffFactor * P(w | h'), where h' drops the oldest token; the scores are
/// then renormalized. An unseen context falls back to P(. | h') unchanged.
class NGramModel {
 public:
  NGramModel(VocabularyPtr vocabulary, int order, double smoothing_alpha);

  const VocabularyPtr& vocabulary() const noexcept { return vocabulary_; }
  int order() const noexcept { return order_; }
  double smoothing_alpha() const noexcept { return alpha_; }
  std::size_t context_length() const noexcept { return static_cast<std::size_t>(order_ - 1); }

  ProbVector next_distribution(std::span<const TokenId> context) const;

  /// Adds `count` observations of `token` after `context`, where
  /// context.size() < order. Training and deserialization both go through here.
  void add_count(std::span<const TokenId> context, TokenId token, std::uint64_t count = 1);

  std::uint64_t context_total(std::span<const TokenId> context) const;

  nlohmann::json to_json() const;
  static NGramModel from_json(const nlohmann::json& j);

 private:
  struct KeyHash {
    std::size_t operator()(const std::vector<TokenId>& key) const noexcept;
  };
  struct ContextStats {
    std::unordered_map<TokenId, std::uint64_t> successors;
    std::uint64_t total = 0;
  };
  using Level = std::unordered_map<std::vector<TokenId>, ContextStats, KeyHash>;

  ProbVector distribution_at(std::span<const TokenId> history) const;

  VocabularyPtr vocabulary_;
  int order_;
  double alpha_;
  std::vector<Level> levels_;  // levels_[k] holds contexts of length k
};

using NGramModelPtr = std::shared_ptr<const NGramModel>;
using ReweightTablePtr = std::shared_ptr<const ReweightTable>;

/// Base model whose every step distribution is reweighted by a ratio table.
class WatermarkedModel {
 public:
  WatermarkedModel(NGramModelPtr base, ReweightTablePtr reweight);

  const VocabularyPtr& vocabulary() const noexcept { return base_->vocabulary(); }
  const NGramModel& base() const noexcept { return *base_; }
  const NGramModelPtr& base_ptr() const noexcept { return base_; }
  const ReweightTable& reweight_table() const noexcept { return *reweight_; }
  std::size_t context_length() const noexcept { return base_->context_length(); }

  ProbVector next_distribution(std::span<const TokenId> context) const {
    return apply_watermark(base_->next_distribution(context), *reweight_);
  }

 private:
  NGramModelPtr base_;
  ReweightTablePtr reweight_;
};

template <typename M>
concept NextTokenModel = requires(const M& m, std::span<const TokenId> ctx) {
  { m.next_distribution(ctx) } -> std::convertible_to<ProbVector>;
  { m.vocabulary() } -> std::convertible_to<const VocabularyPtr&>;
  { m.context_length() } -> std::convertible_to<std::size_t>;
};

class GenerationConfig {
 public:
  GenerationConfig(std::size_t max_tokens, std::uint64_t rng_seed, std::optional<TokenId> stop_token = std::nullopt);

  std::size_t max_tokens() const noexcept { return max_tokens_; }
  std::uint64_t rng_seed() const noexcept { return rng_seed_; }
  const std::optional<TokenId>& stop_token() const noexcept { return stop_token_; }

  GenerationConfig with_seed(std::uint64_t seed) const { return {max_tokens_, seed, stop_token_}; }

 private:
  std::size_t max_tokens_;
  std::uint64_t rng_seed_;
  std::optional<TokenId> stop_token_;
};

/// The trailing context window a model conditions on.
inline std::span<const TokenId> context_window(std::span<const TokenId> history, std::size_t length) {
  return history.size() <= length ? history : history.last(length);
}

/// Ancestral sampling. Returns only the newly generated tokens; the stop
/// token, when hit, is included as the last one.
template <NextTokenModel Model>
TokenSequence generate(const Model& model, const GenerationConfig& config, std::span<const TokenId> prompt = {}) {
  Rng rng(config.rng_seed());
  TokenSequence history(prompt.begin(), prompt.end());
  history.reserve(prompt.size() + config.max_tokens());
  const std::size_t window = model.context_length();
  for (std::size_t i = 0; i < config.max_tokens(); ++i) {
    const ProbVector dist = model.next_distribution(context_window(history, window));
    const auto token = static_cast<TokenId>(rng.categorical(dist));
    history.push_back(token);
    if (config.stop_token() && *config.stop_token() == token) break;
  }
  return TokenSequence(history.begin() + static_cast<std::ptrdiff_t>(prompt.size()), history.end());
}

/// Maximum-likelihood counts for all orders 1..order over every document.
NGramModel train_ngram(const Corpus& corpus, int order, double smoothing_alpha = kDefaultSmoothingAlpha);

/// Mean of the model's next-token distribution over every position of a
/// corpus: the model's token frequency measured on that dataset.
template <NextTokenModel Model>
FrequencyTable model_frequency(const Model& model, const Corpus& corpus);

inline constexpr std::size_t kMinQueryTokens = 1000;

/// Generates `query_tokens` of teacher text, in documents of at most
/// config.max_tokens, and trains a fresh student n-gram on it.
NGramModel simulate_extraction(const WatermarkedModel& teacher, int student_order, std::size_t query_tokens,
                               const GenerationConfig& config, double smoothing_alpha = kDefaultSmoothingAlpha);

/// Average per-context KL(teacher || student) over teacher-sampled contexts.
template <NextTokenModel Teacher, NextTokenModel Student>
double extraction_gap(const Teacher& teacher, const Student& student, std::size_t probe_contexts,
                      std::uint64_t rng_seed) {
  require_same_vocabulary(teacher.vocabulary(), student.vocabulary(), "extraction_gap: vocabulary mismatch");
  if (probe_contexts == 0) throw Error(ErrorKind::InvalidArgument, "probe_contexts must be >= 1");
  const TokenSequence probe = generate(teacher, GenerationConfig(probe_contexts, rng_seed));
  const std::span<const TokenId> all(probe);
  const std::size_t window = std::max(teacher.context_length(), student.context_length());
  double total = 0.0;
  for (std::size_t t = 0; t < probe.size(); ++t) {
    const auto history = context_window(all.first(t), window);
    total += kl_divergence(teacher.next_distribution(context_window(history, teacher.context_length())),
                           student.next_distribution(context_window(history, student.context_length())));
  }
  return total / static_cast<double>(probe.size());
}

// --- template definitions ---------------------------------------------------

template <NextTokenModel Model>
FrequencyTable model_frequency(const Model& model, const Corpus& corpus) {
  require_same_vocabulary(model.vocabulary(), corpus.vocabulary(), "model_frequency: vocabulary mismatch");
  if (corpus.total_tokens() == 0) throw Error(ErrorKind::EmptyCorpus, "corpus has no tokens");
  struct Hash {
    std::size_t operator()(const std::vector<TokenId>& v) const noexcept {
      std::size_t h = v.size();
      for (TokenId t : v) h = static_cast<std::size_t>(splitmix64(h ^ static_cast<std::uint64_t>(t)));
      return h;
    }
  };
  // Group positions by context so each distinct context is evaluated once.
  std::unordered_map<std::vector<TokenId>, std::uint64_t, Hash> context_counts;
  std::vector<std::vector<TokenId>> first_seen;
  const std::size_t window = model.context_length();
  for (const auto& doc : corpus.documents()) {
    const std::span<const TokenId> all(doc);
    for (std::size_t t = 0; t < doc.size(); ++t) {
      auto ctx = context_window(all.first(t), window);
      std::vector<TokenId> key(ctx.begin(), ctx.end());
      auto [it, inserted] = context_counts.try_emplace(key, 0);
      if (inserted) first_seen.push_back(std::move(key));
      ++it->second;
    }
  }
  ProbVector acc = ProbVector::Zero(static_cast<Eigen::Index>(model.vocabulary()->size()));
  for (const auto& ctx : first_seen) {
    acc += static_cast<double>(context_counts.at(ctx)) * model.next_distribution(ctx);
  }
  acc /= acc.sum();
  return FrequencyTable(model.vocabulary(), std::move(acc));
}

}  // namespace wmtrace
