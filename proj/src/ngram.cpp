#include "wmtrace/ngram.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace wmtrace {

std::size_t NGramModel::KeyHash::operator()(const std::vector<TokenId>& key) const noexcept {
  std::uint64_t h = key.size();
  for (TokenId t : key) h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(t)));
  return static_cast<std::size_t>(h);
}

NGramModel::NGramModel(VocabularyPtr vocabulary, int order, double smoothing_alpha)
    : vocabulary_(std::move(vocabulary)), order_(order), alpha_(smoothing_alpha) {
  if (!vocabulary_) throw Error(ErrorKind::InvalidArgument, "model without vocabulary");
  if (order_ < 1) throw Error(ErrorKind::InvalidArgument, "n-gram order must be >= 1");
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) {
    throw Error(ErrorKind::InvalidArgument, "smoothing alpha must be finite and > 0");
  }
  levels_.resize(static_cast<std::size_t>(order_));
}

void NGramModel::add_count(std::span<const TokenId> context, TokenId token, std::uint64_t count) {
  if (context.size() >= static_cast<std::size_t>(order_)) {
    throw Error(ErrorKind::InvalidArgument, "context longer than order - 1");
  }
  const auto v = static_cast<TokenId>(vocabulary_->size());
  if (token < 0 || token >= v) throw Error(ErrorKind::InvalidArgument, "token id out of range");
  for (TokenId t : context) {
    if (t < 0 || t >= v) throw Error(ErrorKind::InvalidArgument, "context token id out of range");
  }
  auto& stats = levels_[context.size()][std::vector<TokenId>(context.begin(), context.end())];
  stats.successors[token] += count;
  stats.total += count;
}

std::uint64_t NGramModel::context_total(std::span<const TokenId> context) const {
  if (context.size() >= levels_.size()) return 0;
  const auto& level = levels_[context.size()];
  auto it = level.find(std::vector<TokenId>(context.begin(), context.end()));
  return it == level.end() ? 0 : it->second.total;
}

ProbVector NGramModel::distribution_at(std::span<const TokenId> history) const {
  const auto v = static_cast<Eigen::Index>(vocabulary_->size());
  if (history.empty()) {
    ProbVector dist = ProbVector::Constant(v, alpha_);
    std::uint64_t total = 0;
    const auto& level = levels_[0];
    if (auto it = level.find({}); it != level.end()) {
      for (const auto& [tok, n] : it->second.successors) dist(tok) += static_cast<double>(n);
      total = it->second.total;
    }
    return dist / (static_cast<double>(total) + alpha_ * static_cast<double>(v));
  }
  ProbVector lower = distribution_at(history.subspan(1));
  const auto& level = levels_[history.size()];
  auto it = level.find(std::vector<TokenId>(history.begin(), history.end()));
  if (it == level.end() || it->second.total == 0) return lower;

  ProbVector score = kBackoffFactor * lower;
  const auto total = static_cast<double>(it->second.total);
  for (const auto& [tok, n] : it->second.successors) score(tok) = static_cast<double>(n) / total;
  return score / score.sum();
}

ProbVector NGramModel::next_distribution(std::span<const TokenId> context) const {
  return distribution_at(context_window(context, context_length()));
}

namespace {

std::string join_context(const Vocabulary& vocab, std::span<const TokenId> ctx) {
  return vocab.decode(ctx);
}

}  // namespace

nlohmann::json NGramModel::to_json() const {
  // std::map keys give a byte-stable serialization.
  std::map<std::string, std::map<std::string, std::uint64_t>> counts;
  for (const auto& level : levels_) {
    for (const auto& [ctx, stats] : level) {
      auto& row = counts[join_context(*vocabulary_, ctx)];
      for (const auto& [tok, n] : stats.successors) row[vocabulary_->token(tok)] = n;
    }
  }
  nlohmann::json counts_json = nlohmann::json::object();
  for (const auto& [key, row] : counts) counts_json[key] = row;
  return {{"version", 1},
          {"kind", "ngram"},
          {"order", order_},
          {"alpha", alpha_},
          {"tokens", vocabulary_->tokens()},
          {"counts", std::move(counts_json)}};
}

NGramModel NGramModel::from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != 1) throw Error(ErrorKind::Parse, "unsupported model version");
  if (j.value("kind", std::string("ngram")) != "ngram") throw Error(ErrorKind::Parse, "not an n-gram model file");
  auto vocab = std::make_shared<const Vocabulary>(j.at("tokens").get<std::vector<std::string>>());
  NGramModel model(vocab, j.at("order").get<int>(), j.at("alpha").get<double>());
  auto strict_lookup = [&](const std::string& tok) {
    if (!vocab->contains(tok)) throw Error(ErrorKind::Parse, "model counts reference unknown token '" + tok + "'");
    return vocab->lookup(tok);
  };
  for (const auto& [key, row] : j.at("counts").items()) {
    std::vector<TokenId> ctx;
    std::istringstream words(key);
    for (std::string tok; words >> tok;) ctx.push_back(strict_lookup(tok));
    for (const auto& [tok, n] : row.items()) model.add_count(ctx, strict_lookup(tok), n.get<std::uint64_t>());
  }
  return model;
}

NGramModel train_ngram(const Corpus& corpus, int order, double smoothing_alpha) {
  if (corpus.total_tokens() == 0) throw Error(ErrorKind::EmptyCorpus, "cannot train on an empty corpus");
  NGramModel model(corpus.vocabulary(), order, smoothing_alpha);
  for (const auto& doc : corpus.documents()) {
    const std::span<const TokenId> all(doc);
    for (std::size_t t = 0; t < doc.size(); ++t) {
      const std::size_t max_ctx = std::min<std::size_t>(t, static_cast<std::size_t>(order - 1));
      for (std::size_t k = 0; k <= max_ctx; ++k) model.add_count(all.subspan(t - k, k), doc[t]);
    }
  }
  return model;
}

WatermarkedModel::WatermarkedModel(NGramModelPtr base, ReweightTablePtr reweight)
    : base_(std::move(base)), reweight_(std::move(reweight)) {
  if (!base_ || !reweight_) throw Error(ErrorKind::InvalidArgument, "watermarked model needs base and table");
  require_same_vocabulary(base_->vocabulary(), reweight_->vocabulary(),
                          "base model and reweight table use different vocabularies");
}

GenerationConfig::GenerationConfig(std::size_t max_tokens, std::uint64_t rng_seed, std::optional<TokenId> stop_token)
    : max_tokens_(max_tokens), rng_seed_(rng_seed), stop_token_(stop_token) {
  if (max_tokens_ < 1) throw Error(ErrorKind::InvalidArgument, "max_tokens must be >= 1");
}

NGramModel simulate_extraction(const WatermarkedModel& teacher, int student_order, std::size_t query_tokens,
                               const GenerationConfig& config, double smoothing_alpha) {
  if (query_tokens < kMinQueryTokens) {
    throw Error(ErrorKind::InvalidArgument,
                "query_tokens must be >= " + std::to_string(kMinQueryTokens) + ", got " + std::to_string(query_tokens));
  }
  std::vector<TokenSequence> documents;
  std::size_t produced = 0;
  for (std::uint64_t doc = 0; produced < query_tokens; ++doc) {
    const std::size_t budget = std::min(config.max_tokens(), query_tokens - produced);
    GenerationConfig doc_config(budget, derive_seed(config.rng_seed(), doc), config.stop_token());
    documents.push_back(generate(teacher, doc_config));
    produced += documents.back().size();
  }
  return train_ngram(Corpus(teacher.vocabulary(), std::move(documents)), student_order, smoothing_alpha);
}

}  // namespace wmtrace
