#include "wmtrace/watermark.hpp"

#include <string>

#include "wmtrace/random.hpp"

namespace wmtrace {

ProbVector floor_and_normalize(const ProbVector& v, double floor) {
  ProbVector out = v.cwiseMax(floor);
  return out / out.sum();
}

WatermarkKey::WatermarkKey(std::uint64_t seed_, double sigma_) : seed(seed_), sigma(sigma_) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorKind::InvalidArgument, "watermark sigma must be finite and > 0");
  }
}

nlohmann::json to_json(const WatermarkKey& key) {
  return {{"version", 1}, {"seed", std::to_string(key.seed)}, {"sigma", key.sigma}};
}

WatermarkKey watermark_key_from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != 1) throw Error(ErrorKind::Parse, "unsupported watermark key version");
  const auto seed_text = j.at("seed").get<std::string>();
  std::size_t used = 0;
  std::uint64_t seed = 0;
  try {
    seed = std::stoull(seed_text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != seed_text.size() || seed_text.empty() || seed_text[0] == '-') {
    throw Error(ErrorKind::Parse, "watermark key seed is not an unsigned 64-bit integer: '" + seed_text + "'");
  }
  return WatermarkKey(seed, j.at("sigma").get<double>());
}

NoisedFrequencyTable::NoisedFrequencyTable(FrequencyTable base, ProbVector noised, WatermarkKey key,
                                           double floor_epsilon)
    : base_(std::move(base)), noised_(std::move(noised)), key_(key), floor_epsilon_(floor_epsilon) {
  if (noised_.size() != base_.freq().size()) {
    throw Error(ErrorKind::VocabularyMismatch, "noised vector length differs from base table");
  }
}

NoisedFrequencyTable noise_frequency(const FrequencyTable& base, const WatermarkKey& key, double floor_epsilon) {
  if (!(key.sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "watermark sigma must be > 0");
  if (!(floor_epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "floor_epsilon must be > 0");
  Rng rng(key.seed);
  const auto& f = base.freq();
  ProbVector noised(f.size());
  bool any_above_floor = false;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const double value = f(i) + key.sigma * rng.gaussian();
    if (value > floor_epsilon) any_above_floor = true;
    noised(i) = std::max(value, floor_epsilon);
  }
  if (!any_above_floor) {
    throw Error(ErrorKind::DegenerateNoise, "every noised frequency fell to the floor (sigma too large)");
  }
  noised /= noised.sum();
  return NoisedFrequencyTable(base, std::move(noised), key, floor_epsilon);
}

ReweightTable::ReweightTable(VocabularyPtr vocabulary, ProbVector ratio, double floor_epsilon)
    : vocabulary_(std::move(vocabulary)), ratio_(std::move(ratio)), floor_epsilon_(floor_epsilon) {
  if (!vocabulary_ || static_cast<std::size_t>(ratio_.size()) != vocabulary_->size()) {
    throw Error(ErrorKind::VocabularyMismatch, "ratio table length differs from vocabulary size");
  }
  if (!ratio_.allFinite() || (ratio_.array() <= 0.0).any()) {
    throw Error(ErrorKind::InvalidArgument, "reweight ratios must be finite and > 0");
  }
  identity_ = (ratio_.array() == 1.0).all();
}

ReweightTable build_reweight_table(const ProbVector& target, const FrequencyTable& model_freq, double floor_epsilon) {
  if (!(floor_epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "floor_epsilon must be > 0");
  if (target.size() != model_freq.freq().size()) {
    throw Error(ErrorKind::VocabularyMismatch, "target and model frequency differ in length");
  }
  ProbVector ratio = target.cwiseMax(floor_epsilon).cwiseQuotient(model_freq.freq().cwiseMax(floor_epsilon));
  return ReweightTable(model_freq.vocabulary(), std::move(ratio), floor_epsilon);
}

ReweightTable build_reweight_table(const NoisedFrequencyTable& noised, const FrequencyTable& model_freq,
                                   double floor_epsilon) {
  require_same_vocabulary(noised.vocabulary(), model_freq.vocabulary(),
                          "noised table and model frequency use different vocabularies");
  return build_reweight_table(noised.noised(), model_freq, floor_epsilon);
}

ProbVector apply_watermark(const ProbVector& step_distribution, const ReweightTable& table) {
  if (table.is_identity()) {
    if (step_distribution.size() != table.ratio().size()) {
      throw Error(ErrorKind::VocabularyMismatch, "step distribution and ratio table differ in length");
    }
    return step_distribution;
  }
  return reweight(step_distribution, table.ratio());
}

double watermark_strength(const FrequencyTable& base_freq, const NoisedFrequencyTable& noised) {
  require_same_vocabulary(base_freq.vocabulary(), noised.vocabulary(),
                          "strength: base and noised tables use different vocabularies");
  const ProbVector& base = base_freq.freq();
  // The noised table is floored, so a zero in the base would make the KL
  // infinite. Compare against the base as the reweight table sees it.
  if (base.minCoeff() < noised.floor_epsilon()) {
    return kl_divergence(noised.noised(), floor_and_normalize(base, noised.floor_epsilon()));
  }
  return kl_divergence(noised.noised(), base);
}

}  // namespace wmtrace
