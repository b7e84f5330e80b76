#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include <Eigen/Core>
#include <json.hpp>

#include "wmtrace/corpus.hpp"
#include "wmtrace/error.hpp"

namespace wmtrace {

inline constexpr double kDefaultFloorEpsilon = 1e-8;

// ---------------------------------------------------------------------------
// KL divergence and reweighting. Templated on the Eigen expression so that
// long double and extended-precision scalars go through the same code.
// ---------------------------------------------------------------------------

/// KL(p || q) in nats, summed over the support of p.
///
/// Throws AbsoluteContinuityViolation when q vanishes somewhere p does not.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar kl_divergence(const Eigen::MatrixBase<DerivedP>& p,
                                        const Eigen::MatrixBase<DerivedQ>& q) {
  using Scalar = typename DerivedP::Scalar;
  using std::log;
  if (p.size() != q.size()) {
    throw Error(ErrorKind::InvalidArgument, "kl_divergence: length mismatch");
  }
  Scalar acc(0);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Scalar pi = p(i);
    if (!(pi > Scalar(0))) continue;
    const Scalar qi = q(i);
    if (!(qi > Scalar(0))) {
      throw Error(ErrorKind::AbsoluteContinuityViolation,
                  "q vanishes at index " + std::to_string(i) + " where p > 0");
    }
    acc += pi * log(pi / qi);
  }
  // Rounding can leave tiny negatives when p == q.
  return acc < Scalar(0) ? Scalar(0) : acc;
}

/// Reweights a step distribution by per-token ratios and renormalizes.
/// Zero-probability tokens stay at zero.
template <typename DerivedP, typename DerivedR>
Eigen::Matrix<typename DerivedP::Scalar, Eigen::Dynamic, 1> reweight(const Eigen::MatrixBase<DerivedP>& step,
                                                                     const Eigen::MatrixBase<DerivedR>& ratio) {
  using Scalar = typename DerivedP::Scalar;
  if (step.size() != ratio.size()) {
    throw Error(ErrorKind::VocabularyMismatch, "step distribution and ratio table differ in length");
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out = step.cwiseProduct(ratio.template cast<Scalar>());
  const Scalar total = out.sum();
  if (!(total > Scalar(0))) throw Error(ErrorKind::AllZeroMass, "reweighted distribution has no mass");
  out /= total;
  return out;
}

/// Clips entries below `floor` and renormalizes to sum 1.
ProbVector floor_and_normalize(const ProbVector& v, double floor);

// ---------------------------------------------------------------------------
// Keyed noise.
// ---------------------------------------------------------------------------

struct WatermarkKey {
  std::uint64_t seed = 0;
  double sigma = 0.0;

  WatermarkKey() = default;
  WatermarkKey(std::uint64_t seed, double sigma);
};

nlohmann::json to_json(const WatermarkKey& key);
WatermarkKey watermark_key_from_json(const nlohmann::json& j);

/// Noised copy of a base frequency table, regenerable from (base, key).
class NoisedFrequencyTable {
 public:
  NoisedFrequencyTable(FrequencyTable base, ProbVector noised, WatermarkKey key, double floor_epsilon);

  const FrequencyTable& base() const noexcept { return base_; }
  const ProbVector& noised() const noexcept { return noised_; }
  const WatermarkKey& key() const noexcept { return key_; }
  double floor_epsilon() const noexcept { return floor_epsilon_; }
  const VocabularyPtr& vocabulary() const noexcept { return base_.vocabulary(); }

  FrequencyTable as_table() const { return FrequencyTable(vocabulary(), noised_); }

 private:
  FrequencyTable base_;
  ProbVector noised_;
  WatermarkKey key_;
  double floor_epsilon_;
};

/// F(w) + n_w with n_w ~ N(0, sigma^2) drawn in vocabulary order from a
/// generator seeded by key.seed; clipped at floor_epsilon and renormalized.
NoisedFrequencyTable noise_frequency(const FrequencyTable& base, const WatermarkKey& key,
                                     double floor_epsilon = kDefaultFloorEpsilon);

/// Per-token multipliers max(noised, eps) / max(model_freq, eps).
class ReweightTable {
 public:
  ReweightTable(VocabularyPtr vocabulary, ProbVector ratio, double floor_epsilon);

  const VocabularyPtr& vocabulary() const noexcept { return vocabulary_; }
  const ProbVector& ratio() const noexcept { return ratio_; }
  double floor_epsilon() const noexcept { return floor_epsilon_; }
  bool is_identity() const noexcept { return identity_; }

  /// max_i |ln ratio_i|; bounds KL(reweighted || original) at every step.
  double max_abs_log_ratio() const { return ratio_.array().log().abs().maxCoeff(); }

 private:
  VocabularyPtr vocabulary_;
  ProbVector ratio_;
  double floor_epsilon_;
  bool identity_ = false;
};

ReweightTable build_reweight_table(const NoisedFrequencyTable& noised, const FrequencyTable& model_freq,
                                   double floor_epsilon = kDefaultFloorEpsilon);

ReweightTable build_reweight_table(const ProbVector& target, const FrequencyTable& model_freq,
                                   double floor_epsilon = kDefaultFloorEpsilon);

/// Watermarked step distribution: step * ratio, renormalized. An all-ones
/// table returns the input unchanged.
ProbVector apply_watermark(const ProbVector& step_distribution, const ReweightTable& table);

/// Unigram-level strength KL(noised || base_freq) in nats. Base entries below
/// the noise floor are raised to it (and renormalized) first.
double watermark_strength(const FrequencyTable& base_freq, const NoisedFrequencyTable& noised);

}  // namespace wmtrace
