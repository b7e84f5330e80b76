#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "wmtrace/ngram.hpp"

namespace wmtrace {

/// Probabilities are clipped here before logs; each clip is counted.
inline constexpr double kProbabilityFloor = 1e-300;

enum class Decision { Undecided, Watermarked, NotWatermarked };

std::string_view to_string(Decision d);
Decision decision_from_string(std::string_view s);

/// Error ceilings: alpha bounds the false-watermark rate, beta the miss rate.
struct DetectorConfig {
  double alpha = 0.01;
  double beta = 0.01;

  DetectorConfig() = default;
  DetectorConfig(double alpha, double beta);
};

struct DecisionBounds {
  double b1;  // -ln(alpha / (1 - alpha))
  double b2;  // ln((1 - beta) / beta)
};

DecisionBounds bounds_from_rates(const DetectorConfig& config);

struct ExpectedTokens {
  std::uint64_t n1;  // ceil(b1 / KL)
  std::uint64_t n2;  // ceil(b2 / KL)
};

/// Planning sample sizes for a per-token divergence `kl` (nats).
ExpectedTokens expected_tokens(const DetectorConfig& config, double kl);

/// Running log-likelihood-ratio test.
///
/// statistic = sum_t -ln(p_h0 / p_h1). Under the watermarked hypothesis the
/// increments have mean -KL(P_h0 || P_h1), so the statistic drifts down:
/// crossing -b1 decides Watermarked, crossing +b2 decides NotWatermarked.
class SprtState {
 public:
  explicit SprtState(const DetectorConfig& config);

  double statistic() const noexcept { return statistic_; }
  std::uint64_t tokens_seen() const noexcept { return tokens_seen_; }
  double b1() const noexcept { return b1_; }
  double b2() const noexcept { return b2_; }
  Decision decision() const noexcept { return decision_; }
  bool decided() const noexcept { return decision_ != Decision::Undecided; }

  /// Returns the state after observing one token. Throws AlreadyDecided once a
  /// bound has been crossed and InvalidProbability outside (0, 1].
  [[nodiscard]] SprtState update(double p_h0, double p_h1) const;

 private:
  double statistic_ = 0.0;
  std::uint64_t tokens_seen_ = 0;
  double b1_;
  double b2_;
  Decision decision_ = Decision::Undecided;
};

inline SprtState update(const SprtState& state, double p_h0, double p_h1) { return state.update(p_h0, p_h1); }

struct DetectionReport {
  Decision decision = Decision::Undecided;
  std::uint64_t tokens_used = 0;
  double statistic = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  std::optional<std::uint64_t> expected_tokens_h0;  // N_II
  std::optional<std::uint64_t> expected_tokens_h1;  // N_I
  double mean_information = 0.0;                    // nats/token under P_h0, over tokens_used
  std::uint64_t floored_events = 0;

  /// Fixed-length reading of the final statistic: negative leans watermarked.
  Decision fixed_length_verdict() const {
    return statistic < 0.0 ? Decision::Watermarked : Decision::NotWatermarked;
  }
};

nlohmann::json to_json(const DetectionReport& report);
DetectionReport detection_report_from_json(const nlohmann::json& j);

/// Resumable scan: feeds tokens[begin..] into `state`, conditioning each token
/// on everything before it. Stops at the first bound crossing.
struct ScanState {
  SprtState sprt;
  double information = 0.0;  // sum of -ln P_h0 over fed tokens
  std::uint64_t floored_events = 0;
};

namespace detail {
inline double floored(double p, std::uint64_t& floored_events) {
  if (!(p >= kProbabilityFloor)) {
    ++floored_events;
    return kProbabilityFloor;
  }
  return p > 1.0 ? 1.0 : p;
}
}  // namespace detail

template <NextTokenModel H0, NextTokenModel H1>
ScanState scan(ScanState state, std::span<const TokenId> tokens, std::size_t begin, const H0& h0, const H1& h1) {
  const std::size_t v = h0.vocabulary()->size();
  for (std::size_t t = begin; t < tokens.size() && !state.sprt.decided(); ++t) {
    const TokenId w = tokens[t];
    if (w < 0 || static_cast<std::size_t>(w) >= v) {
      throw Error(ErrorKind::InvalidArgument, "token id out of vocabulary range");
    }
    const auto history = tokens.first(t);
    const double p0 = detail::floored(h0.next_distribution(context_window(history, h0.context_length()))(w),
                                      state.floored_events);
    const double p1 = detail::floored(h1.next_distribution(context_window(history, h1.context_length()))(w),
                                      state.floored_events);
    state.information -= std::log(p0);
    state.sprt = state.sprt.update(p0, p1);
  }
  return state;
}

DetectionReport make_report(const ScanState& state, const DetectorConfig& config, std::optional<double> planning_kl);

/// Sequential test of `tokens` under H0 = watermarked model versus H1.
/// `planning_kl` (nats/token) fills the expected-token fields when positive.
template <NextTokenModel H0, NextTokenModel H1>
DetectionReport detect_sequence(std::span<const TokenId> tokens, const H0& h0, const H1& h1,
                                const DetectorConfig& config, std::optional<double> planning_kl = std::nullopt) {
  require_same_vocabulary(h0.vocabulary(), h1.vocabulary(), "detector: H0 and H1 models use different vocabularies");
  const ScanState state = scan(ScanState{SprtState(config)}, tokens, 0, h0, h1);
  return make_report(state, config, planning_kl);
}

/// (1/T) sum_t -ln P(w_t | w_<t).
template <NextTokenModel Model>
double mean_information(std::span<const TokenId> tokens, const Model& model) {
  if (tokens.empty()) throw Error(ErrorKind::EmptySequence, "mean_information of an empty sequence");
  std::uint64_t floored_events = 0;
  double total = 0.0;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto ctx = context_window(tokens.first(t), model.context_length());
    total -= std::log(detail::floored(model.next_distribution(ctx)(tokens[t]), floored_events));
  }
  return total / static_cast<double>(tokens.size());
}

}  // namespace wmtrace
