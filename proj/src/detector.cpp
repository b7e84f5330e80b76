#include "wmtrace/detector.hpp"

#include <limits>

namespace wmtrace {

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::Watermarked: return "watermarked";
    case Decision::NotWatermarked: return "not_watermarked";
    case Decision::Undecided: return "undecided";
  }
  return "undecided";
}

Decision decision_from_string(std::string_view s) {
  if (s == "watermarked") return Decision::Watermarked;
  if (s == "not_watermarked") return Decision::NotWatermarked;
  if (s == "undecided") return Decision::Undecided;
  throw Error(ErrorKind::Parse, "unknown decision '" + std::string(s) + "'");
}

DetectorConfig::DetectorConfig(double alpha_, double beta_) : alpha(alpha_), beta(beta_) {
  if (!(alpha > 0.0 && alpha < 0.5) || !(beta > 0.0 && beta < 0.5)) {
    throw Error(ErrorKind::InvalidRates, "alpha and beta must lie in (0, 0.5), got alpha=" + std::to_string(alpha) +
                                             " beta=" + std::to_string(beta));
  }
}

DecisionBounds bounds_from_rates(const DetectorConfig& config) {
  // Re-check: the fields are public and may have been edited after construction.
  const DetectorConfig checked(config.alpha, config.beta);
  return {-std::log(checked.alpha / (1.0 - checked.alpha)), std::log((1.0 - checked.beta) / checked.beta)};
}

ExpectedTokens expected_tokens(const DetectorConfig& config, double kl) {
  if (!(kl > 0.0)) throw Error(ErrorKind::ZeroDivergence, "per-token divergence must be > 0");
  const auto [b1, b2] = bounds_from_rates(config);
  return {static_cast<std::uint64_t>(std::ceil(b1 / kl)), static_cast<std::uint64_t>(std::ceil(b2 / kl))};
}

SprtState::SprtState(const DetectorConfig& config) {
  const auto bounds = bounds_from_rates(config);
  b1_ = bounds.b1;
  b2_ = bounds.b2;
}

SprtState SprtState::update(double p_h0, double p_h1) const {
  if (decided()) throw Error(ErrorKind::AlreadyDecided, "test already stopped at token " + std::to_string(tokens_seen_));
  if (!(p_h0 > 0.0 && p_h0 <= 1.0) || !(p_h1 > 0.0 && p_h1 <= 1.0)) {
    throw Error(ErrorKind::InvalidProbability, "probabilities must lie in (0, 1]");
  }
  SprtState next = *this;
  next.statistic_ += -std::log(p_h0 / p_h1);
  next.tokens_seen_ += 1;
  if (next.statistic_ < -b1_) {
    next.decision_ = Decision::Watermarked;
  } else if (next.statistic_ > b2_) {
    next.decision_ = Decision::NotWatermarked;
  }
  return next;
}

DetectionReport make_report(const ScanState& state, const DetectorConfig& config, std::optional<double> planning_kl) {
  DetectionReport report;
  report.decision = state.sprt.decision();
  report.tokens_used = state.sprt.tokens_seen();
  report.statistic = state.sprt.statistic();
  report.b1 = state.sprt.b1();
  report.b2 = state.sprt.b2();
  report.floored_events = state.floored_events;
  report.mean_information =
      report.tokens_used == 0 ? 0.0 : state.information / static_cast<double>(report.tokens_used);
  if (planning_kl && *planning_kl > 0.0) {
    const auto n = expected_tokens(config, *planning_kl);
    report.expected_tokens_h1 = n.n1;
    report.expected_tokens_h0 = n.n2;
  }
  return report;
}

nlohmann::json to_json(const DetectionReport& report) {
  auto optional_count = [](const std::optional<std::uint64_t>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"decision", to_string(report.decision)},
          {"tokens_used", report.tokens_used},
          {"statistic_nats", report.statistic},
          {"b1", report.b1},
          {"b2", report.b2},
          {"n1_expected", optional_count(report.expected_tokens_h1)},
          {"n2_expected", optional_count(report.expected_tokens_h0)},
          {"mean_information_nats", report.mean_information},
          {"fixed_length_verdict", to_string(report.fixed_length_verdict())},
          {"floored_events", report.floored_events}};
}

DetectionReport detection_report_from_json(const nlohmann::json& j) {
  DetectionReport r;
  r.decision = decision_from_string(j.at("decision").get<std::string>());
  r.tokens_used = j.at("tokens_used").get<std::uint64_t>();
  r.statistic = j.at("statistic_nats").get<double>();
  r.b1 = j.at("b1").get<double>();
  r.b2 = j.at("b2").get<double>();
  if (!j.at("n1_expected").is_null()) r.expected_tokens_h1 = j.at("n1_expected").get<std::uint64_t>();
  if (!j.at("n2_expected").is_null()) r.expected_tokens_h0 = j.at("n2_expected").get<std::uint64_t>();
  r.mean_information = j.at("mean_information_nats").get<double>();
  r.floored_events = j.value("floored_events", std::uint64_t{0});
  return r;
}

}  // namespace wmtrace
