#include "wmtrace/experiment.hpp"

#include <cstdlib>
#include <string>

namespace wmtrace {

std::size_t resolve_workers(std::size_t configured) {
  std::size_t workers = configured;
  if (workers == 0) workers = std::max(1U, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("WMTRACE_WORKERS"); env != nullptr && *env != '\0') {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) workers = std::min(workers, static_cast<std::size_t>(cap));
    } catch (const std::exception&) {
      // Unparseable cap: ignore.
    }
  }
  return workers;
}

std::optional<double> median(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

TrialSummary summarize(const std::vector<DetectionReport>& reports) {
  TrialSummary s;
  s.trials = reports.size();
  std::vector<double> decided_tokens;
  for (const auto& r : reports) {
    switch (r.decision) {
      case Decision::Watermarked: ++s.watermarked; break;
      case Decision::NotWatermarked: ++s.not_watermarked; break;
      case Decision::Undecided: ++s.undecided; break;
    }
    if (r.decision != Decision::Undecided) decided_tokens.push_back(static_cast<double>(r.tokens_used));
  }
  s.median_tokens_to_decision = median(std::move(decided_tokens));
  return s;
}

}  // namespace wmtrace
