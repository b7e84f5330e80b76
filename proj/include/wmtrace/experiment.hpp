#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "wmtrace/detector.hpp"

namespace wmtrace {

/// `configured` workers (0 = hardware concurrency), capped by WMTRACE_WORKERS.
std::size_t resolve_workers(std::size_t configured);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
/// thrown by any task is rethrown after all threads join.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

struct TrialSummary {
  std::size_t trials = 0;
  std::size_t watermarked = 0;
  std::size_t not_watermarked = 0;
  std::size_t undecided = 0;
  /// Median tokens_used over decided trials; empty when none decided.
  std::optional<double> median_tokens_to_decision;

  double watermarked_rate() const { return trials ? static_cast<double>(watermarked) / trials : 0.0; }
  double not_watermarked_rate() const { return trials ? static_cast<double>(not_watermarked) / trials : 0.0; }
  double undecided_rate() const { return trials ? static_cast<double>(undecided) / trials : 0.0; }
};

TrialSummary summarize(const std::vector<DetectionReport>& reports);

std::optional<double> median(std::vector<double> values);

struct TrialPlan {
  DetectorConfig detector;
  std::size_t trials = 1000;
  std::size_t sequence_length = 2000;
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;
  std::optional<double> planning_kl;
};

/// Monte Carlo: trial i generates `sequence_length` tokens from `source` with
/// seed derive_seed(master_seed, i) and runs the sequential test of H0 vs H1.
/// Results are in trial order regardless of worker count.
template <NextTokenModel Source, NextTokenModel H0, NextTokenModel H1>
std::vector<DetectionReport> run_detection_trials(const Source& source, const H0& h0, const H1& h1,
                                                  const TrialPlan& plan) {
  require_same_vocabulary(source.vocabulary(), h0.vocabulary(), "trials: source and H0 vocabularies differ");
  std::vector<DetectionReport> reports(plan.trials);
  parallel_for(plan.trials, plan.workers, [&](std::size_t i) {
    const TokenSequence tokens =
        generate(source, GenerationConfig(plan.sequence_length, derive_seed(plan.master_seed, i)));
    reports[i] = detect_sequence(tokens, h0, h1, plan.detector, plan.planning_kl);
  });
  return reports;
}

}  // namespace wmtrace
