#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wmtrace/config.hpp"
#include "wmtrace/detector.hpp"
#include "wmtrace/experiment.hpp"
#include "wmtrace/ngram.hpp"
#include "wmtrace/watermark.hpp"

namespace wmtrace {

inline constexpr const char* kToolVersion = "0.1.0";

// Stream indices for seeds derived from monte_carlo.master_seed.
enum SeedStream : std::uint64_t {
  kStreamFrequencyText = 1,
  kStreamExtraction = 2,
  kStreamControlExtraction = 3,
  kStreamStudentTrials = 4,
  kStreamControlTrials = 5,
  kStreamProbe = 6,
  kStreamWatermarkedTrials = 7,
  kStreamPlainTrials = 8,
};

/// Everything needed to regenerate and use a watermark: the key, the model
/// frequency it was built from, the reweight table and the base model.
struct WatermarkBundle {
  WatermarkKey key;
  double floor_epsilon = kDefaultFloorEpsilon;
  FrequencySource frequency_source = FrequencySource::Corpus;
  FrequencyTable model_freq;
  ReweightTablePtr reweight;
  double strength_nats = 0.0;
  NGramModelPtr base;

  WatermarkedModel model() const { return WatermarkedModel(base, reweight); }
  /// Regenerates the noised table from (model_freq, key).
  NoisedFrequencyTable noised() const { return noise_frequency(model_freq, key, floor_epsilon); }

  nlohmann::json to_json(bool export_noised = false) const;
  static WatermarkBundle from_json(const nlohmann::json& j);
};

/// Model frequency on the configured dataset: the human corpus, or
/// `frequency_tokens` of text sampled from the model itself.
FrequencyTable measure_model_frequency(const NGramModel& model, const ExperimentConfig& config);

/// noise -> reweight -> strength over an already measured model frequency.
WatermarkBundle make_bundle(NGramModelPtr base, FrequencyTable model_freq, const WatermarkKey& key,
                            double floor_epsilon, FrequencySource source);

WatermarkBundle build_watermark(NGramModelPtr base, const ExperimentConfig& config);

/// Watermarked wrapper with all-ones ratios: the unwatermarked teacher.
WatermarkedModel identity_watermark(NGramModelPtr base);

struct ExtractionReport {
  double strength_nats = 0.0;
  double extraction_gap_nats = 0.0;
  double control_extraction_gap_nats = 0.0;
  DecisionBounds bounds{};
  ExpectedTokens expected{};
  std::size_t sequence_length = 0;
  double working_limit_nats = 0.0;  // b2 / sequence_length
  bool below_working_limit = false; // extraction_gap < working_limit
  TrialSummary student;
  TrialSummary control;

  nlohmann::json to_json() const;
};

ExtractionReport run_attack_simulation(const WatermarkBundle& bundle, const ExperimentConfig& config);

struct SweepRow {
  double axis_value;
  double strength_nats;
  std::uint64_t n1_pred;
  std::uint64_t n2_pred;
  double empirical_fpr;
  double empirical_fnr;
  std::optional<double> median_tokens_to_decision;
  double undecided_rate;  // H0 side; not part of the CSV
};

inline constexpr const char* kSweepCsvHeader =
    "axis_value,strength_nats,n1_pred,n2_pred,empirical_fpr,empirical_fnr,median_tokens_to_decision";

std::vector<SweepRow> run_sweep(const WatermarkBundle& bundle, const ExperimentConfig& config);
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct DetectFileResult {
  std::vector<DetectionReport> reports;
  nlohmann::json summary;
};

/// Per-line detection; lines that are not valid UTF-8 are skipped and listed
/// in the summary.
DetectFileResult detect_lines(const std::vector<std::string>& lines, const WatermarkBundle& bundle,
                              const NGramModel& h1, const ExperimentConfig& config);

/// Options layered over the config by command-line flags.
struct CommandOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string model_path;
  std::string bundle_path;
  std::string h1_path;
  std::string input_path;
  std::string output_path;
  bool export_noised = false;
};

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitRuntime = 2, kExitVocabularyMismatch = 3 };

int cmd_train(const CommandOptions& options);
int cmd_watermark(const CommandOptions& options);
int cmd_generate(const CommandOptions& options);
int cmd_detect(const CommandOptions& options);
int cmd_attack_sim(const CommandOptions& options);
int cmd_sweep(const CommandOptions& options);

/// Entry point used by the `wmtrace` binary.
int run_cli(int argc, char** argv);

nlohmann::json read_json_file(const std::string& path);
std::string read_text_file(const std::string& path);

}  // namespace wmtrace
