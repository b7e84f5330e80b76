#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace wmtrace {

enum class FrequencySource { Corpus, ModelGenerated };
enum class SweepAxis { Sigma, SequenceLength, QueryTokens };

std::string_view to_string(FrequencySource s);
std::string_view to_string(SweepAxis a);

/// Every knob a harness command can read. Loaded from a TOML-like file:
///
///   # comment
///   [section]
///   key = 42
///   name = "text"
///   values = [0.001, 0.002]
struct ExperimentConfig {
  struct Corpus {
    std::string path;
    std::size_t min_count = 1;
  } corpus;
  struct Model {
    int order = 2;
    double alpha = 0.1;
  } model;
  struct Watermark {
    double sigma = 0.002;
    std::uint64_t seed = 1;
    FrequencySource frequency_source = FrequencySource::Corpus;
    double floor_epsilon = 1e-8;
    std::size_t frequency_tokens = 100000;  // model_generated source only
  } watermark;
  struct Detector {
    double alpha = 0.01;
    double beta = 0.01;
  } detector;
  struct MonteCarlo {
    std::size_t trials = 200;
    std::uint64_t master_seed = 7;
    std::size_t sequence_length = 2000;
    std::size_t workers = 0;  // 0 = hardware concurrency
  } monte_carlo;
  struct Extraction {
    int student_order = 2;
    std::size_t query_tokens = 500000;
    std::size_t probe_contexts = 2000;
  } extraction;
  struct Generate {
    std::size_t sequences = 10;
    std::size_t max_tokens = 200;
    std::uint64_t seed = 1;
    std::string stop_token;  // empty = none
  } generate;
  struct Sweep {
    SweepAxis axis = SweepAxis::Sigma;
    std::vector<double> values{0.0005, 0.001, 0.002};
  } sweep;
  struct Output {
    std::string dir = "wmtrace_out";
  } output;

  /// Range checks for every field; throws Error(InvalidArgument).
  void validate() const;
};

/// Parses config text. Unknown sections or keys are errors; messages carry
/// `origin:line`.
ExperimentConfig parse_config(std::string_view text, std::string_view origin = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Applies one `section.key=value` override.
void apply_override(ExperimentConfig& config, std::string_view assignment);

nlohmann::json to_json(const ExperimentConfig& config);

}  // namespace wmtrace
