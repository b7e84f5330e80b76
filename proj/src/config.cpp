#include "wmtrace/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "wmtrace/error.hpp"

namespace wmtrace {

std::string_view to_string(FrequencySource s) {
  return s == FrequencySource::Corpus ? "corpus" : "model_generated";
}

std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::Sigma: return "sigma";
    case SweepAxis::SequenceLength: return "sequence_length";
    case SweepAxis::QueryTokens: return "query_tokens";
  }
  return "sigma";
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Drops a trailing '#' comment that is not inside a quoted string.
std::string_view strip_comment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
  throw Error(ErrorKind::Parse, where + ": " + msg);
}

std::string parse_string(std::string_view raw, const std::string& where) {
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
    return std::string(raw.substr(1, raw.size() - 2));
  }
  if (raw.find_first_of("\"[]= ") != std::string_view::npos || raw.empty()) {
    fail(where, "expected a string, got '" + std::string(raw) + "'");
  }
  return std::string(raw);
}

template <typename T>
T parse_number(std::string_view raw, const std::string& where) {
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') raw = raw.substr(1, raw.size() - 2);
  T value{};
  const char* end = raw.data() + raw.size();
  auto [ptr, ec] = std::from_chars(raw.data(), end, value);
  if (ec != std::errc() || ptr != end) fail(where, "expected a number, got '" + std::string(raw) + "'");
  return value;
}

std::vector<double> parse_list(std::string_view raw, const std::string& where) {
  if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']') fail(where, "expected a [list]");
  std::vector<double> out;
  std::string_view body = raw.substr(1, raw.size() - 2);
  while (!trim(body).empty()) {
    const auto comma = body.find(',');
    const auto item = trim(body.substr(0, comma));
    if (item.empty()) fail(where, "empty list element");
    out.push_back(parse_number<double>(item, where));
    if (comma == std::string_view::npos) break;
    body = body.substr(comma + 1);
  }
  return out;
}

void assign(ExperimentConfig& c, const std::string& key, std::string_view raw, const std::string& where) {
  auto num_size = [&] { return parse_number<std::size_t>(raw, where); };
  auto num_u64 = [&] { return parse_number<std::uint64_t>(raw, where); };
  auto num_int = [&] { return parse_number<int>(raw, where); };
  auto num_dbl = [&] { return parse_number<double>(raw, where); };

  if (key == "corpus.path") c.corpus.path = parse_string(raw, where);
  else if (key == "corpus.min_count") c.corpus.min_count = num_size();
  else if (key == "model.order") c.model.order = num_int();
  else if (key == "model.alpha") c.model.alpha = num_dbl();
  else if (key == "watermark.sigma") c.watermark.sigma = num_dbl();
  else if (key == "watermark.seed") c.watermark.seed = num_u64();
  else if (key == "watermark.floor_epsilon") c.watermark.floor_epsilon = num_dbl();
  else if (key == "watermark.frequency_tokens") c.watermark.frequency_tokens = num_size();
  else if (key == "watermark.frequency_source") {
    const auto s = parse_string(raw, where);
    if (s == "corpus") c.watermark.frequency_source = FrequencySource::Corpus;
    else if (s == "model_generated") c.watermark.frequency_source = FrequencySource::ModelGenerated;
    else fail(where, "frequency_source must be corpus or model_generated, got '" + s + "'");
  }
  else if (key == "detector.alpha") c.detector.alpha = num_dbl();
  else if (key == "detector.beta") c.detector.beta = num_dbl();
  else if (key == "monte_carlo.trials") c.monte_carlo.trials = num_size();
  else if (key == "monte_carlo.master_seed") c.monte_carlo.master_seed = num_u64();
  else if (key == "monte_carlo.sequence_length") c.monte_carlo.sequence_length = num_size();
  else if (key == "monte_carlo.workers") c.monte_carlo.workers = num_size();
  else if (key == "extraction.student_order") c.extraction.student_order = num_int();
  else if (key == "extraction.query_tokens") c.extraction.query_tokens = num_size();
  else if (key == "extraction.probe_contexts") c.extraction.probe_contexts = num_size();
  else if (key == "generate.sequences") c.generate.sequences = num_size();
  else if (key == "generate.max_tokens") c.generate.max_tokens = num_size();
  else if (key == "generate.seed") c.generate.seed = num_u64();
  else if (key == "generate.stop_token") c.generate.stop_token = raw == "\"\"" ? std::string() : parse_string(raw, where);
  else if (key == "sweep.axis") {
    const auto s = parse_string(raw, where);
    if (s == "sigma") c.sweep.axis = SweepAxis::Sigma;
    else if (s == "sequence_length") c.sweep.axis = SweepAxis::SequenceLength;
    else if (s == "query_tokens") c.sweep.axis = SweepAxis::QueryTokens;
    else fail(where, "sweep axis must be sigma, sequence_length or query_tokens, got '" + s + "'");
  }
  else if (key == "sweep.values") c.sweep.values = parse_list(raw, where);
  else if (key == "output.dir") c.output.dir = parse_string(raw, where);
  else fail(where, "unknown key '" + key + "'");
}

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorKind::InvalidArgument, "config: " + msg); }

}  // namespace

ExperimentConfig parse_config(std::string_view text, std::string_view origin) {
  ExperimentConfig config;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    const auto body = trim(strip_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[' && body.back() == ']' && body.find('=') == std::string_view::npos) {
      section = std::string(trim(body.substr(1, body.size() - 2)));
      static const char* kSections[] = {"corpus", "model",     "watermark", "detector", "monte_carlo",
                                        "extraction", "generate", "sweep", "output"};
      if (std::find(std::begin(kSections), std::end(kSections), section) == std::end(kSections)) {
        fail(where, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) fail(where, "expected key = value");
    if (section.empty()) fail(where, "key outside of any [section]");
    const auto key = trim(body.substr(0, eq));
    const auto value = trim(body.substr(eq + 1));
    if (key.empty() || value.empty()) fail(where, "expected key = value");
    assign(config, section + "." + std::string(key), value, where);
  }
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path);
}

void apply_override(ExperimentConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorKind::Parse, "override '" + std::string(assignment) + "' is not section.key=value");
  }
  const auto key = trim(assignment.substr(0, eq));
  const auto value = trim(assignment.substr(eq + 1));
  if (key.find('.') == std::string_view::npos || value.empty()) {
    throw Error(ErrorKind::Parse, "override '" + std::string(assignment) + "' is not section.key=value");
  }
  assign(config, std::string(key), value, "override '" + std::string(assignment) + "'");
}

void ExperimentConfig::validate() const {
  if (corpus.min_count < 1) invalid("corpus.min_count must be >= 1");
  if (model.order < 1) invalid("model.order must be >= 1");
  if (!(model.alpha > 0.0) || !std::isfinite(model.alpha)) invalid("model.alpha must be > 0");
  if (!(watermark.sigma > 0.0) || !std::isfinite(watermark.sigma)) invalid("watermark.sigma must be > 0");
  if (!(watermark.floor_epsilon > 0.0) || !(watermark.floor_epsilon < 1.0)) {
    invalid("watermark.floor_epsilon must lie in (0, 1)");
  }
  if (watermark.frequency_tokens < 1) invalid("watermark.frequency_tokens must be >= 1");
  if (!(detector.alpha > 0.0 && detector.alpha < 0.5)) invalid("detector.alpha must lie in (0, 0.5)");
  if (!(detector.beta > 0.0 && detector.beta < 0.5)) invalid("detector.beta must lie in (0, 0.5)");
  if (monte_carlo.trials < 1) invalid("monte_carlo.trials must be >= 1");
  if (monte_carlo.sequence_length < 1) invalid("monte_carlo.sequence_length must be >= 1");
  if (extraction.student_order < 1) invalid("extraction.student_order must be >= 1");
  if (extraction.query_tokens < 1000) invalid("extraction.query_tokens must be >= 1000");
  if (extraction.probe_contexts < 1) invalid("extraction.probe_contexts must be >= 1");
  if (generate.sequences < 1) invalid("generate.sequences must be >= 1");
  if (generate.max_tokens < 1) invalid("generate.max_tokens must be >= 1");
  if (sweep.values.size() < 2) invalid("sweep.values needs at least two points");
  for (double v : sweep.values) {
    if (!std::isfinite(v) || !(v > 0.0)) invalid("sweep.values must be finite and > 0");
    if (sweep.axis != SweepAxis::Sigma && v != std::floor(v)) invalid("sweep.values must be integers for this axis");
    if (sweep.axis == SweepAxis::QueryTokens && v < 1000) invalid("query_tokens sweep values must be >= 1000");
  }
  if (output.dir.empty()) invalid("output.dir must not be empty");
}

nlohmann::json to_json(const ExperimentConfig& c) {
  return {
      {"corpus", {{"path", c.corpus.path}, {"min_count", c.corpus.min_count}}},
      {"model", {{"order", c.model.order}, {"alpha", c.model.alpha}}},
      {"watermark",
       {{"sigma", c.watermark.sigma},
        {"seed", std::to_string(c.watermark.seed)},
        {"frequency_source", to_string(c.watermark.frequency_source)},
        {"floor_epsilon", c.watermark.floor_epsilon},
        {"frequency_tokens", c.watermark.frequency_tokens}}},
      {"detector", {{"alpha", c.detector.alpha}, {"beta", c.detector.beta}}},
      {"monte_carlo",
       {{"trials", c.monte_carlo.trials},
        {"master_seed", std::to_string(c.monte_carlo.master_seed)},
        {"sequence_length", c.monte_carlo.sequence_length},
        {"workers", c.monte_carlo.workers}}},
      {"extraction",
       {{"student_order", c.extraction.student_order},
        {"query_tokens", c.extraction.query_tokens},
        {"probe_contexts", c.extraction.probe_contexts}}},
      {"generate",
       {{"sequences", c.generate.sequences},
        {"max_tokens", c.generate.max_tokens},
        {"seed", std::to_string(c.generate.seed)},
        {"stop_token", c.generate.stop_token}}},
      {"sweep", {{"axis", to_string(c.sweep.axis)}, {"values", c.sweep.values}}},
      {"output", {{"dir", c.output.dir}}},
  };
}

}  // namespace wmtrace
