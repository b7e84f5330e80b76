#include "wmtrace/harness.hpp"

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace wmtrace {

namespace fs = std::filesystem;

// --- file helpers -----------------------------------------------------------

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

nlohmann::json read_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Parse, "'" + path + "': " + e.what());
  }
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// Manifest lifecycle: written before any result, rewritten on success, and
// removed together with staged results when the command fails.
class RunRecorder {
 public:
  RunRecorder(std::string command, const ExperimentConfig& config, fs::path manifest_path,
              std::vector<fs::path> outputs, nlohmann::json seeds)
      : manifest_path_(std::move(manifest_path)), outputs_(std::move(outputs)),
        started_(std::chrono::steady_clock::now()) {
    manifest_ = {{"version", 1},
                 {"tool", "wmtrace"},
                 {"tool_version", kToolVersion},
                 {"command", std::move(command)},
                 {"config", to_json(config)},
                 {"seeds", std::move(seeds)},
                 {"outputs", nlohmann::json::array()},
                 {"status", "running"}};
    for (const auto& p : outputs_) manifest_["outputs"].push_back(p.generic_string());
    const auto now_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::system_clock::now().time_since_epoch())
                            .count();
    manifest_["wall_clock"] = {{"started_unix_ms", now_ms}, {"elapsed_ms", nullptr}};
    for (const auto& p : outputs_) {
      if (p.has_parent_path()) fs::create_directories(p.parent_path());
    }
    if (manifest_path_.has_parent_path()) fs::create_directories(manifest_path_.parent_path());
    write_file(manifest_path_, dump(manifest_));
  }

  RunRecorder(const RunRecorder&) = delete;
  RunRecorder& operator=(const RunRecorder&) = delete;

  ~RunRecorder() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : outputs_) fs::remove(staged(p), ec);
    fs::remove(manifest_path_, ec);
  }

  void set_seed(const std::string& name, std::uint64_t value) { manifest_["seeds"][name] = std::to_string(value); }

  /// Stages every output, then moves them into place and finalizes the manifest.
  void commit(const std::map<fs::path, std::string>& contents) {
    for (const auto& p : outputs_) {
      auto it = contents.find(p);
      if (it == contents.end()) throw std::logic_error("missing content for " + p.string());
      write_file(staged(p), it->second);
    }
    for (const auto& p : outputs_) fs::rename(staged(p), p);
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - started_)
                             .count();
    manifest_["wall_clock"]["elapsed_ms"] = elapsed;
    manifest_["status"] = "ok";
    write_file(manifest_path_, dump(manifest_));
    committed_ = true;
  }

 private:
  static fs::path staged(const fs::path& p) { return fs::path(p.string() + ".tmp"); }

  static void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
  }

  fs::path manifest_path_;
  std::vector<fs::path> outputs_;
  nlohmann::json manifest_;
  std::chrono::steady_clock::time_point started_;
  bool committed_ = false;
};

ProbVector from_std(const std::vector<double>& v) {
  return Eigen::Map<const ProbVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const ProbVector& v) { return {v.data(), v.data() + v.size()}; }

nlohmann::json summary_json(const TrialSummary& s) {
  return {{"trials", s.trials},
          {"watermarked_rate", s.watermarked_rate()},
          {"not_watermarked_rate", s.not_watermarked_rate()},
          {"undecided_rate", s.undecided_rate()},
          {"median_tokens_to_decision",
           s.median_tokens_to_decision ? nlohmann::json(*s.median_tokens_to_decision) : nlohmann::json(nullptr)}};
}

}  // namespace

// --- watermark bundle -------------------------------------------------------

nlohmann::json WatermarkBundle::to_json(bool export_noised) const {
  nlohmann::json j = {{"version", 1},
                      {"kind", "watermark_bundle"},
                      {"key", wmtrace::to_json(key)},
                      {"floor_epsilon", floor_epsilon},
                      {"frequency_source", to_string(frequency_source)},
                      {"model_freq", wmtrace::to_json(model_freq)},
                      {"reweight", to_std(reweight->ratio())},
                      {"strength_nats", strength_nats},
                      {"base_model", base->to_json()}};
  if (export_noised) j["noised"] = to_std(noised().noised());
  return j;
}

WatermarkBundle WatermarkBundle::from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != 1 || j.value("kind", std::string()) != "watermark_bundle") {
    throw Error(ErrorKind::Parse, "not a version-1 watermark bundle");
  }
  auto base = std::make_shared<const NGramModel>(NGramModel::from_json(j.at("base_model")));
  const FrequencyTable freq_parsed = frequency_table_from_json(j.at("model_freq"));
  require_same_vocabulary(base->vocabulary(), freq_parsed.vocabulary(),
                          "bundle: model frequency and base model use different vocabularies");
  FrequencyTable model_freq(base->vocabulary(), freq_parsed.freq());
  const auto source_name = j.at("frequency_source").get<std::string>();
  FrequencySource source = FrequencySource::Corpus;
  if (source_name == "model_generated") source = FrequencySource::ModelGenerated;
  else if (source_name != "corpus") throw Error(ErrorKind::Parse, "bundle: unknown frequency_source");
  const double floor = j.at("floor_epsilon").get<double>();
  auto reweight = std::make_shared<const ReweightTable>(
      base->vocabulary(), from_std(j.at("reweight").get<std::vector<double>>()), floor);
  return WatermarkBundle{watermark_key_from_json(j.at("key")),
                         floor,
                         source,
                         std::move(model_freq),
                         std::move(reweight),
                         j.at("strength_nats").get<double>(),
                         std::move(base)};
}

FrequencyTable measure_model_frequency(const NGramModel& model, const ExperimentConfig& config) {
  if (config.watermark.frequency_source == FrequencySource::Corpus) {
    const auto lines = read_lines(config.corpus.path);
    return model_frequency(model, Corpus::from_text(model.vocabulary(), lines));
  }
  // Model-generated dataset: frequency_tokens of sampled text in documents of
  // generate.max_tokens.
  std::vector<TokenSequence> docs;
  std::size_t produced = 0;
  const std::uint64_t master = derive_seed(config.monte_carlo.master_seed, kStreamFrequencyText);
  for (std::uint64_t d = 0; produced < config.watermark.frequency_tokens; ++d) {
    const std::size_t budget = std::min(config.generate.max_tokens, config.watermark.frequency_tokens - produced);
    docs.push_back(generate(model, GenerationConfig(budget, derive_seed(master, d))));
    produced += docs.back().size();
  }
  return model_frequency(model, Corpus(model.vocabulary(), std::move(docs)));
}

WatermarkBundle make_bundle(NGramModelPtr base, FrequencyTable model_freq, const WatermarkKey& key,
                            double floor_epsilon, FrequencySource source) {
  const NoisedFrequencyTable noised = noise_frequency(model_freq, key, floor_epsilon);
  auto reweight = std::make_shared<const ReweightTable>(build_reweight_table(noised, model_freq, floor_epsilon));
  const double strength = watermark_strength(model_freq, noised);
  return WatermarkBundle{key, floor_epsilon, source, std::move(model_freq), std::move(reweight), strength,
                         std::move(base)};
}

WatermarkBundle build_watermark(NGramModelPtr base, const ExperimentConfig& config) {
  FrequencyTable freq = measure_model_frequency(*base, config);
  return make_bundle(std::move(base), std::move(freq), WatermarkKey(config.watermark.seed, config.watermark.sigma),
                     config.watermark.floor_epsilon, config.watermark.frequency_source);
}

WatermarkedModel identity_watermark(NGramModelPtr base) {
  auto vocab = base->vocabulary();
  auto table = std::make_shared<const ReweightTable>(
      vocab, ProbVector::Ones(static_cast<Eigen::Index>(vocab->size())), kDefaultFloorEpsilon);
  return WatermarkedModel(std::move(base), std::move(table));
}

// --- experiments ------------------------------------------------------------

nlohmann::json ExtractionReport::to_json() const {
  return {{"version", 1},
          {"strength_nats", strength_nats},
          {"extraction_gap_nats", extraction_gap_nats},
          {"control_extraction_gap_nats", control_extraction_gap_nats},
          {"b1", bounds.b1},
          {"b2", bounds.b2},
          {"n1_expected", expected.n1},
          {"n2_expected", expected.n2},
          {"sequence_length", sequence_length},
          {"working_limit_nats", working_limit_nats},
          {"below_working_limit", below_working_limit},
          {"student", summary_json(student)},
          {"control", summary_json(control)}};
}

namespace {

TrialPlan plan_from(const ExperimentConfig& config, std::uint64_t stream, std::optional<double> planning_kl) {
  TrialPlan plan;
  plan.detector = DetectorConfig(config.detector.alpha, config.detector.beta);
  plan.trials = config.monte_carlo.trials;
  plan.sequence_length = config.monte_carlo.sequence_length;
  plan.master_seed = derive_seed(config.monte_carlo.master_seed, stream);
  plan.workers = resolve_workers(config.monte_carlo.workers);
  plan.planning_kl = planning_kl;
  return plan;
}

GenerationConfig extraction_generation(const ExperimentConfig& config, std::uint64_t stream) {
  return GenerationConfig(config.generate.max_tokens, derive_seed(config.monte_carlo.master_seed, stream));
}

}  // namespace

ExtractionReport run_attack_simulation(const WatermarkBundle& bundle, const ExperimentConfig& config) {
  const WatermarkedModel teacher = bundle.model();
  const WatermarkedModel plain_teacher = identity_watermark(bundle.base);
  const auto& ex = config.extraction;

  const NGramModel student = simulate_extraction(teacher, ex.student_order, ex.query_tokens,
                                                 extraction_generation(config, kStreamExtraction), config.model.alpha);
  const NGramModel control = simulate_extraction(plain_teacher, ex.student_order, ex.query_tokens,
                                                 extraction_generation(config, kStreamControlExtraction),
                                                 config.model.alpha);

  ExtractionReport report;
  report.strength_nats = bundle.strength_nats;
  const std::uint64_t probe_seed = derive_seed(config.monte_carlo.master_seed, kStreamProbe);
  report.extraction_gap_nats = extraction_gap(teacher, student, ex.probe_contexts, probe_seed);
  report.control_extraction_gap_nats = extraction_gap(teacher, control, ex.probe_contexts, probe_seed);

  const DetectorConfig detector(config.detector.alpha, config.detector.beta);
  report.bounds = bounds_from_rates(detector);
  if (bundle.strength_nats > 0.0) report.expected = expected_tokens(detector, bundle.strength_nats);
  report.sequence_length = config.monte_carlo.sequence_length;
  report.working_limit_nats = report.bounds.b2 / static_cast<double>(report.sequence_length);
  report.below_working_limit = report.extraction_gap_nats < report.working_limit_nats;

  const auto& h1 = *bundle.base;
  report.student = summarize(
      run_detection_trials(student, teacher, h1, plan_from(config, kStreamStudentTrials, bundle.strength_nats)));
  report.control = summarize(
      run_detection_trials(control, teacher, h1, plan_from(config, kStreamControlTrials, bundle.strength_nats)));
  return report;
}

std::vector<SweepRow> run_sweep(const WatermarkBundle& bundle, const ExperimentConfig& config) {
  std::vector<SweepRow> rows;
  for (double value : config.sweep.values) {
    ExperimentConfig point = config;
    WatermarkBundle current = bundle;
    if (config.sweep.axis == SweepAxis::Sigma) {
      point.watermark.sigma = value;
      current = make_bundle(bundle.base, bundle.model_freq, WatermarkKey(bundle.key.seed, value),
                            bundle.floor_epsilon, bundle.frequency_source);
    } else if (config.sweep.axis == SweepAxis::SequenceLength) {
      point.monte_carlo.sequence_length = static_cast<std::size_t>(value);
    } else {
      point.extraction.query_tokens = static_cast<std::size_t>(value);
    }
    const WatermarkedModel teacher = current.model();
    const DetectorConfig detector(point.detector.alpha, point.detector.beta);
    const auto expected = expected_tokens(detector, current.strength_nats);

    std::vector<DetectionReport> positives;
    if (config.sweep.axis == SweepAxis::QueryTokens) {
      const NGramModel student =
          simulate_extraction(teacher, point.extraction.student_order, point.extraction.query_tokens,
                              extraction_generation(point, kStreamExtraction), point.model.alpha);
      positives = run_detection_trials(student, teacher, *current.base,
                                       plan_from(point, kStreamWatermarkedTrials, current.strength_nats));
    } else {
      positives = run_detection_trials(teacher, teacher, *current.base,
                                       plan_from(point, kStreamWatermarkedTrials, current.strength_nats));
    }
    const auto negatives = run_detection_trials(*current.base, teacher, *current.base,
                                                plan_from(point, kStreamPlainTrials, current.strength_nats));
    const TrialSummary pos = summarize(positives);
    const TrialSummary neg = summarize(negatives);
    rows.push_back(SweepRow{value, current.strength_nats, expected.n1, expected.n2, neg.watermarked_rate(),
                            pos.not_watermarked_rate(), pos.median_tokens_to_decision, pos.undecided_rate()});
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = std::string(kSweepCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += format_double(r.axis_value) + "," + format_double(r.strength_nats) + "," + std::to_string(r.n1_pred) +
           "," + std::to_string(r.n2_pred) + "," + format_double(r.empirical_fpr) + "," +
           format_double(r.empirical_fnr) + "," +
           (r.median_tokens_to_decision ? format_double(*r.median_tokens_to_decision) : std::string()) + "\n";
  }
  return out;
}

DetectFileResult detect_lines(const std::vector<std::string>& lines, const WatermarkBundle& bundle,
                              const NGramModel& h1, const ExperimentConfig& config) {
  require_same_vocabulary(bundle.base->vocabulary(), h1.vocabulary(),
                          "detect: H1 model vocabulary differs from the bundle's");
  const WatermarkedModel h0 = bundle.model();
  const DetectorConfig detector(config.detector.alpha, config.detector.beta);
  const auto& vocab = *h0.vocabulary();

  std::vector<std::optional<DetectionReport>> slots(lines.size());
  parallel_for(lines.size(), resolve_workers(config.monte_carlo.workers), [&](std::size_t i) {
    if (!is_valid_utf8(lines[i])) return;
    const TokenSequence tokens = vocab.encode_text(lines[i]);
    slots[i] = detect_sequence(tokens, h0, h1, detector,
                               bundle.strength_nats > 0.0 ? std::optional<double>(bundle.strength_nats) : std::nullopt);
  });

  DetectFileResult result;
  nlohmann::json skipped = nlohmann::json::array();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (slots[i]) {
      result.reports.push_back(*slots[i]);
    } else {
      skipped.push_back({{"line", i + 1}, {"reason", "invalid UTF-8"}});
    }
  }
  const TrialSummary s = summarize(result.reports);
  std::vector<double> used;
  for (const auto& r : result.reports) used.push_back(static_cast<double>(r.tokens_used));
  const auto median_used = median(used);
  result.summary = {{"version", 1},
                    {"lines", lines.size()},
                    {"reports", result.reports.size()},
                    {"skipped", skipped.size()},
                    {"skipped_lines", skipped},
                    {"decision_counts",
                     {{"watermarked", s.watermarked},
                      {"not_watermarked", s.not_watermarked},
                      {"undecided", s.undecided}}},
                    {"watermarked_rate", s.watermarked_rate()},
                    {"not_watermarked_rate", s.not_watermarked_rate()},
                    {"undecided_rate", s.undecided_rate()},
                    {"median_tokens_used", median_used ? nlohmann::json(*median_used) : nlohmann::json(nullptr)}};
  return result;
}

// --- commands ---------------------------------------------------------------

namespace {

ExperimentConfig load_options(const CommandOptions& options) {
  if (options.config_path.empty()) throw Error(ErrorKind::InvalidArgument, "--config is required");
  ExperimentConfig config = load_config(options.config_path);
  for (const auto& o : options.overrides) apply_override(config, o);
  config.validate();
  return config;
}

fs::path default_path(const ExperimentConfig& config, const std::string& flag, const char* name) {
  return flag.empty() ? fs::path(config.output.dir) / name : fs::path(flag);
}

fs::path manifest_for(const fs::path& primary, const char* command) {
  return primary.parent_path() / (std::string("manifest_") + command + ".json");
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw Error(ErrorKind::Io, std::string(what) + " not found: '" + p.string() + "'");
}

NGramModelPtr load_model(const fs::path& p) {
  require_file(p, "model file");
  return std::make_shared<const NGramModel>(NGramModel::from_json(read_json_file(p.string())));
}

WatermarkBundle load_bundle(const fs::path& p) {
  require_file(p, "watermark bundle");
  return WatermarkBundle::from_json(read_json_file(p.string()));
}

NGramModel train_from_config(const ExperimentConfig& config) {
  const auto lines = read_lines(config.corpus.path);
  auto vocab = build_vocabulary(lines, config.corpus.min_count);
  return train_ngram(Corpus::from_text(vocab, lines), config.model.order, config.model.alpha);
}

// Teacher for attack-sim and sweep: --bundle, else --model plus the config's
// watermark, else a model trained from the config's corpus.
WatermarkBundle teacher_bundle(const CommandOptions& options, const ExperimentConfig& config) {
  if (!options.bundle_path.empty()) return load_bundle(options.bundle_path);
  NGramModelPtr base;
  if (!options.model_path.empty()) {
    base = load_model(options.model_path);
  } else {
    require_file(config.corpus.path, "corpus");
    base = std::make_shared<const NGramModel>(train_from_config(config));
  }
  return build_watermark(std::move(base), config);
}

nlohmann::json base_seeds(const ExperimentConfig& config) {
  return {{"master_seed", std::to_string(config.monte_carlo.master_seed)},
          {"watermark_seed", std::to_string(config.watermark.seed)},
          {"generate_seed", std::to_string(config.generate.seed)}};
}

}  // namespace

int cmd_train(const CommandOptions& options) {
  const ExperimentConfig config = load_options(options);
  require_file(config.corpus.path, "corpus");
  const fs::path out = default_path(config, options.output_path, "model.json");

  RunRecorder run("train", config, manifest_for(out, "train"), {out}, base_seeds(config));
  const NGramModel model = train_from_config(config);
  run.commit({{out, dump(model.to_json())}});
  return kExitOk;
}

int cmd_watermark(const CommandOptions& options) {
  const ExperimentConfig config = load_options(options);
  const fs::path model_path = default_path(config, options.model_path, "model.json");
  const fs::path out = default_path(config, options.output_path, "bundle.json");
  auto base = load_model(model_path);
  if (config.watermark.frequency_source == FrequencySource::Corpus) require_file(config.corpus.path, "corpus");

  nlohmann::json seeds = base_seeds(config);
  if (config.watermark.frequency_source == FrequencySource::ModelGenerated) {
    seeds["frequency_text_master"] =
        std::to_string(derive_seed(config.monte_carlo.master_seed, kStreamFrequencyText));
  }
  RunRecorder run("watermark", config, manifest_for(out, "watermark"), {out}, std::move(seeds));
  const WatermarkBundle bundle = build_watermark(std::move(base), config);
  run.commit({{out, dump(bundle.to_json(options.export_noised))}});
  return kExitOk;
}

int cmd_generate(const CommandOptions& options) {
  const ExperimentConfig config = load_options(options);
  if (!options.model_path.empty() && !options.bundle_path.empty()) {
    throw Error(ErrorKind::InvalidArgument, "pass either --model or --bundle, not both");
  }
  const fs::path out = default_path(config, options.output_path, "generated.txt");

  std::optional<WatermarkBundle> bundle;
  NGramModelPtr plain;
  if (!options.model_path.empty()) {
    plain = load_model(options.model_path);
  } else {
    bundle = load_bundle(default_path(config, options.bundle_path, "bundle.json"));
  }
  const auto& vocab = bundle ? *bundle->base->vocabulary() : *plain->vocabulary();
  std::optional<TokenId> stop;
  if (!config.generate.stop_token.empty()) {
    if (!vocab.contains(config.generate.stop_token)) {
      throw Error(ErrorKind::InvalidArgument, "stop_token '" + config.generate.stop_token + "' not in vocabulary");
    }
    stop = vocab.lookup(config.generate.stop_token);
  }

  nlohmann::json seeds = base_seeds(config);
  RunRecorder run("generate", config, manifest_for(out, "generate"), {out}, seeds);
  const std::size_t n = config.generate.sequences;
  std::vector<std::string> lines(n);
  parallel_for(n, resolve_workers(config.monte_carlo.workers), [&](std::size_t i) {
    const GenerationConfig gen(config.generate.max_tokens, derive_seed(config.generate.seed, i), stop);
    const TokenSequence tokens = bundle ? generate(bundle->model(), gen) : generate(*plain, gen);
    lines[i] = vocab.decode(tokens);
  });
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  run.commit({{out, text}});
  return kExitOk;
}

int cmd_detect(const CommandOptions& options) {
  const ExperimentConfig config = load_options(options);
  const fs::path input = default_path(config, options.input_path, "generated.txt");
  const fs::path out = default_path(config, options.output_path, "detect.jsonl");
  const fs::path summary_path = out.parent_path() / (out.stem().string() + "_summary.json");
  require_file(input, "input text");
  const WatermarkBundle bundle = load_bundle(default_path(config, options.bundle_path, "bundle.json"));
  const NGramModelPtr h1 = options.h1_path.empty() ? bundle.base : load_model(options.h1_path);
  require_same_vocabulary(bundle.base->vocabulary(), h1->vocabulary(),
                          "detect: H1 model vocabulary differs from the bundle's");
  const auto lines = read_lines(input.string());

  RunRecorder run("detect", config, manifest_for(out, "detect"), {out, summary_path}, base_seeds(config));
  const DetectFileResult result = detect_lines(lines, bundle, *h1, config);
  std::string jsonl;
  for (const auto& r : result.reports) jsonl += to_json(r).dump() + "\n";
  run.commit({{out, jsonl}, {summary_path, dump(result.summary)}});
  return kExitOk;
}

int cmd_attack_sim(const CommandOptions& options) {
  const ExperimentConfig config = load_options(options);
  const fs::path out = default_path(config, options.output_path, "attack.json");
  const WatermarkBundle bundle = teacher_bundle(options, config);

  nlohmann::json seeds = base_seeds(config);
  const auto master = config.monte_carlo.master_seed;
  seeds["extraction"] = std::to_string(derive_seed(master, kStreamExtraction));
  seeds["control_extraction"] = std::to_string(derive_seed(master, kStreamControlExtraction));
  seeds["student_trials"] = std::to_string(derive_seed(master, kStreamStudentTrials));
  seeds["control_trials"] = std::to_string(derive_seed(master, kStreamControlTrials));
  seeds["probe"] = std::to_string(derive_seed(master, kStreamProbe));
  RunRecorder run("attack-sim", config, manifest_for(out, "attack-sim"), {out}, std::move(seeds));
  const ExtractionReport report = run_attack_simulation(bundle, config);
  run.commit({{out, dump(report.to_json())}});
  return kExitOk;
}

int cmd_sweep(const CommandOptions& options) {
  const ExperimentConfig config = load_options(options);
  const fs::path out = default_path(config, options.output_path, "sweep.csv");
  const WatermarkBundle bundle = teacher_bundle(options, config);

  nlohmann::json seeds = base_seeds(config);
  const auto master = config.monte_carlo.master_seed;
  seeds["watermarked_trials"] = std::to_string(derive_seed(master, kStreamWatermarkedTrials));
  seeds["plain_trials"] = std::to_string(derive_seed(master, kStreamPlainTrials));
  seeds["extraction"] = std::to_string(derive_seed(master, kStreamExtraction));
  RunRecorder run("sweep", config, manifest_for(out, "sweep"), {out}, std::move(seeds));
  run.commit({{out, sweep_csv(run_sweep(bundle, config))}});
  return kExitOk;
}

}  // namespace wmtrace
