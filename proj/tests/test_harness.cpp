#include <doctest.h>

#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace wmtrace;
namespace fs = std::filesystem;

namespace {

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "wmtrace");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) { return read_text_file(p.string()); }

std::vector<std::string> lines_of(const fs::path& p) { return read_lines(p.string()); }

/// Scratch project: a corpus of uniformly random tokens w00..w99 and a config
/// whose unigram watermark has strength near 0.02 nats.
struct Project {
  fs::path dir;
  fs::path config;

  explicit Project(const std::string& name, const std::string& extra = "") : dir(testing::scratch_dir(name)) {
    std::mt19937_64 gen(1);
    std::string corpus;
    for (int line = 0; line < 400; ++line) {
      for (int i = 0; i < 50; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "W%02d", static_cast<int>(gen() % 100));
        corpus += (i ? " " : "") + std::string(buf);
      }
      corpus += "\n";
    }
    testing::write_file(dir / "corpus.txt", corpus);
    config = dir / "exp.toml";
    testing::write_file(config, "[corpus]\npath = \"" + (dir / "corpus.txt").string() +
                                    "\"\n[model]\norder = 1\nalpha = 0.1\n"
                                    "[watermark]\nsigma = 0.002\nseed = 5\n"
                                    "[detector]\nalpha = 0.01\nbeta = 0.01\n"
                                    "[monte_carlo]\ntrials = 60\nsequence_length = 2000\nmaster_seed = 3\n"
                                    "[extraction]\nstudent_order = 1\nquery_tokens = 20000\nprobe_contexts = 300\n"
                                    "[generate]\nsequences = 100\nmax_tokens = 2000\nseed = 11\n"
                                    "[output]\ndir = \"" + (dir / "out").string() + "\"\n" + extra);
  }

  fs::path out(const std::string& name) const { return dir / "out" / name; }
  std::string cfg() const { return config.string(); }
};

}  // namespace

TEST_CASE("train writes a deterministic, round-tripping model") {
  Project p("train");
  REQUIRE(cli({"train", "--config", p.cfg()}) == 0);
  const auto first = slurp(p.out("model.json"));
  const auto model = NGramModel::from_json(nlohmann::json::parse(first));
  CHECK(model.vocabulary()->size() == 101);
  CHECK(nlohmann::json::parse(first) == model.to_json());
  REQUIRE(cli({"train", "--config", p.cfg()}) == 0);
  CHECK(slurp(p.out("model.json")) == first);

  const auto manifest = read_json_file(p.out("manifest_train.json").string());
  CHECK(manifest.at("status") == "ok");
  CHECK(manifest.at("command") == "train");
  CHECK(manifest.at("outputs").size() == 1);
  CHECK(manifest.at("wall_clock").at("elapsed_ms").is_number());
}

TEST_CASE("train on a tiny corpus round-trips") {
  auto dir = testing::scratch_dir("tiny");
  testing::write_file(dir / "c.txt", "the cat sat\nthe dog sat\na cat ran\n");
  testing::write_file(dir / "c.toml", "[corpus]\npath = \"" + (dir / "c.txt").string() + "\"\n[output]\ndir = \"" +
                                          (dir / "o").string() + "\"\n");
  REQUIRE(cli({"train", "--config", (dir / "c.toml").string()}) == 0);
  const auto model = NGramModel::from_json(read_json_file((dir / "o" / "model.json").string()));
  const auto again = NGramModel::from_json(model.to_json());
  const auto& v = *model.vocabulary();
  for (const auto& ctx : {TokenSequence{}, TokenSequence{v.lookup("the")}, TokenSequence{v.lookup("zebra")}}) {
    CHECK(again.next_distribution(ctx) == model.next_distribution(ctx));
  }
}

TEST_CASE("missing corpus fails validation, names the path, leaves no files") {
  auto dir = testing::scratch_dir("missing");
  const auto missing = (dir / "nowhere.txt").string();
  testing::write_file(dir / "c.toml",
                      "[corpus]\npath = \"" + missing + "\"\n[output]\ndir = \"" + (dir / "o").string() + "\"\n");
  CHECK(cli({"train", "--config", (dir / "c.toml").string()}) == kExitValidation);
  CHECK_FALSE(fs::exists(dir / "o" / "model.json"));
  CHECK_FALSE(fs::exists(dir / "o" / "manifest_train.json"));
  CommandOptions o;
  o.config_path = (dir / "c.toml").string();
  try {
    cmd_train(o);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(missing) != std::string::npos);
  }
  CHECK(cli({"train", "--config", (dir / "c.toml").string(), "--set", "detector.alpha=0.7"}) == kExitValidation);
  CHECK(cli({"train"}) == kExitValidation);
  CHECK(cli({"frobnicate", "--config", "x"}) == kExitValidation);
}

TEST_CASE("watermark bundles: zero-noise limit, self-consistency, seed dependence") {
  Project p("watermark");
  REQUIRE(cli({"train", "--config", p.cfg()}) == 0);

  REQUIRE(cli({"watermark", "--config", p.cfg(), "--set", "watermark.sigma=1e-12", "--output",
               p.out("quiet.json").string()}) == 0);
  const auto quiet = WatermarkBundle::from_json(read_json_file(p.out("quiet.json").string()));
  CHECK(quiet.strength_nats < 1e-6);

  REQUIRE(cli({"watermark", "--config", p.cfg(), "--set", "watermark.seed=1", "--output", p.out("s1.json").string(),
               "--export-noised"}) == 0);
  REQUIRE(cli({"watermark", "--config", p.cfg(), "--set", "watermark.seed=2", "--output",
               p.out("s2.json").string()}) == 0);
  const auto j1 = read_json_file(p.out("s1.json").string());
  const auto b1 = WatermarkBundle::from_json(j1);
  const auto b2 = WatermarkBundle::from_json(read_json_file(p.out("s2.json").string()));
  CHECK(b1.strength_nats > 0.0);
  CHECK(b2.strength_nats > 0.0);
  CHECK(b1.strength_nats != b2.strength_nats);
  CHECK(b1.strength_nats > 0.005);
  CHECK(b1.strength_nats < 0.06);

  // Recompute the strength from the bundle's stored tables only.
  const auto noised = noise_frequency(b1.model_freq, b1.key, b1.floor_epsilon);
  CHECK(std::abs(kl_divergence(noised.noised(), b1.model_freq.freq()) - b1.strength_nats) < 1e-12);
  const auto exported = j1.at("noised").get<std::vector<double>>();
  for (std::size_t i = 0; i < exported.size(); ++i) CHECK(exported[i] == noised.noised()(static_cast<Eigen::Index>(i)));
  const auto ratio = build_reweight_table(noised, b1.model_freq, b1.floor_epsilon).ratio();
  CHECK((ratio - b1.reweight->ratio()).cwiseAbs().maxCoeff() == 0.0);
  CHECK_FALSE(read_json_file(p.out("s2.json").string()).contains("noised"));
}

TEST_CASE("model-generated frequency source") {
  Project p("modelgen", "");
  REQUIRE(cli({"train", "--config", p.cfg()}) == 0);
  REQUIRE(cli({"watermark", "--config", p.cfg(), "--set", "watermark.frequency_source=model_generated", "--set",
               "watermark.frequency_tokens=5000"}) == 0);
  const auto j = read_json_file(p.out("bundle.json").string());
  CHECK(j.at("frequency_source") == "model_generated");
  const auto manifest = read_json_file(p.out("manifest_watermark.json").string());
  CHECK(manifest.at("seeds").contains("frequency_text_master"));
}

TEST_CASE("generate dispatches on model vs bundle and is reproducible") {
  Project p("generate");
  REQUIRE(cli({"train", "--config", p.cfg()}) == 0);
  REQUIRE(cli({"watermark", "--config", p.cfg()}) == 0);
  REQUIRE(cli({"generate", "--config", p.cfg(), "--set", "generate.sequences=7", "--set", "generate.max_tokens=30"}) ==
          0);
  const auto wm_text = slurp(p.out("generated.txt"));
  CHECK(lines_of(p.out("generated.txt")).size() == 7);
  REQUIRE(cli({"generate", "--config", p.cfg(), "--set", "generate.sequences=7", "--set", "generate.max_tokens=30"}) ==
          0);
  CHECK(slurp(p.out("generated.txt")) == wm_text);

  REQUIRE(cli({"generate", "--config", p.cfg(), "--model", p.out("model.json").string(), "--set",
               "generate.sequences=7", "--set", "generate.max_tokens=30", "--output", p.out("plain.txt").string()}) ==
          0);
  const auto plain_lines = lines_of(p.out("plain.txt"));
  CHECK(plain_lines.size() == 7);

  const auto bundle = WatermarkBundle::from_json(read_json_file(p.out("bundle.json").string()));
  const auto& vocab = *bundle.base->vocabulary();
  const auto expected_wm = generate(bundle.model(), GenerationConfig(30, derive_seed(11, 0)));
  const auto expected_plain = generate(*bundle.base, GenerationConfig(30, derive_seed(11, 0)));
  CHECK(lines_of(p.out("generated.txt")).front() == vocab.decode(expected_wm));
  CHECK(plain_lines.front() == vocab.decode(expected_plain));

  CHECK(cli({"generate", "--config", p.cfg(), "--set", "generate.stop_token=zzz"}) == kExitValidation);
  CHECK(cli({"generate", "--config", p.cfg(), "--model", p.out("model.json").string(), "--bundle",
             p.out("bundle.json").string()}) == kExitValidation);
}

TEST_CASE("detect: watermarked and plain files, empty file, concatenation") {
  Project p("detect");
  REQUIRE(cli({"train", "--config", p.cfg()}) == 0);
  REQUIRE(cli({"watermark", "--config", p.cfg()}) == 0);
  REQUIRE(cli({"generate", "--config", p.cfg()}) == 0);
  REQUIRE(cli({"generate", "--config", p.cfg(), "--model", p.out("model.json").string(), "--output",
               p.out("plain.txt").string()}) == 0);

  REQUIRE(cli({"detect", "--config", p.cfg()}) == 0);
  const auto wm_summary = read_json_file(p.out("detect_summary.json").string());
  CHECK(wm_summary.at("reports") == 100);
  CHECK(wm_summary.at("watermarked_rate").get<double>() >= 0.98);
  const auto wm_reports = slurp(p.out("detect.jsonl"));

  REQUIRE(cli({"detect", "--config", p.cfg(), "--input", p.out("plain.txt").string(), "--output",
               p.out("plain.jsonl").string()}) == 0);
  const auto plain_summary = read_json_file(p.out("plain_summary.json").string());
  CHECK(plain_summary.at("not_watermarked_rate").get<double>() >= 0.98);
  const auto plain_reports = slurp(p.out("plain.jsonl"));

  const auto first = lines_of(p.out("detect.jsonl"));
  REQUIRE_FALSE(first.empty());
  const auto report = nlohmann::json::parse(first.front());
  CHECK(report.at("b1").get<double>() == doctest::Approx(std::log(99.0)));
  CHECK(report.at("n1_expected").is_number());

  // Concatenating inputs concatenates per-line reports.
  testing::write_file(p.out("both.txt"), slurp(p.out("generated.txt")) + slurp(p.out("plain.txt")));
  REQUIRE(cli({"detect", "--config", p.cfg(), "--input", p.out("both.txt").string(), "--output",
               p.out("both.jsonl").string()}) == 0);
  CHECK(slurp(p.out("both.jsonl")) == wm_reports + plain_reports);

  testing::write_file(p.out("empty.txt"), "");
  REQUIRE(cli({"detect", "--config", p.cfg(), "--input", p.out("empty.txt").string(), "--output",
               p.out("empty.jsonl").string()}) == 0);
  CHECK(slurp(p.out("empty.jsonl")).empty());
  const auto empty_summary = read_json_file(p.out("empty_summary.json").string());
  CHECK(empty_summary.at("reports") == 0);
  CHECK(empty_summary.at("decision_counts").at("watermarked") == 0);
  CHECK(empty_summary.at("median_tokens_used").is_null());

  testing::write_file(p.out("bad.txt"), "w01 w02\nbad \xC3\nw03\n");
  REQUIRE(cli({"detect", "--config", p.cfg(), "--input", p.out("bad.txt").string(), "--output",
               p.out("bad.jsonl").string()}) == 0);
  const auto bad_summary = read_json_file(p.out("bad_summary.json").string());
  CHECK(bad_summary.at("skipped") == 1);
  CHECK(bad_summary.at("skipped_lines").at(0).at("line") == 2);
  CHECK(lines_of(p.out("bad.jsonl")).size() == 2);
}

TEST_CASE("detect with a foreign H1 model exits with the vocabulary-mismatch code") {
  Project p("mismatch");
  REQUIRE(cli({"train", "--config", p.cfg()}) == 0);
  REQUIRE(cli({"watermark", "--config", p.cfg()}) == 0);
  REQUIRE(cli({"generate", "--config", p.cfg(), "--set", "generate.sequences=2"}) == 0);
  auto foreign = testing::uniform_unigram(testing::numbered_vocabulary(5));
  testing::write_file(p.out("foreign.json"), foreign->to_json().dump());
  CHECK(cli({"detect", "--config", p.cfg(), "--h1", p.out("foreign.json").string(), "--output",
             p.out("x.jsonl").string()}) == kExitVocabularyMismatch);
  CHECK_FALSE(fs::exists(p.out("x.jsonl")));
  CHECK_FALSE(fs::exists(p.out("manifest_detect.json")));
}

TEST_CASE("attack-sim report and working-limit flag") {
  Project p("attack");
  REQUIRE(cli({"train", "--config", p.cfg()}) == 0);
  REQUIRE(cli({"watermark", "--config", p.cfg()}) == 0);
  REQUIRE(cli({"attack-sim", "--config", p.cfg(), "--bundle", p.out("bundle.json").string()}) == 0);
  const auto r = read_json_file(p.out("attack.json").string());
  for (const char* key : {"extraction_gap_nats", "b1", "b2", "n1_expected", "n2_expected", "student", "control",
                          "below_working_limit", "working_limit_nats"}) {
    CHECK(r.contains(key));
  }
  const double limit = r.at("b2").get<double>() / r.at("sequence_length").get<double>();
  CHECK(r.at("working_limit_nats").get<double>() == doctest::Approx(limit).epsilon(1e-15));
  CHECK(r.at("below_working_limit").get<bool>() == (r.at("extraction_gap_nats").get<double>() < limit));
  CHECK(r.at("student").at("watermarked_rate").get<double>() > r.at("control").at("watermarked_rate").get<double>());

  // Exercise both branches of the flag through the library.
  const auto bundle = WatermarkBundle::from_json(read_json_file(p.out("bundle.json").string()));
  for (std::size_t length : {std::size_t{50}, std::size_t{1000000}}) {
    ExperimentConfig c = load_config(p.cfg());
    c.monte_carlo.sequence_length = length;
    c.monte_carlo.trials = 2;
    const auto report = run_attack_simulation(bundle, c);
    CHECK(report.below_working_limit == (report.extraction_gap_nats < report.bounds.b2 / length));
    if (length == 50) CHECK(report.below_working_limit);
    else CHECK_FALSE(report.below_working_limit);
  }
}

TEST_CASE("sweep csv schema and sample-size agreement") {
  Project p("sweep");
  REQUIRE(cli({"train", "--config", p.cfg()}) == 0);
  REQUIRE(cli({"sweep", "--config", p.cfg(), "--set", "sweep.values=[0.001,0.002,0.004]", "--set",
               "monte_carlo.trials=100", "--set", "monte_carlo.sequence_length=6000"}) == 0);
  const auto rows = lines_of(p.out("sweep.csv"));
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "axis_value,strength_nats,n1_pred,n2_pred,empirical_fpr,empirical_fnr,median_tokens_to_decision");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::vector<std::string> cells;
    std::stringstream ss(rows[i]);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    REQUIRE(cells.size() == 7);
    const double n2 = std::stod(cells[3]);
    const double median_tokens = std::stod(cells[6]);
    CHECK(median_tokens >= n2 / 3.0);
    CHECK(median_tokens <= n2 * 3.0);
  }

  REQUIRE(cli({"sweep", "--config", p.cfg(), "--set", "sweep.axis=query_tokens", "--set",
               "sweep.values=[2000,20000]", "--set", "monte_carlo.trials=20", "--output",
               p.out("q.csv").string()}) == 0);
  CHECK(lines_of(p.out("q.csv")).size() == 3);
  REQUIRE(cli({"sweep", "--config", p.cfg(), "--set", "sweep.axis=sequence_length", "--set", "sweep.values=[100,400]",
               "--set", "monte_carlo.trials=20", "--output", p.out("l.csv").string()}) == 0);
  CHECK(lines_of(p.out("l.csv")).size() == 3);
}

TEST_CASE("sigma sweep: strength increases on average over seeds") {
  auto base = testing::uniform_unigram(testing::numbered_vocabulary(100));
  const FrequencyTable freq(base->vocabulary(), base->next_distribution({}));
  std::vector<double> mean(3, 0.0);
  const double sigmas[] = {0.0005, 0.001, 0.002};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (int k = 0; k < 3; ++k) {
      mean[k] += make_bundle(base, freq, WatermarkKey(seed, sigmas[k]), 1e-8, FrequencySource::Corpus).strength_nats;
    }
  }
  CHECK(mean[0] < mean[1]);
  CHECK(mean[1] < mean[2]);
}
