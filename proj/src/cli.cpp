#include <iostream>

#include <CLI11.hpp>

#include "wmtrace/harness.hpp"

namespace wmtrace {

namespace {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::VocabularyMismatch:
      return kExitVocabularyMismatch;
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidRates:
    case ErrorKind::InvalidVocabulary:
    case ErrorKind::Parse:
    case ErrorKind::Io:
    case ErrorKind::EmptyCorpus:
      return kExitValidation;
    default:
      return kExitRuntime;
  }
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"wmtrace: frequency-noise watermarking, detection and extraction simulation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  CommandOptions options;
  struct Sub {
    const char* name;
    const char* help;
    int (*run)(const CommandOptions&);
  };
  const Sub subs[] = {
      {"train", "train an n-gram model on the configured corpus", cmd_train},
      {"watermark", "build a watermark bundle for a trained model", cmd_watermark},
      {"generate", "sample text from a model or a watermark bundle", cmd_generate},
      {"detect", "run the sequential detector on every line of a text file", cmd_detect},
      {"attack-sim", "simulate an extraction attack and detect the student", cmd_attack_sim},
      {"sweep", "sweep sigma, sequence length or query budget; write CSV", cmd_sweep},
  };
  int (*selected)(const CommandOptions&) = nullptr;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", options.config_path, "experiment config file")->required();
    sub->add_option("--set", options.overrides, "override, section.key=value (repeatable)");
    sub->add_option("--model", options.model_path, "serialized n-gram model");
    sub->add_option("--bundle", options.bundle_path, "watermark bundle");
    sub->add_option("--h1", options.h1_path, "alternative-hypothesis model (detect)");
    sub->add_option("--input", options.input_path, "input text file (detect)");
    sub->add_option("--output", options.output_path, "primary output path");
    sub->add_flag("--export-noised", options.export_noised, "include the noised frequency vector in the bundle");
    sub->callback([&selected, run = s.run] { selected = run; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    return selected(options);
  } catch (const Error& e) {
    std::cerr << "wmtrace: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "wmtrace: malformed JSON input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "wmtrace: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace wmtrace
