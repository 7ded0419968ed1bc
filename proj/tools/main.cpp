// Command-line front door: eval, ablate, export-train, rescore, mock-serve.
// Exit codes: 0 success, 1 configuration problem, 2 runtime failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "tgeval/config.hpp"
#include "tgeval/mock_server.hpp"
#include "tgeval/runner.hpp"

namespace fs = std::filesystem;
using namespace tgeval;

namespace {

// Shorthand for the four representation/precision combinations.
void apply_style_shorthand(ConfigMap& map, const std::string& shorthand) {
  std::string rep;
  std::string prec;
  if (shorthand == "abs-int") {
    rep = "absolute";
    prec = "integer";
  } else if (shorthand == "abs-dec") {
    rep = "absolute";
    prec = "decimal";
  } else if (shorthand == "rel-int") {
    rep = "relative";
    prec = "integer";
  } else if (shorthand == "rel-dec") {
    rep = "relative";
    prec = "decimal";
  } else {
    throw ConfigError("--style must be one of abs-int, abs-dec, rel-int, "
                      "rel-dec; got " + shorthand);
  }
  map["style.representation"] = rep;
  map["style.precision"] = prec;
}

ConfigMap load_with_overrides(const std::string& config_path,
                              const std::vector<std::string>& overrides) {
  ConfigMap map =
      config_path.empty() ? ConfigMap{} : load_config_file(config_path);
  for (const auto& assignment : overrides) {
    apply_override(map, assignment);
  }
  return map;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Timestamp-prompt evaluation harness for video temporal "
               "grounding"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string matrix_name = "styles";
  std::string export_out;
  std::string raw_dir;
  std::string style_shorthand;

  auto add_common = [&](CLI::App* cmd, bool config_required) {
    auto* opt = cmd->add_option("--config", config_path,
                                "Experiment config file");
    if (config_required) opt->required();
    cmd->add_option("--override", overrides,
                    "dotted.key=value settings applied after --config");
  };

  auto* eval_cmd =
      app.add_subcommand("eval", "Run one evaluation and report metrics");
  add_common(eval_cmd, true);

  auto* ablate_cmd = app.add_subcommand(
      "ablate", "Run the timestamp-design ablation matrix");
  add_common(ablate_cmd, true);
  ablate_cmd->add_option("--matrix", matrix_name,
                         "Matrix preset: styles (6 timestamp styles) or "
                         "components (duration/timestamp toggles)");

  auto* export_cmd = app.add_subcommand(
      "export-train", "Write training sequences as JSONL");
  add_common(export_cmd, true);
  export_cmd->add_option("--out", export_out, "Output JSONL path")
      ->required();

  auto* rescore_cmd = app.add_subcommand(
      "rescore", "Re-parse cached raw completions and recompute metrics");
  add_common(rescore_cmd, false);
  rescore_cmd->add_option("--raw-dir", raw_dir, "raw/ directory of a past run")
      ->required();
  rescore_cmd->add_option("--style", style_shorthand,
                          "Override timestamp style: abs-int, abs-dec, "
                          "rel-int, rel-dec");

  int mock_port = 8080;
  std::string mock_mode = "echo-gt";
  std::string mock_dataset;
  std::string mock_task = "moment-retrieval";
  std::string mock_fixed = "[[0, 1]]";
  std::string mock_script;
  std::string mock_style = "abs-int";
  auto* mock_cmd = app.add_subcommand(
      "mock-serve", "Serve the bundled mock chat-completions endpoint");
  mock_cmd->add_option("--port", mock_port, "Listen port");
  mock_cmd->add_option("--mode", mock_mode,
                       "echo-gt, disjoint, fixed, or scripted");
  mock_cmd->add_option("--dataset", mock_dataset,
                       "Canonical JSONL annotations for the echo modes");
  mock_cmd->add_option("--task", mock_task,
                       "moment-retrieval or grounded-qa (echo-mode lookup)");
  mock_cmd->add_option("--fixed", mock_fixed, "Response for fixed mode");
  mock_cmd->add_option("--script", mock_script,
                       "JSONL match/response script for scripted mode");
  mock_cmd->add_option("--style", mock_style,
                       "Rendering style for echoed windows: abs-int, "
                       "abs-dec, rel-int, rel-dec");

  try {
    app.parse(argc, argv);

    if (*eval_cmd) {
      ConfigMap map = load_with_overrides(config_path, overrides);
      const ExperimentConfig cfg = build_experiment_config(map);
      const ExperimentResult result = run_experiment(cfg);
      std::fputs(format_report_text(result.report, cfg.metrics).c_str(),
                 stdout);
      std::fprintf(stderr, "results written to %s\n", cfg.output_dir.c_str());
    } else if (*ablate_cmd) {
      ConfigMap map = load_with_overrides(config_path, overrides);
      const ExperimentConfig cfg = build_experiment_config(map);
      AblationMatrix matrix;
      if (matrix_name == "styles") {
        matrix = style_matrix();
      } else if (matrix_name == "components") {
        matrix = prompt_component_matrix();
      } else {
        throw ConfigError("--matrix must be styles or components; got " +
                          matrix_name);
      }
      const AblationResult result = run_ablation(cfg, matrix);
      std::fputs(format_ablation_text(result, cfg.metrics).c_str(), stdout);
      std::fprintf(stderr, "results written to %s\n", cfg.output_dir.c_str());
    } else if (*export_cmd) {
      ConfigMap map = load_with_overrides(config_path, overrides);
      const ExperimentConfig cfg = build_experiment_config(map);
      export_training_sequences(cfg, export_out);
      std::fprintf(stderr, "sequences written to %s\n", export_out.c_str());
    } else if (*rescore_cmd) {
      std::string effective_config = config_path;
      if (effective_config.empty()) {
        effective_config =
            (fs::path(raw_dir).parent_path() / "config.toml").string();
      }
      ConfigMap map = load_with_overrides(effective_config, overrides);
      if (!style_shorthand.empty()) {
        apply_style_shorthand(map, style_shorthand);
      }
      const ExperimentConfig cfg = build_experiment_config(map);
      const MetricsReport report = rescore_raw_dir(cfg, raw_dir);
      std::fputs(format_report_text(report, cfg.metrics).c_str(), stdout);
    } else if (*mock_cmd) {
      MockServerConfig cfg;
      cfg.port = mock_port;
      if (mock_mode == "echo-gt") {
        cfg.mode = MockMode::EchoGroundTruth;
      } else if (mock_mode == "disjoint") {
        cfg.mode = MockMode::DisjointWindows;
      } else if (mock_mode == "fixed") {
        cfg.mode = MockMode::Fixed;
      } else if (mock_mode == "scripted") {
        cfg.mode = MockMode::Scripted;
      } else {
        throw ConfigError("--mode must be echo-gt, disjoint, fixed, or "
                          "scripted; got " + mock_mode);
      }
      {
        ConfigMap style_map;
        apply_style_shorthand(style_map, mock_style);
        // Reuse the config plumbing to materialize the style struct.
        cfg.style = build_experiment_config(style_map).style;
      }
      if (cfg.mode == MockMode::EchoGroundTruth ||
          cfg.mode == MockMode::DisjointWindows) {
        if (mock_dataset.empty()) {
          throw ConfigError("echo modes need --dataset annotations");
        }
        DatasetDescriptor desc;
        desc.name = "mock";
        desc.annotation_path = mock_dataset;
        desc.format = AnnotationFormat::Canonical;
        if (mock_task == "moment-retrieval") {
          desc.task = Task::MomentRetrieval;
        } else if (mock_task == "grounded-qa") {
          desc.task = Task::GroundedQA;
        } else {
          throw ConfigError("--task must be moment-retrieval or grounded-qa");
        }
        cfg.samples = load_annotations(desc).samples;
      }
      cfg.fixed_response = mock_fixed;
      if (cfg.mode == MockMode::Scripted) {
        if (mock_script.empty()) {
          throw ConfigError("scripted mode needs --script");
        }
        cfg.script = load_mock_script(mock_script);
      }
      MockServer server(std::move(cfg));
      std::fprintf(stderr, "mock endpoint listening at %s\n",
                   server.url().c_str());
      while (true) {
        std::this_thread::sleep_for(std::chrono::seconds(1));
      }
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
