#pragma once

// End-to-end orchestration: dataset -> frame sampling -> prompt -> client ->
// parser -> metrics, plus the ablation driver over timestamp styles and the
// training-sequence exporter.

#include <string>
#include <utility>
#include <vector>

#include "tgeval/blueprint.hpp"
#include "tgeval/client.hpp"
#include "tgeval/datasets.hpp"
#include "tgeval/metrics.hpp"
#include "tgeval/parsing.hpp"
#include "tgeval/sampling.hpp"

namespace tgeval {

// How a per-video frame count is derived from duration * fps.
enum class FpsRounding { Floor, Ceil, Nearest };

struct ParseOptions {
  std::string answer_marker = "ANSWER:";
  int max_windows = 50;
  bool take_first_only = false;
};

struct ExperimentConfig {
  DatasetDescriptor dataset;
  // sampling.num_frames == 0 picks the default frame budget: 20 when the
  // dataset's mean duration is at most 60 seconds, 60 otherwise.
  SamplingConfig sampling{0, SamplingMode::Uniform, std::nullopt};
  // fps > 0 overrides num_frames with a per-video count derived from the
  // video duration (at least 1 frame).
  double fps = 0.0;
  FpsRounding fps_rounding = FpsRounding::Nearest;
  TimestampStyle style;
  // tmpl.task_prompt empty selects the built-in default template for the
  // dataset's task.
  PromptTemplate tmpl;
  ClientConfig client;
  MetricsConfig metrics;
  ParseOptions parse;
  int sample_limit = 0;  // 0 keeps every sample
  std::string output_dir;
  // Scratch dir for command-based frame providers.
  std::string frames_cache_dir;
  std::string run_label;
  bool progress = true;
};

struct ExperimentResult {
  MetricsReport report;  // averaged over runs
  std::vector<MetricsReport> run_reports;
  Client::Stats client_stats;
  int n_samples = 0;
};

// Runs the full pipeline and writes into cfg.output_dir: report.txt,
// report.csv, per_sample.csv (one row per sample per run), raw/ (one file
// per sample per run, exact completion bytes), and config.toml (the
// canonical snapshot). Rerunning with a warm cache reproduces the report
// files byte-identically. Throws ConfigError for non-Uniform sampling or a
// missing output_dir; client and ingestion errors propagate.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct AblationRow {
  std::string label;
  TimestampStyle style;
};

struct AblationMatrix {
  std::vector<AblationRow> rows;
};

// Six styles crossing representation x precision x placement as exercised in
// the timestamp-design comparison: four appended rows (rel/abs x dec/int)
// and two interleaved integer rows.
AblationMatrix style_matrix();

// Four rows toggling the duration sentence and the timestamps on top of
// absolute/integer interleaved rendering: frames-only, duration,
// timestamps, duration+timestamps.
AblationMatrix prompt_component_matrix();

struct AblationResult {
  std::vector<std::pair<std::string, ExperimentResult>> rows;
  std::vector<std::pair<std::string, std::string>> failures;  // label, error
};

// run_experiment once per row (style swapped in, output under
// <output_dir>/<label>, shared response cache); a failing row is recorded
// and skipped. Writes ablation.csv and ablation.txt into cfg.output_dir.
AblationResult run_ablation(const ExperimentConfig& base,
                            const AblationMatrix& matrix);

// Writes one JSONL record per sample: rendered prompt text with image-slot
// placeholders, the sampled frames (index, timestamp, resolved path), and
// the nested-list target string in the configured style. Requires a Train
// split; jittered sampling allowed (a configured seed is offset by the
// record index so samples de-correlate). Throws ConfigError on a non-Train
// split.
void export_training_sequences(const ExperimentConfig& cfg,
                               const std::string& out_path);

// Re-parses the raw completions of a previous run (raw_dir holding
// NNNNN_rK.txt files) and recomputes the averaged report without any
// network use. The dataset portion of cfg must match the original run.
MetricsReport rescore_raw_dir(const ExperimentConfig& cfg,
                              const std::string& raw_dir);

// Report renderers; both end with a newline and contain nothing
// run-specific beyond the metric values, so byte comparison across reruns
// is meaningful.
std::string format_report_text(const MetricsReport& report,
                               const MetricsConfig& cfg);
std::string format_report_csv(const MetricsReport& report);

std::string format_ablation_text(const AblationResult& result,
                                 const MetricsConfig& cfg);
std::string format_ablation_csv(const AblationResult& result,
                                const MetricsConfig& cfg);

}  // namespace tgeval
