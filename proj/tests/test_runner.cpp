#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "tgeval/config.hpp"
#include "tgeval/mock_server.hpp"
#include "tgeval/runner.hpp"

using namespace tgeval;
using tgtest::TempDir;
using tgtest::make_synthetic_dataset;
using tgtest::read_text_file;
namespace fs = std::filesystem;

namespace {

ExperimentConfig experiment_for(const tgtest::SyntheticDataset& data,
                                const std::string& url,
                                const fs::path& workdir) {
  ExperimentConfig cfg;
  cfg.dataset = data.descriptor;
  cfg.sampling.num_frames = 4;
  cfg.client.endpoint_url = url;
  cfg.client.model_name = "mock-model";
  cfg.client.api_key_env = "TGEVAL_TEST_KEY_UNSET";
  cfg.client.num_runs = 2;
  cfg.client.request_parallelism = 3;
  cfg.client.cache_dir = (workdir / "cache").string();
  cfg.client.retry.max_attempts = 2;
  cfg.client.retry.backoff_ms = {1};
  cfg.output_dir = (workdir / "out").string();
  cfg.progress = false;
  return cfg;
}

MockServer start_mock(const tgtest::SyntheticDataset& data, MockMode mode) {
  MockServerConfig cfg;
  cfg.mode = mode;
  cfg.samples = data.samples;
  return MockServer(std::move(cfg));
}

}  // namespace

TEST_CASE("echoed ground truth scores perfectly end to end") {
  TempDir dir("echo");
  const auto data =
      make_synthetic_dataset(dir.path() / "data", 6, Task::MomentRetrieval);
  auto server = start_mock(data, MockMode::EchoGroundTruth);
  ExperimentConfig cfg = experiment_for(data, server.url(), dir.path());

  const ExperimentResult result = run_experiment(cfg);
  CHECK(result.n_samples == 6);
  CHECK(result.report.n_samples == 6);
  CHECK(result.report.n_failed_parses == 0);
  CHECK(result.report.r1_at.at(0.5) == doctest::Approx(100.0));
  CHECK(result.report.r1_at.at(0.7) == doctest::Approx(100.0));
  CHECK(result.report.miou == doctest::Approx(100.0));
  CHECK(result.report.map_avg == doctest::Approx(100.0));
  CHECK(result.run_reports.size() == 2);

  // Cold cache: one request per sample per run.
  CHECK(result.client_stats.http_requests == 12);
  CHECK(result.client_stats.cache_hits == 0);
  CHECK(server.request_count() == 12);

  // Output files exist and the raw dir holds one file per sample per run.
  const fs::path out(cfg.output_dir);
  CHECK(fs::exists(out / "report.txt"));
  CHECK(fs::exists(out / "report.csv"));
  CHECK(fs::exists(out / "per_sample.csv"));
  CHECK(fs::exists(out / "config.toml"));
  int raw_files = 0;
  for (const auto& entry : fs::directory_iterator(out / "raw")) {
    (void)entry;
    ++raw_files;
  }
  CHECK(raw_files == 12);

  // Warm cache: no new requests, byte-identical reports.
  const std::string report_text = read_text_file(out / "report.txt");
  const std::string report_csv = read_text_file(out / "report.csv");
  const ExperimentResult again = run_experiment(cfg);
  CHECK(again.client_stats.http_requests == 0);
  CHECK(again.client_stats.cache_hits == 12);
  CHECK(server.request_count() == 12);
  CHECK(read_text_file(out / "report.txt") == report_text);
  CHECK(read_text_file(out / "report.csv") == report_csv);
}

TEST_CASE("disjoint answers score zero recall") {
  TempDir dir("disjoint");
  const auto data =
      make_synthetic_dataset(dir.path() / "data", 5, Task::MomentRetrieval);
  auto server = start_mock(data, MockMode::DisjointWindows);
  ExperimentConfig cfg = experiment_for(data, server.url(), dir.path());

  const ExperimentResult result = run_experiment(cfg);
  CHECK(result.report.r1_at.at(0.5) == doctest::Approx(0.0));
  CHECK(result.report.miou == doctest::Approx(0.0));
  CHECK(result.report.map_avg == doctest::Approx(0.0));
  CHECK(result.report.n_failed_parses == 0);
}

TEST_CASE("grounded-QA runs report answer accuracies") {
  TempDir dir("gqa_run");
  const auto data =
      make_synthetic_dataset(dir.path() / "data", 6, Task::GroundedQA);
  auto server = start_mock(data, MockMode::EchoGroundTruth);
  ExperimentConfig cfg = experiment_for(data, server.url(), dir.path());

  const ExperimentResult result = run_experiment(cfg);
  REQUIRE(result.report.a_qa.has_value());
  REQUIRE(result.report.a_gqa.has_value());
  CHECK(*result.report.a_qa == doctest::Approx(100.0));
  CHECK(*result.report.a_gqa == doctest::Approx(100.0));
  CHECK(result.report.miop == doctest::Approx(100.0));
}

TEST_CASE("sample limits cut the batch deterministically") {
  TempDir dir("limit");
  const auto data =
      make_synthetic_dataset(dir.path() / "data", 6, Task::MomentRetrieval);
  auto server = start_mock(data, MockMode::EchoGroundTruth);
  ExperimentConfig cfg = experiment_for(data, server.url(), dir.path());
  cfg.sample_limit = 2;
  cfg.client.num_runs = 1;

  const ExperimentResult result = run_experiment(cfg);
  CHECK(result.n_samples == 2);
  CHECK(result.client_stats.http_requests == 2);
}

TEST_CASE("experiment configuration errors are configuration errors") {
  TempDir dir("badcfg");
  const auto data =
      make_synthetic_dataset(dir.path() / "data", 3, Task::MomentRetrieval);
  ExperimentConfig cfg =
      experiment_for(data, "http://127.0.0.1:1/v1/chat/completions",
                     dir.path());

  ExperimentConfig no_out = cfg;
  no_out.output_dir.clear();
  CHECK_THROWS_AS(run_experiment(no_out), ConfigError);

  ExperimentConfig jitter = cfg;
  jitter.sampling.mode = SamplingMode::JitteredRandom;
  CHECK_THROWS_AS(run_experiment(jitter), ConfigError);
}

TEST_CASE("per-video fps derives the frame count") {
  TempDir dir("fps");
  const auto data =
      make_synthetic_dataset(dir.path() / "data", 2, Task::MomentRetrieval);
  auto server = start_mock(data, MockMode::EchoGroundTruth);
  ExperimentConfig cfg = experiment_for(data, server.url(), dir.path());
  cfg.sampling.num_frames = 0;
  cfg.fps = 0.25;
  cfg.client.num_runs = 1;

  const ExperimentResult result = run_experiment(cfg);
  CHECK(result.n_samples == 2);
  // Durations 24 and 32 at 0.25 fps give 6 and 8 frames; the per-sample rows
  // only prove the run went through, the counts are covered by raw traffic.
  CHECK(result.client_stats.http_requests == 2);
}

TEST_CASE("ablation rows reproduce the single-run report") {
  TempDir dir("ablation");
  const auto data =
      make_synthetic_dataset(dir.path() / "data", 4, Task::MomentRetrieval);
  auto server = start_mock(data, MockMode::EchoGroundTruth);
  ExperimentConfig cfg = experiment_for(data, server.url(), dir.path());
  cfg.client.num_runs = 1;
  cfg.output_dir = (dir.path() / "ablation_out").string();

  AblationMatrix matrix;
  matrix.rows = {{"abs-int-interleaved", cfg.style}};
  const AblationResult ablation = run_ablation(cfg, matrix);
  REQUIRE(ablation.rows.size() == 1);
  CHECK(ablation.failures.empty());
  CHECK(fs::exists(fs::path(cfg.output_dir) / "ablation.txt"));
  CHECK(fs::exists(fs::path(cfg.output_dir) / "ablation.csv"));

  ExperimentConfig single = cfg;
  single.output_dir = (dir.path() / "single_out").string();
  const ExperimentResult direct = run_experiment(single);
  CHECK(ablation.rows[0].second.report.miou ==
        doctest::Approx(direct.report.miou));
  CHECK(ablation.rows[0].second.report.map_avg ==
        doctest::Approx(direct.report.map_avg));
}

TEST_CASE("failing ablation rows are recorded and skipped") {
  TempDir dir("ablation_fail");
  const auto data =
      make_synthetic_dataset(dir.path() / "data", 3, Task::MomentRetrieval);
  auto server = start_mock(data, MockMode::EchoGroundTruth);
  ExperimentConfig cfg = experiment_for(data, server.url(), dir.path());
  cfg.client.num_runs = 1;
  cfg.output_dir = (dir.path() / "ab_out").string();

  // Echo renders integer seconds; relative styles still parse, so to force a
  // failure the second row points at a dataset path that does not exist.
  AblationMatrix matrix;
  matrix.rows = {{"ok", cfg.style}};
  ExperimentConfig broken = cfg;
  broken.dataset.annotation_path = (dir.path() / "missing.jsonl").string();
  const AblationResult ok_result = run_ablation(cfg, matrix);
  CHECK(ok_result.failures.empty());
  const AblationResult bad_result = run_ablation(broken, matrix);
  CHECK(bad_result.rows.empty());
  REQUIRE(bad_result.failures.size() == 1);
  CHECK(bad_result.failures[0].first == "ok");
}

TEST_CASE("the built-in matrices cover the documented rows") {
  const auto styles = style_matrix();
  REQUIRE(styles.rows.size() == 6);
  CHECK(styles.rows[0].label == "rel-dec-appended");
  CHECK(styles.rows[5].label == "abs-int-interleaved");
  int appended = 0;
  for (const auto& row : styles.rows) {
    if (row.style.placement == TimestampPlacement::Appended) ++appended;
    CHECK(row.style.include_timestamps);
    CHECK(row.style.include_duration);
  }
  CHECK(appended == 4);

  const auto components = prompt_component_matrix();
  REQUIRE(components.rows.size() == 4);
  CHECK(!components.rows[0].style.include_timestamps);
  CHECK(!components.rows[0].style.include_duration);
  CHECK(components.rows[3].style.include_timestamps);
  CHECK(components.rows[3].style.include_duration);
}

TEST_CASE("rescoring raw completions reproduces the report") {
  TempDir dir("rescore");
  const auto data =
      make_synthetic_dataset(dir.path() / "data", 4, Task::MomentRetrieval);
  auto server = start_mock(data, MockMode::EchoGroundTruth);
  ExperimentConfig cfg = experiment_for(data, server.url(), dir.path());

  const ExperimentResult original = run_experiment(cfg);
  const MetricsReport rescored =
      rescore_raw_dir(cfg, (fs::path(cfg.output_dir) / "raw").string());
  CHECK(rescored.miou == doctest::Approx(original.report.miou));
  CHECK(rescored.map_avg == doctest::Approx(original.report.map_avg));
  CHECK(rescored.r1_at.at(0.5) ==
        doctest::Approx(original.report.r1_at.at(0.5)));
  CHECK(rescored.n_failed_parses == original.report.n_failed_parses);

  CHECK_THROWS_AS(
      rescore_raw_dir(cfg, (dir.path() / "not_raw").string()),
      std::runtime_error);
}

TEST_CASE("training export writes prompt, frames, and target per record") {
  TempDir dir("export");
  auto data =
      make_synthetic_dataset(dir.path() / "data", 3, Task::MomentRetrieval);
  data.descriptor.split = Split::Train;
  ExperimentConfig cfg =
      experiment_for(data, "http://127.0.0.1:1/v1/chat/completions",
                     dir.path());
  cfg.sampling.mode = SamplingMode::JitteredRandom;
  cfg.sampling.seed = 11;

  const std::string out_path = (dir.path() / "train.jsonl").string();
  export_training_sequences(cfg, out_path);

  std::ifstream in(out_path);
  REQUIRE(in.good());
  std::string line;
  int n_lines = 0;
  std::vector<std::string> texts;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++n_lines;
    const auto record = nlohmann::json::parse(line);
    CHECK(record.at("video_id").is_string());
    CHECK(record.at("duration_s").is_number());
    const std::string text = record.at("text").get<std::string>();
    CHECK(text.find("\xE2\x9F\xA6IMG:1\xE2\x9F\xA7") != std::string::npos);
    texts.push_back(text);
    REQUIRE(record.at("frames").is_array());
    CHECK(record.at("frames").size() == 4);
    CHECK(record.at("frames")[0].at("path").is_string());
    const std::string target = record.at("target").get<std::string>();
    CHECK(target.front() == '[');
    CHECK(target.back() == ']');
  }
  CHECK(n_lines == 3);

  // The per-record seed offset de-correlates the jitter across records.
  CHECK(texts[0] != texts[1]);

  // Re-export is deterministic under the same seed.
  const std::string out2 = (dir.path() / "train2.jsonl").string();
  export_training_sequences(cfg, out2);
  CHECK(read_text_file(out_path) == read_text_file(out2));

  ExperimentConfig not_train = cfg;
  not_train.dataset.split = Split::Val;
  CHECK_THROWS_AS(export_training_sequences(not_train, out_path), ConfigError);
}

TEST_CASE("report renderers are stable and complete") {
  MetricsReport report;
  report.n_samples = 4;
  report.n_failed_parses = 1;
  report.r1_at = {{0.5, 62.5}, {0.7, 50.0}};
  report.miou = 55.25;
  report.map_at = {{0.5, 40.0}, {0.75, 30.0}, {0.95, 10.0}};
  report.map_avg = 26.666666;
  report.miop = 61.0;
  report.iop_at = {{0.5, 58.0}, {0.7, 41.0}};
  MetricsConfig cfg;
  cfg.map_thresholds = {0.5, 0.75, 0.95};

  const std::string text = format_report_text(report, cfg);
  CHECK(text.find("samples: 4") != std::string::npos);
  CHECK(text.find("failed parses: 1") != std::string::npos);
  CHECK(text.find("R1@0.50: 62.50") != std::string::npos);
  CHECK(text.find("R1@0.70: 50.00") != std::string::npos);
  CHECK(text.find("mIoU: 55.25") != std::string::npos);
  CHECK(text.find("mAP@0.50: 40.00") != std::string::npos);
  CHECK(text.find("mAP@avg: 26.67") != std::string::npos);
  CHECK(text.find("A@QA") == std::string::npos);
  CHECK(text.back() == '\n');

  report.a_qa = 70.0;
  report.a_gqa = 60.0;
  const std::string with_qa = format_report_text(report, cfg);
  CHECK(with_qa.find("A@QA: 70.00") != std::string::npos);
  CHECK(with_qa.find("A@GQA: 60.00") != std::string::npos);

  const std::string csv = format_report_csv(report);
  CHECK(csv.rfind("n_samples,n_failed_parses", 0) == 0);
  CHECK(csv.find("r1@0.50") != std::string::npos);
  CHECK(csv.find("\n4,1,") != std::string::npos);
  CHECK(csv.back() == '\n');
}
