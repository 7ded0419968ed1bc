#include "tgeval/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "tgeval/config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tgeval {

namespace {

std::string format_double(double v) {
  char buf[64];
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    std::snprintf(buf, sizeof(buf), "%.0f", v);
    return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  if (std::strtod(buf, nullptr) == v) return buf;
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string threshold_label(double tau) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", tau);
  return buf;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string out = "\"";
  for (const char c : value) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  return out + "\"";
}

std::string windows_text(const std::vector<TimeInterval>& windows) {
  std::string out = "[";
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (i > 0) out += ", ";
    out += "[" + format_double(windows[i].start_s) + ", " +
           format_double(windows[i].end_s) + "]";
  }
  return out + "]";
}

PromptTemplate effective_template(const ExperimentConfig& cfg) {
  if (!cfg.tmpl.task_prompt.empty()) return cfg.tmpl;
  return default_template(cfg.dataset.task);
}

int frame_count_for(const ExperimentConfig& cfg, double duration_s,
                    double mean_duration_s) {
  if (cfg.fps > 0.0) {
    const double x = duration_s * cfg.fps;
    long long f = 0;
    switch (cfg.fps_rounding) {
      case FpsRounding::Floor: f = static_cast<long long>(std::floor(x)); break;
      case FpsRounding::Ceil: f = static_cast<long long>(std::ceil(x)); break;
      case FpsRounding::Nearest:
        f = static_cast<long long>(std::floor(x + 0.5));
        break;
    }
    return static_cast<int>(std::max<long long>(1, f));
  }
  if (cfg.sampling.num_frames > 0) return cfg.sampling.num_frames;
  return mean_duration_s <= 60.0 ? 20 : 60;
}

std::vector<AnnotationSample> load_limited(const ExperimentConfig& cfg,
                                           std::vector<std::string>* warnings) {
  LoadResult loaded = load_annotations(cfg.dataset);
  if (warnings) *warnings = std::move(loaded.warnings);
  std::vector<AnnotationSample> samples = std::move(loaded.samples);
  if (cfg.sample_limit > 0 &&
      samples.size() > static_cast<std::size_t>(cfg.sample_limit)) {
    samples.resize(static_cast<std::size_t>(cfg.sample_limit));
  }
  return samples;
}

double mean_duration(const std::vector<AnnotationSample>& samples) {
  double sum = 0.0;
  for (const auto& s : samples) sum += s.duration_s;
  return sum / static_cast<double>(samples.size());
}

std::string raw_file_name(std::size_t index, int run) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%05zu_r%d.txt", index, run);
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << content;
}

ParseConfig parse_config_for(const ExperimentConfig& cfg,
                             const AnnotationSample& sample) {
  ParseConfig pc;
  pc.style = cfg.style;
  pc.duration_s = sample.duration_s;
  pc.answer_marker = cfg.parse.answer_marker;
  pc.max_windows = cfg.parse.max_windows;
  pc.take_first_only = cfg.parse.take_first_only;
  return pc;
}

std::vector<MetricsReport> per_run_reports(
    const std::vector<AnnotationSample>& samples,
    const std::vector<std::vector<Prediction>>& preds, int num_runs,
    const MetricsConfig& metrics) {
  std::vector<MetricsReport> reports;
  reports.reserve(static_cast<std::size_t>(num_runs));
  for (int r = 0; r < num_runs; ++r) {
    std::vector<std::pair<AnnotationSample, Prediction>> rows;
    rows.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      rows.emplace_back(samples[i], preds[i][static_cast<std::size_t>(r)]);
    }
    reports.push_back(compute_report(rows, metrics));
  }
  return reports;
}

std::string per_sample_csv(const std::vector<AnnotationSample>& samples,
                           const std::vector<std::vector<Prediction>>& preds,
                           int num_runs) {
  std::string out =
      "index,run,video_id,duration_s,parse_status,answer,answer_correct,"
      "top1_iou,top1_iop,windows\n";
  char buf[64];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const AnnotationSample& s = samples[i];
    for (int r = 0; r < num_runs; ++r) {
      const Prediction& p = preds[i][static_cast<std::size_t>(r)];
      out += std::to_string(i) + "," + std::to_string(r) + ",";
      out += csv_field(s.video_id) + ",";
      out += format_double(s.duration_s);
      out += ",";
      out += parse_status_name(p.parse_status);
      out += ",";
      if (p.answer_index && *p.answer_index >= 0 && *p.answer_index < 26) {
        out += static_cast<char>('A' + *p.answer_index);
      }
      out += ",";
      if (s.qa_answer_index) {
        const bool ok =
            p.answer_index && *p.answer_index == *s.qa_answer_index;
        out += ok ? "1" : "0";
      }
      out += ",";
      std::snprintf(buf, sizeof(buf), "%.6f", sample_miou(p, s.gt_windows));
      out += buf;
      out += ",";
      std::snprintf(buf, sizeof(buf), "%.6f", sample_iop(p, s.gt_windows));
      out += buf;
      out += ",";
      out += csv_field(windows_text(p.windows));
      out += "\n";
    }
  }
  return out;
}

}  // namespace

std::string format_report_text(const MetricsReport& report,
                               const MetricsConfig& cfg) {
  std::string out;
  out += "samples: " + std::to_string(report.n_samples) + "\n";
  out += "failed parses: " + std::to_string(report.n_failed_parses) + "\n";
  for (const auto& [tau, v] : report.r1_at) {
    out += "R1@" + threshold_label(tau) + ": " + format_pct(v) + "\n";
  }
  out += "mIoU: " + format_pct(report.miou) + "\n";
  for (const double tau : cfg.report_map_at) {
    const auto it = report.map_at.find(tau);
    if (it != report.map_at.end()) {
      out += "mAP@" + threshold_label(tau) + ": " + format_pct(it->second) +
             "\n";
    }
  }
  out += "mAP@avg: " + format_pct(report.map_avg) + "\n";
  out += "mIoP: " + format_pct(report.miop) + "\n";
  for (const auto& [tau, v] : report.iop_at) {
    out += "IoP@" + threshold_label(tau) + ": " + format_pct(v) + "\n";
  }
  if (report.a_qa) {
    out += "A@QA: " + format_pct(*report.a_qa) + "\n";
  }
  if (report.a_gqa) {
    out += "A@GQA: " + format_pct(*report.a_gqa) + "\n";
  }
  return out;
}

std::string format_report_csv(const MetricsReport& report) {
  std::string header = "n_samples,n_failed_parses";
  std::string row = std::to_string(report.n_samples) + "," +
                    std::to_string(report.n_failed_parses);
  char buf[32];
  auto add = [&](const std::string& name, double v) {
    header += "," + name;
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    row += ",";
    row += buf;
  };
  for (const auto& [tau, v] : report.r1_at) add("r1@" + threshold_label(tau), v);
  add("miou", report.miou);
  for (const auto& [tau, v] : report.map_at) {
    add("map@" + threshold_label(tau), v);
  }
  add("map@avg", report.map_avg);
  add("miop", report.miop);
  for (const auto& [tau, v] : report.iop_at) {
    add("iop@" + threshold_label(tau), v);
  }
  if (report.a_qa) add("a_qa", *report.a_qa);
  if (report.a_gqa) add("a_gqa", *report.a_gqa);
  return header + "\n" + row + "\n";
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.sampling.mode != SamplingMode::Uniform) {
    throw ConfigError(
        "run_experiment: evaluation needs sampling.mode = uniform (jittered "
        "sampling is reserved for training export)");
  }
  if (cfg.output_dir.empty()) {
    throw ConfigError("run_experiment: run.output_dir must be set");
  }

  std::vector<std::string> warnings;
  const std::vector<AnnotationSample> samples = load_limited(cfg, &warnings);
  const std::string label = cfg.run_label.empty() ? "eval" : cfg.run_label;
  if (cfg.progress) {
    for (const auto& w : warnings) {
      std::fprintf(stderr, "[%s] warning: %s\n", label.c_str(), w.c_str());
    }
  }

  const double mean_dur = mean_duration(samples);
  const std::string frames_cache = cfg.frames_cache_dir.empty()
                                       ? (fs::path(cfg.output_dir) /
                                          "frames_cache").string()
                                       : cfg.frames_cache_dir;
  const auto frame_source =
      make_frame_source(cfg.dataset.frames_root, frames_cache);
  Client client(cfg.client);
  const PromptTemplate tmpl = effective_template(cfg);
  const int num_runs = cfg.client.num_runs;
  const std::size_t n = samples.size();

  std::vector<std::vector<std::string>> raws(
      n, std::vector<std::string>(static_cast<std::size_t>(num_runs)));
  std::vector<std::vector<Prediction>> preds(
      n, std::vector<Prediction>(static_cast<std::size_t>(num_runs)));

  std::atomic<std::size_t> next{0};
  std::atomic<int> done{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        const AnnotationSample& s = samples[i];
        SamplingConfig sc = cfg.sampling;
        sc.num_frames = frame_count_for(cfg, s.duration_s, mean_dur);
        const std::vector<double> ts = sample_timestamps(sc, s.duration_s);
        const std::vector<ImageRef> refs =
            frame_source->resolve(s.video_id, ts);
        const PromptSequence seq =
            build_sequence(s, ts, cfg.style, tmpl, refs);
        const ParseConfig pc = parse_config_for(cfg, s);
        for (int r = 0; r < num_runs; ++r) {
          raws[i][static_cast<std::size_t>(r)] = client.complete(seq, r);
          preds[i][static_cast<std::size_t>(r)] =
              parse_prediction(raws[i][static_cast<std::size_t>(r)], pc);
        }
        const int d = done.fetch_add(1) + 1;
        if (cfg.progress) {
          std::fprintf(stderr, "[%s] %d/%zu samples\n", label.c_str(), d, n);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  const int worker_count = std::clamp(
      cfg.client.request_parallelism, 1,
      static_cast<int>(std::min<std::size_t>(n, 64)));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(worker_count));
  for (int w = 0; w < worker_count; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);

  const fs::path out_dir(cfg.output_dir);
  fs::create_directories(out_dir / "raw");
  for (std::size_t i = 0; i < n; ++i) {
    for (int r = 0; r < num_runs; ++r) {
      write_file(out_dir / "raw" / raw_file_name(i, r),
                 raws[i][static_cast<std::size_t>(r)]);
    }
  }
  write_file(out_dir / "per_sample.csv",
             per_sample_csv(samples, preds, num_runs));

  ExperimentResult result;
  result.n_samples = static_cast<int>(n);
  result.run_reports = per_run_reports(samples, preds, num_runs, cfg.metrics);
  result.report = average_reports(result.run_reports);
  result.client_stats = client.stats();

  write_file(out_dir / "report.txt",
             format_report_text(result.report, cfg.metrics));
  write_file(out_dir / "report.csv", format_report_csv(result.report));
  write_file(out_dir / "config.toml",
             to_config_text(config_map_from_experiment(cfg)));
  return result;
}

AblationMatrix style_matrix() {
  auto style = [](TimeRepresentation rep, TimePrecision prec,
                  TimestampPlacement place) {
    TimestampStyle s;
    s.representation = rep;
    s.precision = prec;
    s.placement = place;
    s.include_timestamps = true;
    s.include_duration = true;
    return s;
  };
  AblationMatrix m;
  m.rows = {
      {"rel-dec-appended",
       style(TimeRepresentation::Relative, TimePrecision::Decimal,
             TimestampPlacement::Appended)},
      {"abs-dec-appended",
       style(TimeRepresentation::Absolute, TimePrecision::Decimal,
             TimestampPlacement::Appended)},
      {"rel-int-appended",
       style(TimeRepresentation::Relative, TimePrecision::Integer,
             TimestampPlacement::Appended)},
      {"abs-int-appended",
       style(TimeRepresentation::Absolute, TimePrecision::Integer,
             TimestampPlacement::Appended)},
      {"rel-int-interleaved",
       style(TimeRepresentation::Relative, TimePrecision::Integer,
             TimestampPlacement::Interleaved)},
      {"abs-int-interleaved",
       style(TimeRepresentation::Absolute, TimePrecision::Integer,
             TimestampPlacement::Interleaved)},
  };
  return m;
}

AblationMatrix prompt_component_matrix() {
  auto style = [](bool timestamps, bool duration) {
    TimestampStyle s;  // absolute/integer/interleaved base
    s.include_timestamps = timestamps;
    s.include_duration = duration;
    return s;
  };
  AblationMatrix m;
  m.rows = {
      {"frames-only", style(false, false)},
      {"duration", style(false, true)},
      {"timestamps", style(true, false)},
      {"duration+timestamps", style(true, true)},
  };
  return m;
}

std::string format_ablation_text(const AblationResult& result,
                                 const MetricsConfig& cfg) {
  std::vector<std::string> columns;
  for (const double tau : cfg.recall_thresholds) {
    columns.push_back("R1@" + threshold_label(tau));
  }
  columns.push_back("mIoU");

  std::size_t label_width = 5;
  for (const auto& [label, res] : result.rows) {
    label_width = std::max(label_width, label.size());
  }
  std::string out;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(label_width),
                "style");
  out += buf;
  for (const auto& c : columns) {
    std::snprintf(buf, sizeof(buf), "  %9s", c.c_str());
    out += buf;
  }
  out += "\n";
  for (const auto& [label, res] : result.rows) {
    std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(label_width),
                  label.c_str());
    out += buf;
    for (const double tau : cfg.recall_thresholds) {
      const auto it = res.report.r1_at.find(tau);
      std::snprintf(buf, sizeof(buf), "  %9s",
                    it == res.report.r1_at.end()
                        ? "-"
                        : format_pct(it->second).c_str());
      out += buf;
    }
    std::snprintf(buf, sizeof(buf), "  %9s",
                  format_pct(res.report.miou).c_str());
    out += buf;
    out += "\n";
  }
  for (const auto& [label, error] : result.failures) {
    out += "failed: " + label + ": " + error + "\n";
  }
  return out;
}

std::string format_ablation_csv(const AblationResult& result,
                                const MetricsConfig& cfg) {
  std::string out = "label";
  for (const double tau : cfg.recall_thresholds) {
    out += ",r1@" + threshold_label(tau);
  }
  out += ",miou\n";
  char buf[32];
  for (const auto& [label, res] : result.rows) {
    out += csv_field(label);
    for (const double tau : cfg.recall_thresholds) {
      const auto it = res.report.r1_at.find(tau);
      out += ",";
      if (it != res.report.r1_at.end()) {
        std::snprintf(buf, sizeof(buf), "%.6f", it->second);
        out += buf;
      }
    }
    std::snprintf(buf, sizeof(buf), "%.6f", res.report.miou);
    out += ",";
    out += buf;
    out += "\n";
  }
  return out;
}

AblationResult run_ablation(const ExperimentConfig& base,
                            const AblationMatrix& matrix) {
  if (base.output_dir.empty()) {
    throw ConfigError("run_ablation: run.output_dir must be set");
  }
  AblationResult result;
  for (const auto& row : matrix.rows) {
    ExperimentConfig cfg = base;
    cfg.style = row.style;
    cfg.output_dir = (fs::path(base.output_dir) / row.label).string();
    cfg.run_label = row.label;
    try {
      result.rows.emplace_back(row.label, run_experiment(cfg));
    } catch (const std::exception& e) {
      result.failures.emplace_back(row.label, e.what());
      if (base.progress) {
        std::fprintf(stderr, "[%s] failed: %s\n", row.label.c_str(),
                     e.what());
      }
    }
  }
  fs::create_directories(base.output_dir);
  write_file(fs::path(base.output_dir) / "ablation.txt",
             format_ablation_text(result, base.metrics));
  write_file(fs::path(base.output_dir) / "ablation.csv",
             format_ablation_csv(result, base.metrics));
  return result;
}

void export_training_sequences(const ExperimentConfig& cfg,
                               const std::string& out_path) {
  if (cfg.dataset.split != Split::Train) {
    throw ConfigError(
        "export_training_sequences: dataset.split must be train");
  }
  const std::vector<AnnotationSample> samples = load_limited(cfg, nullptr);
  const double mean_dur = mean_duration(samples);
  const std::string frames_cache =
      cfg.frames_cache_dir.empty() ? (fs::path(out_path).parent_path() /
                                      "frames_cache").string()
                                   : cfg.frames_cache_dir;
  const auto frame_source =
      make_frame_source(cfg.dataset.frames_root, frames_cache);
  const PromptTemplate tmpl = effective_template(cfg);

  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + out_path);
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const AnnotationSample& s = samples[i];
    SamplingConfig sc = cfg.sampling;
    sc.num_frames = frame_count_for(cfg, s.duration_s, mean_dur);
    if (sc.seed) {
      // De-correlate jitter across records while staying reproducible.
      sc.seed = *sc.seed + i;
    }
    const std::vector<double> ts = sample_timestamps(sc, s.duration_s);
    const std::vector<ImageRef> refs = frame_source->resolve(s.video_id, ts);
    const PromptSequence seq = build_sequence(s, ts, cfg.style, tmpl, refs);

    json frames = json::array();
    for (std::size_t f = 0; f < ts.size(); ++f) {
      frames.push_back({{"index", f + 1},
                        {"timestamp_s", ts[f]},
                        {"path", refs[f].path}});
    }
    const json rec = {{"video_id", s.video_id},
                      {"duration_s", s.duration_s},
                      {"text", sequence_to_text(seq)},
                      {"frames", frames},
                      {"target",
                       render_windows(s.gt_windows, cfg.style, s.duration_s)}};
    out << rec.dump() << "\n";
  }
}

MetricsReport rescore_raw_dir(const ExperimentConfig& cfg,
                              const std::string& raw_dir) {
  const std::vector<AnnotationSample> samples = load_limited(cfg, nullptr);
  const std::size_t n = samples.size();

  int num_runs = 0;
  while (fs::exists(fs::path(raw_dir) / raw_file_name(0, num_runs))) {
    ++num_runs;
  }
  if (num_runs == 0) {
    throw std::runtime_error("rescore: no raw files found under " + raw_dir);
  }

  std::vector<std::vector<Prediction>> preds(
      n, std::vector<Prediction>(static_cast<std::size_t>(num_runs)));
  for (std::size_t i = 0; i < n; ++i) {
    const ParseConfig pc = parse_config_for(cfg, samples[i]);
    for (int r = 0; r < num_runs; ++r) {
      const fs::path path = fs::path(raw_dir) / raw_file_name(i, r);
      std::ifstream in(path, std::ios::binary);
      if (!in) {
        throw std::runtime_error("rescore: missing raw file " + path.string());
      }
      std::ostringstream text;
      text << in.rdbuf();
      preds[i][static_cast<std::size_t>(r)] =
          parse_prediction(text.str(), pc);
    }
  }
  return average_reports(per_run_reports(samples, preds, num_runs,
                                         cfg.metrics));
}

}  // namespace tgeval
