#include "tgeval/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tgeval {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Benchmark sentences often carry a final period; the prompt adds its own.
std::string strip_final_period(std::string s) {
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read file: " + path);
  }
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// Clamps raw windows into [0, duration]; drops reversed or non-finite pairs.
std::vector<TimeInterval> sanitize_windows(
    const std::vector<std::pair<double, double>>& raw,
    const std::string& video_id, double duration_s,
    std::vector<std::string>& warnings) {
  std::vector<TimeInterval> out;
  for (const auto& [s, e] : raw) {
    if (!std::isfinite(s) || !std::isfinite(e) || s > e) {
      warnings.push_back(video_id + ": dropped malformed window [" +
                         std::to_string(s) + ", " + std::to_string(e) + "]");
      continue;
    }
    const double cs = std::clamp(s, 0.0, duration_s);
    const double ce = std::clamp(e, 0.0, duration_s);
    if (cs != s || ce != e) {
      warnings.push_back(video_id + ": clamped window [" + std::to_string(s) +
                         ", " + std::to_string(e) + "] to [0, " +
                         std::to_string(duration_s) + "]");
    }
    out.push_back({cs, ce});
  }
  return out;
}

std::vector<std::pair<double, double>> json_windows(const json& arr) {
  std::vector<std::pair<double, double>> out;
  for (const auto& w : arr) {
    if (!w.is_array() || w.size() != 2 || !w[0].is_number() ||
        !w[1].is_number()) {
      throw std::runtime_error("window is not a numeric pair");
    }
    out.emplace_back(w[0].get<double>(), w[1].get<double>());
  }
  return out;
}

int parse_answer_field(const json& answer,
                       const std::vector<std::string>& options) {
  if (answer.is_number_integer()) {
    return answer.get<int>();
  }
  if (answer.is_string()) {
    const std::string text = answer.get<std::string>();
    if (text.size() == 1 && text[0] >= 'A' &&
        text[0] < static_cast<char>('A' + options.size())) {
      return text[0] - 'A';
    }
    const auto it = std::find(options.begin(), options.end(), text);
    if (it != options.end()) {
      return static_cast<int>(it - options.begin());
    }
  }
  throw std::runtime_error("answer matches no option");
}

// One parsed record, before window sanitizing.
struct RawRecord {
  std::string video_id;
  double duration = 0.0;
  std::string query;
  std::vector<std::pair<double, double>> windows;
  std::vector<std::string> options;
  std::optional<int> answer;
};

void finish_record(const RawRecord& rec, const DatasetDescriptor& desc,
                   LoadResult& result) {
  if (rec.video_id.empty() || !(rec.duration > 0.0) || rec.query.empty()) {
    ++result.n_skipped;
    result.warnings.push_back(rec.video_id +
                              ": skipped record with missing fields");
    return;
  }
  AnnotationSample sample;
  sample.video_id = rec.video_id;
  sample.duration_s = rec.duration;
  sample.query = rec.query;
  sample.task = desc.task;
  sample.gt_windows = sanitize_windows(rec.windows, rec.video_id, rec.duration,
                                       result.warnings);
  if (sample.gt_windows.empty()) {
    ++result.n_skipped;
    result.warnings.push_back(rec.video_id +
                              ": skipped record with no usable window");
    return;
  }
  if (desc.task == Task::GroundedQA) {
    if (rec.options.empty() || rec.options.size() > 26 || !rec.answer ||
        *rec.answer < 0 ||
        *rec.answer >= static_cast<int>(rec.options.size())) {
      ++result.n_skipped;
      result.warnings.push_back(rec.video_id +
                                ": skipped record with bad options/answer");
      return;
    }
    sample.qa_options = rec.options;
    sample.qa_answer_index = rec.answer;
  }
  result.samples.push_back(std::move(sample));
  ++result.n_loaded;
}

void load_canonical_line(const std::string& line, const DatasetDescriptor& desc,
                         const char* query_key, LoadResult& result) {
  RawRecord rec;
  try {
    const json j = json::parse(line);
    rec.video_id = j.at("video_id").get<std::string>();
    rec.duration = j.at("duration").get<double>();
    rec.query = trim(j.at(query_key).get<std::string>());
    rec.windows = json_windows(j.at("windows"));
    if (j.contains("options")) {
      rec.options = j.at("options").get<std::vector<std::string>>();
    }
    if (j.contains("answer")) {
      rec.answer = parse_answer_field(j.at("answer"), rec.options);
    }
  } catch (const std::exception& e) {
    ++result.n_skipped;
    result.warnings.push_back(std::string("skipped unparseable record: ") +
                              e.what());
    return;
  }
  finish_record(rec, desc, result);
}

void load_charades_line(const std::string& line,
                        const std::map<std::string, double>& durations,
                        const DatasetDescriptor& desc, LoadResult& result) {
  const std::size_t sep = line.find("##");
  if (sep == std::string::npos) {
    ++result.n_skipped;
    result.warnings.push_back("skipped line without '##': " + line);
    return;
  }
  std::istringstream head(line.substr(0, sep));
  RawRecord rec;
  double start = 0.0;
  double end = 0.0;
  if (!(head >> rec.video_id >> start >> end)) {
    ++result.n_skipped;
    result.warnings.push_back("skipped malformed line: " + line);
    return;
  }
  const auto it = durations.find(rec.video_id);
  if (it == durations.end()) {
    ++result.n_skipped;
    result.warnings.push_back(rec.video_id + ": no duration entry");
    return;
  }
  rec.duration = it->second;
  rec.query = strip_final_period(trim(line.substr(sep + 2)));
  rec.windows = {{start, end}};
  finish_record(rec, desc, result);
}

void load_qvhighlights_line(const std::string& line,
                            const DatasetDescriptor& desc,
                            LoadResult& result) {
  RawRecord rec;
  try {
    const json j = json::parse(line);
    rec.video_id = j.at("vid").get<std::string>();
    rec.duration = j.at("duration").get<double>();
    rec.query = trim(j.at("query").get<std::string>());
    rec.windows = json_windows(j.at("relevant_windows"));
  } catch (const std::exception& e) {
    ++result.n_skipped;
    result.warnings.push_back(std::string("skipped unparseable record: ") +
                              e.what());
    return;
  }
  finish_record(rec, desc, result);
}

void load_activitynet(const std::string& text, const DatasetDescriptor& desc,
                      LoadResult& result) {
  json root;
  try {
    root = json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("annotation file is not JSON: ") +
                             e.what());
  }
  for (const auto& [vid, entry] : root.items()) {
    try {
      const double duration = entry.at("duration").get<double>();
      const auto& stamps = entry.at("timestamps");
      const auto& sentences = entry.at("sentences");
      const std::size_t n = std::min(stamps.size(), sentences.size());
      if (stamps.size() != sentences.size()) {
        result.warnings.push_back(vid +
                                  ": timestamps/sentences length mismatch");
      }
      for (std::size_t i = 0; i < n; ++i) {
        RawRecord rec;
        rec.video_id = vid;
        rec.duration = duration;
        rec.query =
            strip_final_period(trim(sentences[i].get<std::string>()));
        rec.windows = {{stamps[i][0].get<double>(),
                        stamps[i][1].get<double>()}};
        finish_record(rec, desc, result);
      }
    } catch (const std::exception& e) {
      ++result.n_skipped;
      result.warnings.push_back(vid + ": skipped video: " + e.what());
    }
  }
}

std::map<std::string, double> load_durations(const std::string& path) {
  json root;
  try {
    root = json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("durations file is not JSON: ") +
                             e.what());
  }
  std::map<std::string, double> out;
  for (const auto& [vid, dur] : root.items()) {
    out[vid] = dur.get<double>();
  }
  return out;
}

}  // namespace

LoadResult load_annotations(const DatasetDescriptor& desc) {
  if (desc.format == AnnotationFormat::NextGqa &&
      desc.task != Task::GroundedQA) {
    throw std::invalid_argument(
        "load_annotations: the grounded-QA format needs task=GroundedQA");
  }

  const std::string text = read_file(desc.annotation_path);
  LoadResult result;

  if (desc.format == AnnotationFormat::ActivityNet) {
    load_activitynet(text, desc, result);
  } else {
    std::map<std::string, double> durations;
    if (desc.format == AnnotationFormat::CharadesSta) {
      if (desc.durations_path.empty()) {
        throw std::runtime_error(
            "load_annotations: this format needs durations_path");
      }
      durations = load_durations(desc.durations_path);
    }
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      if (trim(line).empty()) continue;
      switch (desc.format) {
        case AnnotationFormat::Canonical:
          load_canonical_line(line, desc, "query", result);
          break;
        case AnnotationFormat::CharadesSta:
          load_charades_line(line, durations, desc, result);
          break;
        case AnnotationFormat::QvHighlights:
          load_qvhighlights_line(line, desc, result);
          break;
        case AnnotationFormat::NextGqa:
          load_canonical_line(line, desc, "question", result);
          break;
        case AnnotationFormat::ActivityNet:
          break;  // handled above
      }
    }
  }

  if (result.samples.empty()) {
    throw std::runtime_error("load_annotations: no valid samples in " +
                             desc.annotation_path);
  }
  return result;
}

FrameManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read manifest: " + path);
  }
  FrameManifest manifest;
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty manifest: " + path);
  }
  {
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error("manifest header needs video_id<TAB>duration: " +
                               path);
    }
    manifest.video_id = line.substr(0, tab);
    manifest.duration_s = std::strtod(line.c_str() + tab + 1, nullptr);
    if (!(manifest.duration_s > 0.0)) {
      throw std::runtime_error("manifest duration must be > 0: " + path);
    }
  }
  const fs::path base = fs::path(path).parent_path();
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error("manifest entry needs timestamp<TAB>path: " +
                               path);
    }
    const double t = std::strtod(line.substr(0, tab).c_str(), nullptr);
    std::string img = line.substr(tab + 1);
    if (fs::path(img).is_relative()) {
      img = (base / img).string();
    }
    if (!manifest.entries.empty() && t < manifest.entries.back().first) {
      throw std::runtime_error("manifest timestamps must ascend: " + path);
    }
    if (t < 0.0 || t > manifest.duration_s) {
      throw std::runtime_error("manifest timestamp outside video: " + path);
    }
    manifest.entries.emplace_back(t, std::move(img));
  }
  if (manifest.entries.empty()) {
    throw std::runtime_error("manifest has no frame entries: " + path);
  }
  return manifest;
}

namespace {

std::string media_type_for(const std::string& path) {
  const std::string ext = fs::path(path).extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".webp") return "image/webp";
  return "image/jpeg";
}

class ManifestFrameSource final : public FrameSource {
 public:
  explicit ManifestFrameSource(std::string frames_root)
      : frames_root_(std::move(frames_root)) {}

  std::vector<ImageRef> resolve(
      const std::string& video_id,
      const std::vector<double>& timestamps) override {
    const FrameManifest& manifest = manifest_for(video_id);
    std::vector<ImageRef> out;
    out.reserve(timestamps.size());
    for (const double t : timestamps) {
      const std::string& path = nearest_entry(manifest, t);
      out.push_back({path, media_type_for(path), {}});
    }
    return out;
  }

 private:
  const FrameManifest& manifest_for(const std::string& video_id) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(video_id);
    if (it == cache_.end()) {
      const std::string path =
          (fs::path(frames_root_) / (video_id + ".manifest")).string();
      if (!fs::exists(path)) {
        throw std::runtime_error("no frame manifest for video " + video_id +
                                 " under " + frames_root_);
      }
      it = cache_.emplace(video_id, load_manifest(path)).first;
    }
    return it->second;
  }

  static const std::string& nearest_entry(const FrameManifest& manifest,
                                          double t) {
    const auto& entries = manifest.entries;
    std::size_t best = 0;
    double best_dist = std::abs(entries[0].first - t);
    for (std::size_t i = 1; i < entries.size(); ++i) {
      const double dist = std::abs(entries[i].first - t);
      if (dist < best_dist) {  // ties keep the earlier entry
        best = i;
        best_dist = dist;
      }
    }
    return entries[best].second;
  }

  std::string frames_root_;
  std::mutex mutex_;
  std::map<std::string, FrameManifest> cache_;
};

class CommandFrameSource final : public FrameSource {
 public:
  CommandFrameSource(std::string command_template, std::string cache_dir)
      : template_(std::move(command_template)),
        cache_dir_(std::move(cache_dir)) {
    fs::create_directories(cache_dir_);
  }

  std::vector<ImageRef> resolve(
      const std::string& video_id,
      const std::vector<double>& timestamps) override {
    std::vector<ImageRef> out;
    out.reserve(timestamps.size());
    for (const double t : timestamps) {
      char stamp[32];
      std::snprintf(stamp, sizeof(stamp), "%.3f", t);
      const std::string output =
          (fs::path(cache_dir_) / (video_id + "_" + stamp + ".jpg")).string();
      if (!fs::exists(output)) {
        std::string cmd = template_;
        substitute(cmd, "{video}", video_id);
        substitute(cmd, "{timestamp}", stamp);
        substitute(cmd, "{output}", output);
        const int status = std::system(cmd.c_str());
        if (status != 0 || !fs::exists(output)) {
          throw std::runtime_error("frame provider failed for video " +
                                   video_id + " at t=" + stamp);
        }
      }
      out.push_back({output, media_type_for(output), {}});
    }
    return out;
  }

 private:
  static void substitute(std::string& text, const std::string& key,
                         const std::string& value) {
    std::size_t at = 0;
    while ((at = text.find(key, at)) != std::string::npos) {
      text.replace(at, key.size(), value);
      at += value.size();
    }
  }

  std::string template_;
  std::string cache_dir_;
};

}  // namespace

std::unique_ptr<FrameSource> make_manifest_frame_source(
    const std::string& frames_root) {
  return std::make_unique<ManifestFrameSource>(frames_root);
}

std::unique_ptr<FrameSource> make_command_frame_source(
    const std::string& command_template, const std::string& cache_dir) {
  return std::make_unique<CommandFrameSource>(command_template, cache_dir);
}

std::unique_ptr<FrameSource> make_frame_source(const std::string& frames_root,
                                               const std::string& cache_dir) {
  if (const char* provider = std::getenv("TGEVAL_FRAME_PROVIDER")) {
    return make_command_frame_source(provider, cache_dir);
  }
  if (frames_root.find("{video}") != std::string::npos) {
    return make_command_frame_source(frames_root, cache_dir);
  }
  return make_manifest_frame_source(frames_root);
}

}  // namespace tgeval
