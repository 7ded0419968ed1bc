#include "tgeval/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tgeval {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool valid_key(const std::string& key) {
  if (key.empty() || key.front() == '.' || key.back() == '.') return false;
  for (const char c : key) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' &&
        c != '-' && c != '.') {
      return false;
    }
  }
  return true;
}

// Cuts a trailing comment, respecting quoted strings.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (in_string) {
      if (line[i] == '\\') {
        ++i;
      } else if (line[i] == '"') {
        in_string = false;
      }
    } else if (line[i] == '"') {
      in_string = true;
    } else if (line[i] == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string unescape_string(const std::string& body, int line_no) {
  std::string out;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] != '\\') {
      out += body[i];
      continue;
    }
    if (++i >= body.size()) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": dangling escape");
    }
    switch (body[i]) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case '"': out += '"'; break;
      case '\\': out += '\\'; break;
      default:
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": unknown escape \\" + body[i]);
    }
  }
  return out;
}

ConfigValue parse_value(const std::string& raw, int line_no) {
  const std::string v = trim(raw);
  if (v.empty()) {
    throw ConfigError("config line " + std::to_string(line_no) +
                      ": empty value");
  }
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": unterminated string");
    }
    return unescape_string(v.substr(1, v.size() - 2), line_no);
  }
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '[') {
    if (v.back() != ']') {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": unterminated array");
    }
    std::vector<double> out;
    const std::string body = trim(v.substr(1, v.size() - 2));
    if (body.empty()) return out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= body.size(); ++i) {
      if (i == body.size() || body[i] == ',') {
        const std::string tok = trim(body.substr(start, i - start));
        char* end = nullptr;
        const double d = std::strtod(tok.c_str(), &end);
        if (tok.empty() || end != tok.c_str() + tok.size()) {
          throw ConfigError("config line " + std::to_string(line_no) +
                            ": array element is not a number: " + tok);
        }
        out.push_back(d);
        start = i + 1;
      }
    }
    return out;
  }
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end == v.c_str() + v.size()) return d;
  // Bare word: treated as a string for CLI-override ergonomics.
  return v;
}

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

std::string escape_string(const std::string& s) {
  std::string out = "\"";
  for (const char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string format_value(const ConfigValue& value) {
  if (const auto* s = std::get_if<std::string>(&value)) {
    return escape_string(*s);
  }
  if (const auto* d = std::get_if<double>(&value)) {
    return format_double(*d);
  }
  if (const auto* b = std::get_if<bool>(&value)) {
    return *b ? "true" : "false";
  }
  const auto& arr = std::get<std::vector<double>>(value);
  std::string out = "[";
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (i > 0) out += ", ";
    out += format_double(arr[i]);
  }
  return out + "]";
}

// ---- typed accessors over the flat map ----------------------------------

std::string type_name(const ConfigValue& v) {
  switch (v.index()) {
    case 0: return "string";
    case 1: return "number";
    case 2: return "boolean";
    default: return "array";
  }
}

const ConfigValue* find(const ConfigMap& map, const std::string& key) {
  const auto it = map.find(key);
  return it == map.end() ? nullptr : &it->second;
}

std::string get_string(const ConfigMap& map, const std::string& key,
                       const std::string& fallback) {
  const ConfigValue* v = find(map, key);
  if (!v) return fallback;
  if (const auto* s = std::get_if<std::string>(v)) return *s;
  throw ConfigError("config key " + key + ": expected a string, got " +
                    type_name(*v));
}

double get_double(const ConfigMap& map, const std::string& key,
                  double fallback) {
  const ConfigValue* v = find(map, key);
  if (!v) return fallback;
  if (const auto* d = std::get_if<double>(v)) return *d;
  throw ConfigError("config key " + key + ": expected a number, got " +
                    type_name(*v));
}

int get_int(const ConfigMap& map, const std::string& key, int fallback) {
  const double d = get_double(map, key, fallback);
  if (d != std::floor(d) || std::abs(d) > 2e9) {
    throw ConfigError("config key " + key + ": expected an integer, got " +
                      format_double(d));
  }
  return static_cast<int>(d);
}

bool get_bool(const ConfigMap& map, const std::string& key, bool fallback) {
  const ConfigValue* v = find(map, key);
  if (!v) return fallback;
  if (const auto* b = std::get_if<bool>(v)) return *b;
  throw ConfigError("config key " + key + ": expected a boolean, got " +
                    type_name(*v));
}

std::vector<double> get_array(const ConfigMap& map, const std::string& key,
                              const std::vector<double>& fallback) {
  const ConfigValue* v = find(map, key);
  if (!v) return fallback;
  if (const auto* a = std::get_if<std::vector<double>>(v)) return *a;
  throw ConfigError("config key " + key + ": expected an array, got " +
                    type_name(*v));
}

template <typename T>
T pick_enum(const ConfigMap& map, const std::string& key,
            const std::vector<std::pair<std::string, T>>& options,
            T fallback) {
  const ConfigValue* v = find(map, key);
  if (!v) return fallback;
  const auto* s = std::get_if<std::string>(v);
  std::string valid;
  for (const auto& [name, value] : options) {
    if (s && *s == name) return value;
    if (!valid.empty()) valid += ", ";
    valid += name;
  }
  throw ConfigError("config key " + key + ": expected one of [" + valid +
                    "]");
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap map;
  std::istringstream lines(text);
  std::string raw_line;
  std::string section;
  int line_no = 0;
  while (std::getline(lines, raw_line)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw_line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_key(section)) {
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": bad section name: " + section);
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": bad key name: " + key);
    }
    if (!section.empty()) key = section + "." + key;
    if (map.count(key)) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": duplicate key: " + key);
    }
    map.emplace(key, parse_value(line.substr(eq + 1), line_no));
  }
  return map;
}

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file: " + path);
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

void apply_override(ConfigMap& map, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override must look like key=value: " + assignment);
  }
  const std::string key = trim(assignment.substr(0, eq));
  if (!valid_key(key)) {
    throw ConfigError("override has a bad key name: " + assignment);
  }
  map[key] = parse_value(assignment.substr(eq + 1), 0);
}

std::string to_config_text(const ConfigMap& map) {
  // Canonical section order; map iteration handles ordering inside each.
  static const std::vector<std::string> sections = {
      "dataset", "sampling", "style", "template",
      "parse",   "client",   "metrics", "run"};
  std::string out;
  std::map<std::string, std::vector<std::pair<std::string, ConfigValue>>>
      grouped;
  std::vector<std::pair<std::string, ConfigValue>> loose;
  for (const auto& [key, value] : map) {
    const std::size_t dot = key.find('.');
    if (dot == std::string::npos) {
      loose.emplace_back(key, value);
    } else {
      grouped[key.substr(0, dot)].emplace_back(key.substr(dot + 1), value);
    }
  }
  for (const auto& [key, value] : loose) {
    out += key + " = " + format_value(value) + "\n";
  }
  auto emit_section = [&](const std::string& name) {
    const auto it = grouped.find(name);
    if (it == grouped.end()) return;
    if (!out.empty()) out += "\n";
    out += "[" + name + "]\n";
    for (const auto& [key, value] : it->second) {
      out += key + " = " + format_value(value) + "\n";
    }
    grouped.erase(it);
  };
  for (const auto& name : sections) emit_section(name);
  while (!grouped.empty()) emit_section(grouped.begin()->first);
  return out;
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "dataset.name",
      "dataset.annotation_path",
      "dataset.frames_root",
      "dataset.split",
      "dataset.task",
      "dataset.format",
      "dataset.durations_path",
      "sampling.num_frames",
      "sampling.mode",
      "sampling.seed",
      "sampling.fps",
      "sampling.fps_rounding",
      "style.representation",
      "style.precision",
      "style.placement",
      "style.include_timestamps",
      "style.include_duration",
      "template.task_prompt",
      "template.format_prompt",
      "template.gqa_option_header",
      "parse.answer_marker",
      "parse.max_windows",
      "parse.take_first_only",
      "client.endpoint_url",
      "client.model_name",
      "client.api_key_env",
      "client.temperature",
      "client.image_detail",
      "client.max_output_tokens",
      "client.num_runs",
      "client.max_attempts",
      "client.backoff_ms",
      "client.request_parallelism",
      "client.cache_dir",
      "metrics.recall_thresholds",
      "metrics.map_thresholds",
      "metrics.report_map_at",
      "metrics.iop_threshold",
      "run.sample_limit",
      "run.output_dir",
      "run.frames_cache_dir",
      "run.label",
      "run.progress",
  };
  return keys;
}

ExperimentConfig build_experiment_config(const ConfigMap& map) {
  const auto& known = known_config_keys();
  for (const auto& [key, value] : map) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      std::string listing;
      for (const auto& k : known) {
        listing += "\n  " + k;
      }
      throw ConfigError("unknown config key '" + key +
                        "'; valid keys are:" + listing);
    }
  }

  ExperimentConfig cfg;
  cfg.dataset.name = get_string(map, "dataset.name", "dataset");
  cfg.dataset.annotation_path =
      get_string(map, "dataset.annotation_path", "");
  cfg.dataset.frames_root = get_string(map, "dataset.frames_root", "");
  cfg.dataset.split = pick_enum<Split>(map, "dataset.split",
                                       {{"train", Split::Train},
                                        {"val", Split::Val},
                                        {"test", Split::Test}},
                                       Split::Val);
  cfg.dataset.task = pick_enum<Task>(
      map, "dataset.task",
      {{"moment-retrieval", Task::MomentRetrieval},
       {"grounded-qa", Task::GroundedQA}},
      Task::MomentRetrieval);
  cfg.dataset.format = pick_enum<AnnotationFormat>(
      map, "dataset.format",
      {{"canonical", AnnotationFormat::Canonical},
       {"charades-sta", AnnotationFormat::CharadesSta},
       {"qvhighlights", AnnotationFormat::QvHighlights},
       {"activitynet", AnnotationFormat::ActivityNet},
       {"nextgqa", AnnotationFormat::NextGqa}},
      AnnotationFormat::Canonical);
  cfg.dataset.durations_path = get_string(map, "dataset.durations_path", "");

  cfg.sampling.num_frames = get_int(map, "sampling.num_frames", 0);
  cfg.sampling.mode = pick_enum<SamplingMode>(
      map, "sampling.mode",
      {{"uniform", SamplingMode::Uniform},
       {"jittered", SamplingMode::JitteredRandom}},
      SamplingMode::Uniform);
  if (find(map, "sampling.seed")) {
    cfg.sampling.seed =
        static_cast<std::uint64_t>(get_double(map, "sampling.seed", 0.0));
  }
  cfg.fps = get_double(map, "sampling.fps", 0.0);
  cfg.fps_rounding = pick_enum<FpsRounding>(map, "sampling.fps_rounding",
                                            {{"floor", FpsRounding::Floor},
                                             {"ceil", FpsRounding::Ceil},
                                             {"nearest", FpsRounding::Nearest}},
                                            FpsRounding::Nearest);

  cfg.style.representation = pick_enum<TimeRepresentation>(
      map, "style.representation",
      {{"absolute", TimeRepresentation::Absolute},
       {"relative", TimeRepresentation::Relative}},
      TimeRepresentation::Absolute);
  cfg.style.precision = pick_enum<TimePrecision>(
      map, "style.precision",
      {{"integer", TimePrecision::Integer},
       {"decimal", TimePrecision::Decimal}},
      TimePrecision::Integer);
  cfg.style.placement = pick_enum<TimestampPlacement>(
      map, "style.placement",
      {{"interleaved", TimestampPlacement::Interleaved},
       {"appended", TimestampPlacement::Appended}},
      TimestampPlacement::Interleaved);
  cfg.style.include_timestamps =
      get_bool(map, "style.include_timestamps", true);
  cfg.style.include_duration = get_bool(map, "style.include_duration", true);

  cfg.tmpl.task_prompt = get_string(map, "template.task_prompt", "");
  cfg.tmpl.format_prompt = get_string(map, "template.format_prompt", "");
  cfg.tmpl.gqa_option_header =
      get_string(map, "template.gqa_option_header", "");

  cfg.parse.answer_marker = get_string(map, "parse.answer_marker", "ANSWER:");
  cfg.parse.max_windows = get_int(map, "parse.max_windows", 50);
  cfg.parse.take_first_only = get_bool(map, "parse.take_first_only", false);

  cfg.client.endpoint_url = get_string(
      map, "client.endpoint_url", cfg.client.endpoint_url);
  cfg.client.model_name =
      get_string(map, "client.model_name", cfg.client.model_name);
  cfg.client.api_key_env =
      get_string(map, "client.api_key_env", cfg.client.api_key_env);
  cfg.client.temperature = get_double(map, "client.temperature", 0.0);
  cfg.client.image_detail = pick_enum<ImageDetail>(
      map, "client.image_detail",
      {{"low", ImageDetail::Low}, {"high", ImageDetail::High}},
      ImageDetail::Low);
  cfg.client.max_output_tokens =
      get_int(map, "client.max_output_tokens", cfg.client.max_output_tokens);
  cfg.client.num_runs = get_int(map, "client.num_runs", cfg.client.num_runs);
  cfg.client.retry.max_attempts =
      get_int(map, "client.max_attempts", cfg.client.retry.max_attempts);
  {
    std::vector<double> fallback(cfg.client.retry.backoff_ms.begin(),
                                 cfg.client.retry.backoff_ms.end());
    cfg.client.retry.backoff_ms.clear();
    for (const double ms : get_array(map, "client.backoff_ms", fallback)) {
      cfg.client.retry.backoff_ms.push_back(static_cast<int>(ms));
    }
  }
  cfg.client.request_parallelism = get_int(
      map, "client.request_parallelism", cfg.client.request_parallelism);
  cfg.client.cache_dir = get_string(map, "client.cache_dir", "");

  cfg.metrics.recall_thresholds = get_array(map, "metrics.recall_thresholds",
                                            cfg.metrics.recall_thresholds);
  cfg.metrics.map_thresholds =
      get_array(map, "metrics.map_thresholds", cfg.metrics.map_thresholds);
  cfg.metrics.report_map_at =
      get_array(map, "metrics.report_map_at", cfg.metrics.report_map_at);
  cfg.metrics.iop_threshold =
      get_double(map, "metrics.iop_threshold", cfg.metrics.iop_threshold);

  cfg.sample_limit = get_int(map, "run.sample_limit", 0);
  cfg.output_dir = get_string(map, "run.output_dir", "");
  cfg.frames_cache_dir = get_string(map, "run.frames_cache_dir", "");
  cfg.run_label = get_string(map, "run.label", "");
  cfg.progress = get_bool(map, "run.progress", true);

  if (cfg.sampling.num_frames < 0) {
    throw ConfigError("sampling.num_frames must be >= 0");
  }
  if (cfg.fps < 0.0) {
    throw ConfigError("sampling.fps must be >= 0");
  }
  if (cfg.client.num_runs < 1) {
    throw ConfigError("client.num_runs must be >= 1");
  }
  if (cfg.sample_limit < 0) {
    throw ConfigError("run.sample_limit must be >= 0");
  }
  return cfg;
}

ConfigMap config_map_from_experiment(const ExperimentConfig& cfg) {
  ConfigMap map;
  auto put = [&](const std::string& key, ConfigValue value) {
    map.emplace(key, std::move(value));
  };

  put("dataset.name", cfg.dataset.name);
  put("dataset.annotation_path", cfg.dataset.annotation_path);
  put("dataset.frames_root", cfg.dataset.frames_root);
  switch (cfg.dataset.split) {
    case Split::Train: put("dataset.split", std::string("train")); break;
    case Split::Val: put("dataset.split", std::string("val")); break;
    case Split::Test: put("dataset.split", std::string("test")); break;
  }
  put("dataset.task", std::string(cfg.dataset.task == Task::MomentRetrieval
                                      ? "moment-retrieval"
                                      : "grounded-qa"));
  switch (cfg.dataset.format) {
    case AnnotationFormat::Canonical:
      put("dataset.format", std::string("canonical"));
      break;
    case AnnotationFormat::CharadesSta:
      put("dataset.format", std::string("charades-sta"));
      break;
    case AnnotationFormat::QvHighlights:
      put("dataset.format", std::string("qvhighlights"));
      break;
    case AnnotationFormat::ActivityNet:
      put("dataset.format", std::string("activitynet"));
      break;
    case AnnotationFormat::NextGqa:
      put("dataset.format", std::string("nextgqa"));
      break;
  }
  if (!cfg.dataset.durations_path.empty()) {
    put("dataset.durations_path", cfg.dataset.durations_path);
  }

  put("sampling.num_frames", static_cast<double>(cfg.sampling.num_frames));
  put("sampling.mode", std::string(cfg.sampling.mode == SamplingMode::Uniform
                                       ? "uniform"
                                       : "jittered"));
  if (cfg.sampling.seed) {
    put("sampling.seed", static_cast<double>(*cfg.sampling.seed));
  }
  if (cfg.fps > 0.0) {
    put("sampling.fps", cfg.fps);
    switch (cfg.fps_rounding) {
      case FpsRounding::Floor:
        put("sampling.fps_rounding", std::string("floor"));
        break;
      case FpsRounding::Ceil:
        put("sampling.fps_rounding", std::string("ceil"));
        break;
      case FpsRounding::Nearest:
        put("sampling.fps_rounding", std::string("nearest"));
        break;
    }
  }

  put("style.representation",
      std::string(cfg.style.representation == TimeRepresentation::Absolute
                      ? "absolute"
                      : "relative"));
  put("style.precision",
      std::string(cfg.style.precision == TimePrecision::Integer ? "integer"
                                                                : "decimal"));
  put("style.placement",
      std::string(cfg.style.placement == TimestampPlacement::Interleaved
                      ? "interleaved"
                      : "appended"));
  put("style.include_timestamps", cfg.style.include_timestamps);
  put("style.include_duration", cfg.style.include_duration);

  if (!cfg.tmpl.task_prompt.empty()) {
    put("template.task_prompt", cfg.tmpl.task_prompt);
  }
  if (!cfg.tmpl.format_prompt.empty()) {
    put("template.format_prompt", cfg.tmpl.format_prompt);
  }
  if (!cfg.tmpl.gqa_option_header.empty()) {
    put("template.gqa_option_header", cfg.tmpl.gqa_option_header);
  }

  put("parse.answer_marker", cfg.parse.answer_marker);
  put("parse.max_windows", static_cast<double>(cfg.parse.max_windows));
  put("parse.take_first_only", cfg.parse.take_first_only);

  put("client.endpoint_url", cfg.client.endpoint_url);
  put("client.model_name", cfg.client.model_name);
  put("client.api_key_env", cfg.client.api_key_env);
  put("client.temperature", cfg.client.temperature);
  put("client.image_detail",
      std::string(cfg.client.image_detail == ImageDetail::Low ? "low"
                                                              : "high"));
  put("client.max_output_tokens",
      static_cast<double>(cfg.client.max_output_tokens));
  put("client.num_runs", static_cast<double>(cfg.client.num_runs));
  put("client.max_attempts",
      static_cast<double>(cfg.client.retry.max_attempts));
  put("client.backoff_ms",
      std::vector<double>(cfg.client.retry.backoff_ms.begin(),
                          cfg.client.retry.backoff_ms.end()));
  put("client.request_parallelism",
      static_cast<double>(cfg.client.request_parallelism));
  if (!cfg.client.cache_dir.empty()) {
    put("client.cache_dir", cfg.client.cache_dir);
  }

  put("metrics.recall_thresholds", cfg.metrics.recall_thresholds);
  put("metrics.map_thresholds", cfg.metrics.map_thresholds);
  put("metrics.report_map_at", cfg.metrics.report_map_at);
  put("metrics.iop_threshold", cfg.metrics.iop_threshold);

  if (cfg.sample_limit > 0) {
    put("run.sample_limit", static_cast<double>(cfg.sample_limit));
  }
  put("run.output_dir", cfg.output_dir);
  if (!cfg.frames_cache_dir.empty()) {
    put("run.frames_cache_dir", cfg.frames_cache_dir);
  }
  if (!cfg.run_label.empty()) {
    put("run.label", cfg.run_label);
  }
  put("run.progress", cfg.progress);
  return map;
}

}  // namespace tgeval
