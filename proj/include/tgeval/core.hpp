#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tgeval {

// A broken experiment description: bad config file, unknown key, or field
// combination the harness refuses to run. Distinct from runtime errors so
// the CLI can exit 1 instead of 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A [start, end] moment in seconds. The unit of both ground truth and
// predictions. Times stay real-valued internally; rounding happens only at
// render/parse boundaries.
struct TimeInterval {
  double start_s = 0.0;
  double end_s = 0.0;

  double length() const { return end_s - start_s; }

  bool valid() const {
    return std::isfinite(start_s) && std::isfinite(end_s) && start_s >= 0.0 &&
           start_s <= end_s;
  }

  bool operator==(const TimeInterval& other) const {
    return start_s == other.start_s && end_s == other.end_s;
  }
};

inline TimeInterval make_interval(double start_s, double end_s) {
  TimeInterval iv{start_s, end_s};
  if (!iv.valid()) {
    throw std::invalid_argument("invalid interval [" + std::to_string(start_s) +
                                ", " + std::to_string(end_s) + "]");
  }
  return iv;
}

// Clamp an interval into [0, duration_s], preserving start <= end.
inline TimeInterval clamp_interval(const TimeInterval& iv, double duration_s) {
  TimeInterval out;
  out.start_s = std::clamp(iv.start_s, 0.0, duration_s);
  out.end_s = std::clamp(iv.end_s, 0.0, duration_s);
  return out;
}

enum class Task { MomentRetrieval, GroundedQA };

// One benchmark query: a video, its duration, the query or question, and the
// ground-truth windows. GroundedQA samples additionally carry the
// multiple-choice options and the gold answer index.
struct AnnotationSample {
  std::string video_id;
  double duration_s = 0.0;
  std::string query;
  std::vector<TimeInterval> gt_windows;
  Task task = Task::MomentRetrieval;
  std::vector<std::string> qa_options;
  std::optional<std::size_t> qa_answer_index;
};

enum class ParseStatus { Clean, Repaired, Failed };

inline const char* parse_status_name(ParseStatus s) {
  switch (s) {
    case ParseStatus::Clean: return "clean";
    case ParseStatus::Repaired: return "repaired";
    case ParseStatus::Failed: return "failed";
  }
  return "unknown";
}

// Parsed model output. Window order is rank (position 0 = top-1). A Failed
// parse has no windows and scores as a miss.
struct Prediction {
  std::vector<TimeInterval> windows;
  std::optional<std::size_t> answer_index;
  std::string raw_text;
  ParseStatus parse_status = ParseStatus::Failed;
};

// Temporal IoU: |a ∩ b| / |a ∪ b|. Total over all valid intervals, including
// zero-length ones: identical points score 1, anything else with an empty
// union scores 0.
inline double interval_iou(const TimeInterval& a, const TimeInterval& b) {
  const double inter = std::max(
      0.0, std::min(a.end_s, b.end_s) - std::max(a.start_s, b.start_s));
  const double uni = a.length() + b.length() - inter;
  if (uni <= 0.0) {
    return a.start_s == b.start_s ? 1.0 : 0.0;
  }
  return inter / uni;
}

// Intersection over Prediction: |pred ∩ gt| / |pred|. Lenient grounding score
// that ignores coverage of the ground truth. A zero-length prediction scores
// 1 if its point lies inside gt, else 0.
inline double interval_iop(const TimeInterval& pred, const TimeInterval& gt) {
  const double len = pred.length();
  if (len <= 0.0) {
    return (pred.start_s >= gt.start_s && pred.start_s <= gt.end_s) ? 1.0
                                                                    : 0.0;
  }
  const double inter = std::max(
      0.0, std::min(pred.end_s, gt.end_s) - std::max(pred.start_s, gt.start_s));
  return inter / len;
}

}  // namespace tgeval
