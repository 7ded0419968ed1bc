#pragma once

// Renders the timestamp-interleaved multimodal prompt sequence for a video
// sample, plus the nested-list target string used for training export. All
// rendering is pure string/struct assembly; no image decoding happens here.

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "tgeval/core.hpp"

namespace tgeval {

enum class TimeRepresentation { Absolute, Relative };
enum class TimePrecision { Integer, Decimal };
enum class TimestampPlacement { Interleaved, Appended };

// One point in the timestamp design space. include_timestamps=false renders
// frames only (placement is then irrelevant); include_duration controls the
// "The video lasts {D} seconds." sentence.
struct TimestampStyle {
  TimeRepresentation representation = TimeRepresentation::Absolute;
  TimePrecision precision = TimePrecision::Integer;
  TimestampPlacement placement = TimestampPlacement::Interleaved;
  bool include_timestamps = true;
  bool include_duration = true;

  bool operator==(const TimestampStyle&) const = default;
};

// Textual scaffolding around the frame/timestamp items. task_prompt must be
// non-empty; format_prompt carries the format-adherence instructions used for
// zero-shot chat models; gqa_option_header, when set, prefixes the rendered
// option lines of multiple-choice questions.
struct PromptTemplate {
  std::string task_prompt;
  std::string format_prompt;      // empty means absent
  std::string gqa_option_header;  // empty means absent
};

// Opaque image payload: either an on-disk path or inline bytes. media_type is
// the MIME type sent to the endpoint (defaults to JPEG when empty).
struct ImageRef {
  std::string path;
  std::string media_type;
  std::vector<std::uint8_t> bytes;
};

struct ImageItem {
  int frame_index = 0;  // 1-based position in the sampled frame list
  double timestamp_s = 0.0;
  ImageRef image;
};

struct TextItem {
  std::string text;
};

using PromptItem = std::variant<ImageItem, TextItem>;

struct PromptSequence {
  std::vector<PromptItem> items;
};

// Separator between timestamps when they are appended after the frames
// instead of interleaved with them.
inline constexpr char kAppendedSeparator[] = ">";

// Renders one timestamp per the style:
//   Absolute/Integer  -> round-half-up(t)            e.g. "80"
//   Absolute/Decimal  -> t with 1 fractional digit   e.g. "79.9"
//   Relative/Decimal  -> t/d with 2 fractional digits e.g. "0.40"
//   Relative/Integer  -> round-half-up(100*t/d)      e.g. "40"
// Throws std::invalid_argument if t_s is outside [0, duration_s] or
// duration_s <= 0.
std::string render_timestamp(const TimestampStyle& style, double t_s,
                             double duration_s);

// "The video lasts {D} seconds." with D rendered at the style's absolute
// precision (integer styles -> integer text, decimal -> 1 fractional digit).
std::string render_duration_sentence(const TimestampStyle& style,
                                     double duration_s);

// Assembles the full prompt item list:
//   Interleaved: f_1, r(t_1), ..., f_F, r(t_F), [duration], query, task,
//                [format]
//   Appended:    f_1..f_F, "r(t_1)>r(t_2)>...", [duration], query, task,
//                [format]
//   Timestamps off: f_1..f_F, [duration], query, task, [format]
// The query item is "Query: {query}." for moment retrieval; for grounded QA
// it is "Question: {q}" followed by the option header (if any) and one
// "A. {option}" line per option, folded into a single text item.
// Throws std::invalid_argument on timestamp/image count mismatch, empty
// task_prompt, or out-of-range timestamps.
PromptSequence build_sequence(const AnnotationSample& sample,
                              const std::vector<double>& timestamps,
                              const TimestampStyle& style,
                              const PromptTemplate& tmpl,
                              const std::vector<ImageRef>& image_refs);

// Nested-list target string, e.g. "[[3, 9]]" or "[[a, b], [c, d]]" with
// windows ordered by start and bounds rendered via render_timestamp.
std::string render_windows(const std::vector<TimeInterval>& windows,
                           const TimestampStyle& style, double duration_s);

// Flattens a sequence to text for golden files and training export: items
// joined with "\n", image items rendered as "⟦IMG:n⟧" where n is the
// 1-based frame index.
std::string sequence_to_text(const PromptSequence& seq);

// Default prompt wording per task. The moment-retrieval text follows the
// zero-shot chat prompt (step-by-step reasoning, ANSWER marker, single
// window); the grounded-QA text asks for "ANSWER: <letter> [start, end]".
PromptTemplate default_template(Task task);

}  // namespace tgeval
