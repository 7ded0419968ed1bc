#include "tgeval/blueprint.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tgeval {

namespace {

long long round_half_up(double x) {
  return static_cast<long long>(std::floor(x + 0.5));
}

// Fixed-point rendering via an integer scale so "79.9" never prints as
// "79.8" through printf's round-to-even.
std::string fixed_digits(double value, int digits) {
  long long scale = 1;
  for (int i = 0; i < digits; ++i) scale *= 10;
  const long long n = round_half_up(value * static_cast<double>(scale));
  std::string frac = std::to_string(n % scale);
  frac.insert(0, static_cast<std::size_t>(digits) - frac.size(), '0');
  return std::to_string(n / scale) + "." + frac;
}

std::string query_text(const AnnotationSample& sample,
                       const PromptTemplate& tmpl) {
  if (sample.task == Task::MomentRetrieval) {
    return "Query: " + sample.query + ".";
  }
  std::string out = "Question: " + sample.query;
  if (!tmpl.gqa_option_header.empty()) {
    out += "\n" + tmpl.gqa_option_header;
  }
  for (std::size_t i = 0; i < sample.qa_options.size(); ++i) {
    out += "\n";
    out += static_cast<char>('A' + i);
    out += ". " + sample.qa_options[i];
  }
  return out;
}

}  // namespace

std::string render_timestamp(const TimestampStyle& style, double t_s,
                             double duration_s) {
  if (!(duration_s > 0.0)) {
    throw std::invalid_argument("render_timestamp: duration must be > 0");
  }
  if (!(t_s >= 0.0) || t_s > duration_s) {
    throw std::invalid_argument("render_timestamp: t=" + std::to_string(t_s) +
                                " outside [0, " + std::to_string(duration_s) +
                                "]");
  }
  if (style.representation == TimeRepresentation::Absolute) {
    if (style.precision == TimePrecision::Integer) {
      return std::to_string(round_half_up(t_s));
    }
    return fixed_digits(t_s, 1);
  }
  const double rel = t_s / duration_s;
  if (style.precision == TimePrecision::Integer) {
    return std::to_string(round_half_up(100.0 * rel));
  }
  return fixed_digits(rel, 2);
}

std::string render_duration_sentence(const TimestampStyle& style,
                                     double duration_s) {
  if (!(duration_s > 0.0)) {
    throw std::invalid_argument(
        "render_duration_sentence: duration must be > 0");
  }
  // Duration is always written in absolute seconds at the style's precision,
  // even when timestamps use the relative representation.
  const std::string rendered = style.precision == TimePrecision::Integer
                                   ? std::to_string(round_half_up(duration_s))
                                   : fixed_digits(duration_s, 1);
  return "The video lasts " + rendered + " seconds.";
}

PromptSequence build_sequence(const AnnotationSample& sample,
                              const std::vector<double>& timestamps,
                              const TimestampStyle& style,
                              const PromptTemplate& tmpl,
                              const std::vector<ImageRef>& image_refs) {
  if (timestamps.empty() || timestamps.size() != image_refs.size()) {
    throw std::invalid_argument(
        "build_sequence: need equal non-zero timestamp and image counts, got " +
        std::to_string(timestamps.size()) + " and " +
        std::to_string(image_refs.size()));
  }
  if (tmpl.task_prompt.empty()) {
    throw std::invalid_argument("build_sequence: task_prompt must be set");
  }

  PromptSequence seq;
  const std::size_t n = timestamps.size();

  if (style.include_timestamps &&
      style.placement == TimestampPlacement::Interleaved) {
    for (std::size_t i = 0; i < n; ++i) {
      seq.items.push_back(ImageItem{static_cast<int>(i) + 1, timestamps[i],
                                    image_refs[i]});
      seq.items.push_back(
          TextItem{render_timestamp(style, timestamps[i], sample.duration_s)});
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      seq.items.push_back(ImageItem{static_cast<int>(i) + 1, timestamps[i],
                                    image_refs[i]});
    }
    if (style.include_timestamps) {
      std::string joined;
      for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) joined += kAppendedSeparator;
        joined += render_timestamp(style, timestamps[i], sample.duration_s);
      }
      seq.items.push_back(TextItem{joined});
    }
  }

  if (style.include_duration) {
    seq.items.push_back(
        TextItem{render_duration_sentence(style, sample.duration_s)});
  }
  seq.items.push_back(TextItem{query_text(sample, tmpl)});
  seq.items.push_back(TextItem{tmpl.task_prompt});
  if (!tmpl.format_prompt.empty()) {
    seq.items.push_back(TextItem{tmpl.format_prompt});
  }
  return seq;
}

std::string render_windows(const std::vector<TimeInterval>& windows,
                           const TimestampStyle& style, double duration_s) {
  std::vector<TimeInterval> sorted = windows;
  std::sort(sorted.begin(), sorted.end(),
            [](const TimeInterval& a, const TimeInterval& b) {
              if (a.start_s != b.start_s) return a.start_s < b.start_s;
              return a.end_s < b.end_s;
            });
  std::string out = "[";
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0) out += ", ";
    out += "[" + render_timestamp(style, sorted[i].start_s, duration_s) +
           ", " + render_timestamp(style, sorted[i].end_s, duration_s) + "]";
  }
  return out + "]";
}

std::string sequence_to_text(const PromptSequence& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.items.size(); ++i) {
    if (i > 0) out += "\n";
    if (const auto* img = std::get_if<ImageItem>(&seq.items[i])) {
      out += "⟦IMG:" + std::to_string(img->frame_index) + "⟧";
    } else {
      out += std::get<TextItem>(seq.items[i]).text;
    }
  }
  return out;
}

PromptTemplate default_template(Task task) {
  PromptTemplate tmpl;
  if (task == Task::MomentRetrieval) {
    tmpl.task_prompt =
        "Given the video and the query, find the relevant windows.";
    tmpl.format_prompt =
        "Think step by step.\n"
        "Reason about the events in the video and how they relate to the "
        "query. After your reasoning, output `ANSWER: <your answer>` in the "
        "format specified in the task prompt.\n"
        "Always provide a non-empty answer after your thoughts. If you think "
        "the event does not take place in the video, give your best guess, as "
        "otherwise the evaluation will be marked as incorrect.\n"
        "Never provide an empty list for <your answer>.\n"
        "The descriptions of moments are sometimes imprecise, so retrieve the "
        "closest moment.\n"
        "If you don't see an event remotely similar to the description, guess "
        "what is the most likely moment given the context.\n"
        "For instance, for cutting onion this could be between the time we "
        "see that the scene takes place in the kitchen and the time we see "
        "the onions being boiled in the pan.\n"
        "The answer should be in the format of a list indicating the start "
        "and end of a window of moment, [start_window, end_window], for "
        "instance [0, 1].\n"
        "If you detect multiple windows for the same moment, choose the most "
        "relevant one.\n"
        "It's important your final answer only contains one window. It is "
        "very important that the answer is in this format, otherwise the "
        "evaluation will fail.";
    return tmpl;
  }
  tmpl.task_prompt =
      "Given the video, answer the question by choosing one of the options, "
      "then provide the window of the moment that grounds your answer.";
  tmpl.format_prompt =
      "Think step by step.\n"
      "After your reasoning, output `ANSWER: <option letter> [start_window, "
      "end_window]`, for instance `ANSWER: B [4, 21]`.\n"
      "Always answer with exactly one option letter and one window. It is "
      "very important that the answer is in this format, otherwise the "
      "evaluation will fail.";
  tmpl.gqa_option_header = "Options:";
  return tmpl;
}

}  // namespace tgeval
