#pragma once

// Turns raw model completions into Prediction values. The pipeline tolerates
// the usual chat-model formatting drift (reasoning prose, code fences, flat
// pairs, swapped bounds, out-of-range values) and records whether any repair
// was needed in Prediction::parse_status.

#include <string>

#include "tgeval/blueprint.hpp"
#include "tgeval/core.hpp"

namespace tgeval {

struct ParseConfig {
  TimestampStyle style;   // drives the inverse timestamp mapping
  double duration_s = 0.0;
  std::string answer_marker = "ANSWER:";
  int max_windows = 50;
  // Keep only the first surviving window. For single-window benchmarks whose
  // prompt asks for exactly one moment; does not affect parse_status.
  bool take_first_only = false;
};

// Total over strings; never throws on model output. Throws
// std::invalid_argument only for a broken config (duration <= 0,
// max_windows < 1).
//
// Pipeline: restrict window search to text after the last answer_marker
// occurrence (when present); scan the full text for the last standalone
// option letter "A".."E" (GQA answers); strip code fences; extract innermost
// bracketed numeric pairs, accepting nested lists, a bare flat pair, or
// comma-joined pairs without outer brackets; coerce numbers (unit suffixes
// stripped, thousands groups merged); per window swap reversed bounds, map
// relative values back to seconds, clamp to [0, duration]; drop non-numeric
// pairs and exact duplicates, cap at max_windows.
//
// parse_status: Clean when the whole trimmed text already was a strict
// nested list and no repair fired (the relative inverse mapping counts as a
// repair); Repaired when windows survived anything less; Failed when none
// did.
Prediction parse_prediction(const std::string& raw_text,
                            const ParseConfig& cfg);

// Inverse of render_timestamp before clamping: Absolute -> value as-is,
// Relative/Integer -> v/100*duration, Relative/Decimal -> v*duration.
// Throws std::invalid_argument when token is not numeric text.
double parse_time(const std::string& token, const TimestampStyle& style,
                  double duration_s);

}  // namespace tgeval
