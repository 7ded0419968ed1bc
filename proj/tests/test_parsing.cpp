#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "tgeval/blueprint.hpp"
#include "tgeval/parsing.hpp"

using namespace tgeval;
using nlohmann::json;

namespace {

TimestampStyle style_from_tag(const std::string& tag) {
  TimestampStyle s;
  if (tag == "abs-int") {
    s.representation = TimeRepresentation::Absolute;
    s.precision = TimePrecision::Integer;
  } else if (tag == "abs-dec") {
    s.representation = TimeRepresentation::Absolute;
    s.precision = TimePrecision::Decimal;
  } else if (tag == "rel-int") {
    s.representation = TimeRepresentation::Relative;
    s.precision = TimePrecision::Integer;
  } else if (tag == "rel-dec") {
    s.representation = TimeRepresentation::Relative;
    s.precision = TimePrecision::Decimal;
  } else {
    throw std::invalid_argument("unknown style tag: " + tag);
  }
  return s;
}

ParseConfig config_for(const TimestampStyle& style, double duration) {
  ParseConfig cfg;
  cfg.style = style;
  cfg.duration_s = duration;
  return cfg;
}

}  // namespace

TEST_CASE("regression corpus replays exactly") {
  std::ifstream in(std::string(TGEVAL_TEST_DATA_DIR) +
                   "/parser_corpus/cases.jsonl");
  REQUIRE(in.good());

  int n_cases = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json c = json::parse(line);
    ++n_cases;
    INFO("case: ", c.at("name").get<std::string>());

    ParseConfig cfg = config_for(
        style_from_tag(c.at("style").get<std::string>()),
        c.at("duration").get<double>());
    if (c.contains("max_windows")) cfg.max_windows = c.at("max_windows");
    if (c.contains("take_first_only")) {
      cfg.take_first_only = c.at("take_first_only");
    }

    const Prediction pred =
        parse_prediction(c.at("raw").get<std::string>(), cfg);

    const auto& expect = c.at("expect_windows");
    REQUIRE(pred.windows.size() == expect.size());
    for (std::size_t i = 0; i < pred.windows.size(); ++i) {
      CHECK(pred.windows[i].start_s ==
            doctest::Approx(expect[i][0].get<double>()).epsilon(1e-9));
      CHECK(pred.windows[i].end_s ==
            doctest::Approx(expect[i][1].get<double>()).epsilon(1e-9));
    }
    CHECK(parse_status_name(pred.parse_status) ==
          c.at("expect_status").get<std::string>());

    const auto& expect_answer = c.at("expect_answer");
    if (expect_answer.is_null()) {
      CHECK(!pred.answer_index.has_value());
    } else {
      REQUIRE(pred.answer_index.has_value());
      const std::string letter = expect_answer.get<std::string>();
      CHECK(*pred.answer_index == letter[0] - 'A');
    }
    CHECK(pred.raw_text == c.at("raw").get<std::string>());
  }
  CHECK(n_cases >= 30);
}

TEST_CASE("single time tokens invert per style") {
  TimestampStyle abs_int = style_from_tag("abs-int");
  TimestampStyle rel_int = style_from_tag("rel-int");
  TimestampStyle rel_dec = style_from_tag("rel-dec");
  CHECK(parse_time("80", abs_int, 200.0) == doctest::Approx(80.0));
  CHECK(parse_time("0.40", rel_dec, 200.0) == doctest::Approx(80.0));
  CHECK(parse_time("40", rel_int, 200.0) == doctest::Approx(80.0));
  CHECK_THROWS_AS(parse_time("abc", abs_int, 200.0), std::invalid_argument);
  CHECK_THROWS_AS(parse_time("", abs_int, 200.0), std::invalid_argument);
}

TEST_CASE("render then parse is a fixed point per style") {
  std::mt19937_64 rng(7);
  for (const char* tag : {"abs-int", "abs-dec", "rel-int", "rel-dec"}) {
    const TimestampStyle style = style_from_tag(tag);
    for (int trial = 0; trial < 100; ++trial) {
      const double duration = 30.0 + (rng() % 571);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const double a = unit(rng) * duration;
      const double b = unit(rng) * duration;
      const std::vector<TimeInterval> windows = {
          make_interval(std::min(a, b), std::max(a, b))};

      const std::string rendered = render_windows(windows, style, duration);
      const Prediction parsed =
          parse_prediction(rendered, config_for(style, duration));
      INFO("style ", tag, " rendered ", rendered);
      REQUIRE(parsed.windows.size() == 1);
      CHECK(render_windows(parsed.windows, style, duration) == rendered);
      CHECK(parsed.parse_status != ParseStatus::Failed);
    }
  }
}

TEST_CASE("integer-grid windows round-trip exactly under abs-int") {
  const TimestampStyle style = style_from_tag("abs-int");
  const double duration = 120.0;
  // Already in start order; render_windows would sort them anyway.
  const std::vector<TimeInterval> windows = {{0, 120}, {3, 9}, {14, 57}};
  const std::string rendered = render_windows(windows, style, duration);
  const Prediction parsed =
      parse_prediction(rendered, config_for(style, duration));
  REQUIRE(parsed.windows.size() == windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    CHECK(parsed.windows[i].start_s == windows[i].start_s);
    CHECK(parsed.windows[i].end_s == windows[i].end_s);
  }
  CHECK(parsed.parse_status == ParseStatus::Clean);
}

TEST_CASE("prose around a strict list changes status but not windows") {
  const ParseConfig cfg = config_for(style_from_tag("abs-int"), 60.0);
  const Prediction bare = parse_prediction("[[10, 20], [30, 40]]", cfg);
  const Prediction wrapped = parse_prediction(
      "Here is my reasoning.\n[[10, 20], [30, 40]]\nHope that helps!", cfg);
  REQUIRE(bare.windows.size() == 2);
  REQUIRE(wrapped.windows.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(bare.windows[i].start_s == wrapped.windows[i].start_s);
    CHECK(bare.windows[i].end_s == wrapped.windows[i].end_s);
  }
  CHECK(bare.parse_status == ParseStatus::Clean);
  CHECK(wrapped.parse_status == ParseStatus::Repaired);
}

TEST_CASE("parsed windows always satisfy interval invariants") {
  const char* noisy[] = {
      "[[55, 10]]",
      "ANSWER: [900, -3]",
      "maybe [[12.5, 90]] or [[-4, 2]]",
      "[[0, 0], [60, 60]]",
      "```\n[7, 9]\n```",
  };
  for (const char* raw : noisy) {
    for (const char* tag : {"abs-int", "rel-dec"}) {
      const ParseConfig cfg = config_for(style_from_tag(tag), 60.0);
      const Prediction pred = parse_prediction(raw, cfg);
      for (const auto& w : pred.windows) {
        CHECK(w.valid());
        CHECK(w.start_s >= 0.0);
        CHECK(w.end_s <= cfg.duration_s);
      }
      if (pred.parse_status == ParseStatus::Failed) {
        CHECK(pred.windows.empty());
      }
    }
  }
}

TEST_CASE("parse configuration is validated") {
  ParseConfig cfg;
  cfg.duration_s = 0.0;
  CHECK_THROWS_AS(parse_prediction("[[1, 2]]", cfg), std::invalid_argument);
  cfg.duration_s = 10.0;
  cfg.max_windows = 0;
  CHECK_THROWS_AS(parse_prediction("[[1, 2]]", cfg), std::invalid_argument);
}
