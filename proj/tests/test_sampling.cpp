#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "tgeval/sampling.hpp"

using tgeval::SamplingConfig;
using tgeval::SamplingMode;
using tgeval::sample_timestamps;

namespace {

SamplingConfig uniform(int frames) {
  SamplingConfig cfg;
  cfg.num_frames = frames;
  cfg.mode = SamplingMode::Uniform;
  return cfg;
}

SamplingConfig jittered(int frames, std::uint64_t seed) {
  SamplingConfig cfg;
  cfg.num_frames = frames;
  cfg.mode = SamplingMode::JitteredRandom;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("uniform sampling hits interval midpoints") {
  const auto ts = sample_timestamps(uniform(4), 8.0);
  REQUIRE(ts.size() == 4);
  CHECK(ts[0] == doctest::Approx(1.0));
  CHECK(ts[1] == doctest::Approx(3.0));
  CHECK(ts[2] == doctest::Approx(5.0));
  CHECK(ts[3] == doctest::Approx(7.0));
}

TEST_CASE("uniform single frame lands mid-video") {
  const auto ts = sample_timestamps(uniform(1), 10.0);
  REQUIRE(ts.size() == 1);
  CHECK(ts[0] == doctest::Approx(5.0));
}

TEST_CASE("jittered draws stay inside their intervals") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto ts = sample_timestamps(jittered(3, seed), 9.0);
    REQUIRE(ts.size() == 3);
    for (int i = 0; i < 3; ++i) {
      CHECK(ts[i] > 3.0 * i);
      CHECK(ts[i] < 3.0 * (i + 1));
    }
  }
}

TEST_CASE("jittered sampling is deterministic under a fixed seed") {
  const auto a = sample_timestamps(jittered(2, 42), 10.0);
  const auto b = sample_timestamps(jittered(2, 42), 10.0);
  REQUIRE(a.size() == 2);
  CHECK(a == b);

  const auto c = sample_timestamps(jittered(2, 43), 10.0);
  CHECK(a != c);
}

TEST_CASE("outputs are sorted ascending and within range") {
  for (const int frames : {1, 4, 20, 60}) {
    for (const double duration : {0.7, 12.0, 3600.0}) {
      const auto uni = sample_timestamps(uniform(frames), duration);
      const auto jit = sample_timestamps(
          jittered(frames, static_cast<std::uint64_t>(frames)), duration);
      for (const auto& ts : {uni, jit}) {
        REQUIRE(static_cast<int>(ts.size()) == frames);
        for (std::size_t i = 0; i < ts.size(); ++i) {
          CHECK(ts[i] >= 0.0);
          CHECK(ts[i] <= duration);
          if (i > 0) CHECK(ts[i] > ts[i - 1]);
        }
      }
    }
  }
}

TEST_CASE("uniform timestamps lie inside the jitter intervals") {
  const int frames = 7;
  const double duration = 23.0;
  const auto ts = sample_timestamps(uniform(frames), duration);
  for (int i = 0; i < frames; ++i) {
    CHECK(ts[i] > duration * i / frames);
    CHECK(ts[i] < duration * (i + 1) / frames);
  }
}

TEST_CASE("unseeded jitter still respects interval bounds") {
  SamplingConfig cfg;
  cfg.num_frames = 5;
  cfg.mode = SamplingMode::JitteredRandom;
  const auto ts = sample_timestamps(cfg, 15.0);
  REQUIRE(ts.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(ts[i] > 3.0 * i);
    CHECK(ts[i] < 3.0 * (i + 1));
  }
}

TEST_CASE("invalid inputs are rejected") {
  CHECK_THROWS_AS(sample_timestamps(uniform(4), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(sample_timestamps(uniform(4), -1.0), std::invalid_argument);
  CHECK_THROWS_AS(sample_timestamps(uniform(0), 10.0), std::invalid_argument);
}
