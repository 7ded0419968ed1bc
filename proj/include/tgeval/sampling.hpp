#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace tgeval {

enum class SamplingMode { Uniform, JitteredRandom };

// How to pick the F frame timestamps for a video. Uniform is the inference
// path; JitteredRandom is the training-export path (uniform boundaries plus
// one random draw per interval). An unseeded jittered config draws from a
// process-level RNG; a seeded one is fully deterministic.
struct SamplingConfig {
  int num_frames = 1;
  SamplingMode mode = SamplingMode::Uniform;
  std::optional<std::uint64_t> seed;
};

// Returns strictly ascending timestamps in [0, duration_s], one per frame.
//
// Both modes share the same interval structure: F+1 boundary timestamps with
// the first at 0 and the last at duration_s. Uniform takes the midpoint of
// each interval, t_i = (i - 0.5) * duration_s / F; jittered draws one
// open-interval uniform timestamp per interval, nudging to the interval
// center on a boundary collision.
//
// Throws std::invalid_argument for non-positive durations or num_frames < 1.
std::vector<double> sample_timestamps(const SamplingConfig& cfg,
                                      double duration_s);

}  // namespace tgeval
