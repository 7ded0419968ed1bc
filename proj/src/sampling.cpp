#include "tgeval/sampling.hpp"

#include <mutex>
#include <random>
#include <stdexcept>

namespace tgeval {

namespace {

std::mt19937_64& process_rng() {
  static std::mt19937_64 rng(std::random_device{}());
  return rng;
}

std::mutex& process_rng_mutex() {
  static std::mutex m;
  return m;
}

std::vector<double> jittered(std::mt19937_64& rng, int frames,
                             double duration_s) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(frames));
  for (int i = 0; i < frames; ++i) {
    const double lo = duration_s * static_cast<double>(i) / frames;
    const double hi = duration_s * static_cast<double>(i + 1) / frames;
    double t = lo + unit(rng) * (hi - lo);
    if (t <= lo || t >= hi) {
      t = 0.5 * (lo + hi);  // keep the draw strictly inside its interval
    }
    out.push_back(t);
  }
  return out;
}

}  // namespace

std::vector<double> sample_timestamps(const SamplingConfig& cfg,
                                      double duration_s) {
  if (!(duration_s > 0.0)) {
    throw std::invalid_argument("sample_timestamps: duration must be > 0");
  }
  if (cfg.num_frames < 1) {
    throw std::invalid_argument("sample_timestamps: num_frames must be >= 1");
  }

  if (cfg.mode == SamplingMode::Uniform) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(cfg.num_frames));
    for (int i = 1; i <= cfg.num_frames; ++i) {
      out.push_back((i - 0.5) * duration_s / cfg.num_frames);
    }
    return out;
  }

  if (cfg.seed.has_value()) {
    std::mt19937_64 rng(*cfg.seed);
    return jittered(rng, cfg.num_frames, duration_s);
  }
  std::lock_guard<std::mutex> lock(process_rng_mutex());
  return jittered(process_rng(), cfg.num_frames, duration_s);
}

}  // namespace tgeval
