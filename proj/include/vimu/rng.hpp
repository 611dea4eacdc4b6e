#pragma once

#include <cstdint>
#include <random>

#include "vimu/imu_model.hpp"

namespace vimu {

/// Independent random substream keyed by (seed, run, stream). Two streams
/// with different keys never share state, so trials can be evaluated in any
/// order or on any thread and still produce identical draws.
class SubstreamRng {
 public:
  SubstreamRng(std::uint64_t seed, std::uint64_t run, std::uint64_t stream);

  double normal() { return normal_(engine_); }
  Vec3 normal3() { return {normal(), normal(), normal()}; }
  NoiseDraw noise_draw() { return {normal3(), normal3()}; }
  double uniform(double lo, double hi);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace vimu
