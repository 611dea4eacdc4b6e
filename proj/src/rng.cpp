#include "vimu/rng.hpp"

namespace vimu {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t run, std::uint64_t stream) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(run), hi(run), lo(stream), hi(stream), 0x5eedu};
  return std::mt19937_64(seq);
}

}  // namespace

SubstreamRng::SubstreamRng(std::uint64_t seed, std::uint64_t run, std::uint64_t stream)
    : engine_(make_engine(seed, run, stream)) {}

double SubstreamRng::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

}  // namespace vimu
