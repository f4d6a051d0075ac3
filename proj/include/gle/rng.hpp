#pragma once

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace gle {

/// Purpose tags so that streams used for different jobs never collide even
/// when they share a master seed and an index.
enum class StreamDomain : std::uint64_t {
  Trajectory = 1,
  InitialModes = 2,
  GibbsSampling = 3,
  Coupling = 4,
  Uniform = 5,
};

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of the stream for (master seed, domain, index). A pure function, so
/// stream i is the same regardless of how work is split across threads.
constexpr std::uint64_t derive_stream_seed(std::uint64_t master, StreamDomain domain,
                                           std::uint64_t index) noexcept {
  return mix64(mix64(mix64(master) ^ static_cast<std::uint64_t>(domain)) ^ mix64(index));
}

/// One independent random stream: 64-bit Mersenne twister with ziggurat normals.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}
  RngStream(std::uint64_t master, StreamDomain domain, std::uint64_t index)
      : RngStream(derive_stream_seed(master, domain, index)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_;
  boost::random::uniform_01<double> uniform_;
};

}  // namespace gle
