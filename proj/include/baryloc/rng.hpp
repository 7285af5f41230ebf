#pragma once

#include <cstdint>
#include <random>

namespace baryloc {

using Rng = std::mt19937_64;

// Independent purposes get independent streams, so switching one noise
// source on or off leaves every other draw of the run unchanged.
enum class Stream : std::uint64_t {
  Scene = 1,
  Initialization = 2,
  Motion = 3,
  Ranging = 4,
  CommNoise = 5,
  LinkSampling = 6,
  MotionNoise = 7,
  WeightNoise = 8,
  Scheduling = 9,
  Filter = 10,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Seed for (master, replicate, purpose). Pure function of its arguments.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replicate,
                          Stream purpose) noexcept;

inline Rng make_stream(std::uint64_t master, std::uint64_t replicate, Stream purpose) {
  return Rng(derive_seed(master, replicate, purpose));
}

}  // namespace baryloc
