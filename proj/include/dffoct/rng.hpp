// Copyright 2026 The dffoct Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DFFOCT_RNG_HPP_
#define DFFOCT_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>

namespace dffoct {

// Counter-based random numbers: every variate is a pure function of
// (seed, stream, a, b), so any evaluation order, chunking or thread split
// produces bit-identical results. a/b are caller-defined coordinates,
// typically (pixel, frame) or (trial, sample).
namespace rng {

// Independent substreams so that, for example, camera noise never shifts
// when the walk model changes.
enum class Stream : std::uint64_t {
  kInitialPhase = 1,
  kWalkStep = 2,
  kCameraNoise = 3,
  kBulkMotion = 4,
  kScene = 5,
  kBridge = 6,
};

inline std::uint64_t mix64(std::uint64_t x) {
  // SplitMix64 finalizer.
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

inline std::uint64_t hash(std::uint64_t seed, Stream stream, std::uint64_t a,
                          std::uint64_t b) {
  std::uint64_t h = seed + 0x9e3779b97f4a7c15ULL;
  h = mix64(h ^ (static_cast<std::uint64_t>(stream) * 0xa0761d6478bd642fULL));
  h = mix64(h ^ (a * 0xe7037ed1a0b428dbULL));
  h = mix64(h ^ (b * 0x8ebc6af09c88c6e3ULL));
  return h;
}

// Uniform on (0, 1]; never returns 0 so it is safe under log().
inline double uniform01(std::uint64_t seed, Stream stream, std::uint64_t a,
                        std::uint64_t b) {
  return static_cast<double>((hash(seed, stream, a, b) >> 11) + 1) * 0x1.0p-53;
}

// Standard normal via Box-Muller on two derived uniforms. Stateless: the
// counter b is internally doubled, so callers enumerate b = 0, 1, 2, ...
inline double gaussian(std::uint64_t seed, Stream stream, std::uint64_t a,
                       std::uint64_t b) {
  const double u1 = uniform01(seed, stream, a, 2 * b);
  const double u2 = uniform01(seed, stream, a, 2 * b + 1);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace rng
}  // namespace dffoct

#endif  // DFFOCT_RNG_HPP_
