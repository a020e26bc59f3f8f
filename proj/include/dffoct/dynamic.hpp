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

#ifndef DFFOCT_DYNAMIC_HPP_
#define DFFOCT_DYNAMIC_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dffoct/errors.hpp"
#include "dffoct/stack.hpp"

namespace dffoct {

enum class DynMethod {
  kStd,     // mean over windows of the within-window standard deviation
  kCumsum,  // mean over windows of max |cumulative sum of centered samples|
};

struct DynConfig {
  DynMethod method = DynMethod::kStd;
  std::size_t window = 50;  // frames per window
  std::size_t stride = 0;   // window start spacing; 0 means non-overlapping

  // Throws unless 2 <= window <= frames and 1 <= stride <= window.
  void validate(std::size_t frames) const;
  std::size_t effective_stride() const {
    return stride == 0 ? window : stride;
  }
};

// Running standard deviation: each pixel's value is the mean over windows of
// the population standard deviation (divisor = window) of its samples in
// that window. Sensitive to fluctuation amplitude at the window timescale.
DynamicImage dyn_std(const Stack& stack, const DynConfig& config);

// Windowed cumulative-sum statistic: within each window the samples are
// centered on the window mean, partial sums are accumulated and the maximum
// absolute partial sum is taken; the pixel value is the mean over windows.
// Integrating before taking the extremum rewards slow, persistent drifts
// that a standard deviation of the same window barely sees.
DynamicImage dyn_cumsum(const Stack& stack, const DynConfig& config);

// Dispatches on config.method.
DynamicImage dynamic_image(const Stack& stack, const DynConfig& config);

// CDF of the supremum of a standard Brownian bridge on [0, 1]:
// P(sup B <= u) = 1 - exp(-2 u^2). Throws ArgumentError for u < 0.
double bridge_max_cdf(double u);

// max over j in [0, n] of (S_j - (j/n) S_n) where S is the running sum of
// the increments. The signed supremum of the bridge pinned at both ends;
// no normalization or discreteness correction is applied.
double bridge_sup(const std::vector<double>& increments);

// Mean overshoot of a unit-variance random walk's discrete maximum against
// the continuous supremum (Siegmund's corrected diffusion constant,
// -zeta(1/2)/sqrt(2*pi)). Added before normalizing so finite-n samples
// follow the continuous law above.
inline constexpr double kDiscreteSupremumCorrection = 0.5826;

// Monte Carlo samples of the normalized bridge supremum built from
// n_frames unit gaussian increments: (sup + correction) / sqrt(n_frames).
// Deterministic in (n_frames, n_trials, seed).
std::vector<double> bridge_max_samples(std::size_t n_frames,
                                       std::size_t n_trials,
                                       std::uint64_t seed);

}  // namespace dffoct

#endif  // DFFOCT_DYNAMIC_HPP_
