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

#include "dffoct/dynamic.hpp"

#include <algorithm>
#include <cmath>

#include "dffoct/rng.hpp"

namespace dffoct {

void DynConfig::validate(std::size_t frames) const {
  if (window < 2) {
    throw ConfigError("window must cover at least 2 frames");
  }
  if (window > frames) {
    throw ConfigError("window " + std::to_string(window) +
                      " exceeds available frames " + std::to_string(frames));
  }
  const std::size_t s = effective_stride();
  if (s < 1 || s > window) {
    throw ConfigError("stride must be in [1, window], got " +
                      std::to_string(s));
  }
}

namespace {

// Calls visit(start) for every window start; at least one window fits once
// DynConfig::validate passed.
template <typename Fn>
std::size_t for_each_window(std::size_t frames, const DynConfig& config,
                            Fn visit) {
  const std::size_t stride = config.effective_stride();
  std::size_t n_windows = 0;
  for (std::size_t s = 0; s + config.window <= frames; s += stride) {
    visit(s);
    ++n_windows;
  }
  return n_windows;
}

}  // namespace

DynamicImage dyn_std(const Stack& stack, const DynConfig& config) {
  stack.validate();
  config.validate(stack.frames);
  const std::size_t n_px = stack.n_pixels();
  const double tau = static_cast<double>(config.window);
  std::vector<double> acc(n_px, 0.0);
  std::vector<double> sum(n_px);
  std::vector<double> sum_sq(n_px);
  const std::size_t n_windows =
      for_each_window(stack.frames, config, [&](std::size_t start) {
        std::fill(sum.begin(), sum.end(), 0.0);
        std::fill(sum_sq.begin(), sum_sq.end(), 0.0);
        for (std::size_t t = start; t < start + config.window; ++t) {
          const float* frame = stack.data.data() + t * n_px;
          for (std::size_t p = 0; p < n_px; ++p) {
            const double v = frame[p];
            sum[p] += v;
            sum_sq[p] += v * v;
          }
        }
        for (std::size_t p = 0; p < n_px; ++p) {
          const double mean = sum[p] / tau;
          const double var = std::max(0.0, sum_sq[p] / tau - mean * mean);
          acc[p] += std::sqrt(var);
        }
      });
  DynamicImage image;
  image.width = stack.width;
  image.height = stack.height;
  image.values.resize(n_px);
  for (std::size_t p = 0; p < n_px; ++p) {
    image.values[p] = static_cast<float>(acc[p] / n_windows);
  }
  return image;
}

DynamicImage dyn_cumsum(const Stack& stack, const DynConfig& config) {
  stack.validate();
  config.validate(stack.frames);
  const std::size_t n_px = stack.n_pixels();
  const double tau = static_cast<double>(config.window);
  std::vector<double> acc(n_px, 0.0);
  std::vector<double> mean(n_px);
  std::vector<double> cum(n_px);
  std::vector<double> peak(n_px);
  const std::size_t n_windows =
      for_each_window(stack.frames, config, [&](std::size_t start) {
        std::fill(mean.begin(), mean.end(), 0.0);
        for (std::size_t t = start; t < start + config.window; ++t) {
          const float* frame = stack.data.data() + t * n_px;
          for (std::size_t p = 0; p < n_px; ++p) {
            mean[p] += frame[p];
          }
        }
        for (std::size_t p = 0; p < n_px; ++p) {
          mean[p] /= tau;
        }
        std::fill(cum.begin(), cum.end(), 0.0);
        std::fill(peak.begin(), peak.end(), 0.0);
        for (std::size_t t = start; t < start + config.window; ++t) {
          const float* frame = stack.data.data() + t * n_px;
          for (std::size_t p = 0; p < n_px; ++p) {
            cum[p] += frame[p] - mean[p];
            peak[p] = std::max(peak[p], std::abs(cum[p]));
          }
        }
        for (std::size_t p = 0; p < n_px; ++p) {
          acc[p] += peak[p];
        }
      });
  DynamicImage image;
  image.width = stack.width;
  image.height = stack.height;
  image.values.resize(n_px);
  for (std::size_t p = 0; p < n_px; ++p) {
    image.values[p] = static_cast<float>(acc[p] / n_windows);
  }
  return image;
}

DynamicImage dynamic_image(const Stack& stack, const DynConfig& config) {
  return config.method == DynMethod::kStd ? dyn_std(stack, config)
                                          : dyn_cumsum(stack, config);
}

double bridge_max_cdf(double u) {
  if (u < 0.0) {
    throw ArgumentError("bridge supremum statistic is non-negative");
  }
  return 1.0 - std::exp(-2.0 * u * u);
}

double bridge_sup(const std::vector<double>& increments) {
  const std::size_t n = increments.size();
  if (n == 0) {
    throw ArgumentError("bridge supremum needs at least one increment");
  }
  double total = 0.0;
  for (double x : increments) {
    total += x;
  }
  const double slope = total / static_cast<double>(n);
  double s = 0.0;
  double sup = 0.0;  // j = 0 term
  for (std::size_t j = 1; j <= n; ++j) {
    s += increments[j - 1];
    sup = std::max(sup, s - slope * static_cast<double>(j));
  }
  return sup;
}

std::vector<double> bridge_max_samples(std::size_t n_frames,
                                       std::size_t n_trials,
                                       std::uint64_t seed) {
  if (n_frames < 2) {
    throw ArgumentError("bridge sampling needs at least 2 increments");
  }
  if (n_trials < 1) {
    throw ArgumentError("bridge sampling needs at least 1 trial");
  }
  const double norm = std::sqrt(static_cast<double>(n_frames));
  std::vector<double> samples(n_trials);
  std::vector<double> steps(n_frames);
  for (std::size_t trial = 0; trial < n_trials; ++trial) {
    for (std::size_t t = 0; t < n_frames; ++t) {
      steps[t] = rng::gaussian(seed, rng::Stream::kBridge, trial, t);
    }
    samples[trial] =
        (bridge_sup(steps) + kDiscreteSupremumCorrection) / norm;
  }
  return samples;
}

}  // namespace dffoct
