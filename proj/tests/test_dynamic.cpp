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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"

#include "dffoct/dynamic.hpp"
#include "dffoct/errors.hpp"
#include "dffoct/rng.hpp"
#include "dffoct/stack.hpp"

using dffoct::DynConfig;
using dffoct::DynMethod;

namespace {

// Stack with one pixel per row of `series`.
dffoct::Stack stack_of(const std::vector<std::vector<float>>& series) {
  dffoct::Stack s;
  s.width = series.size();
  s.height = 1;
  s.frames = series[0].size();
  s.data.resize(s.width * s.frames);
  for (std::size_t p = 0; p < s.width; ++p) {
    for (std::size_t t = 0; t < s.frames; ++t) {
      s.data[t * s.width + p] = series[p][t];
    }
  }
  return s;
}

// Independent reimplementation of both window statistics, scalar and naive.
double oracle_pixel(const std::vector<float>& x, std::size_t window,
                    std::size_t stride, DynMethod method) {
  double total = 0.0;
  std::size_t n_windows = 0;
  for (std::size_t start = 0; start + window <= x.size(); start += stride) {
    double mean = 0.0;
    for (std::size_t i = 0; i < window; ++i) {
      mean += x[start + i];
    }
    mean /= static_cast<double>(window);
    if (method == DynMethod::kStd) {
      double var = 0.0;
      for (std::size_t i = 0; i < window; ++i) {
        const double d = x[start + i] - mean;
        var += d * d;
      }
      total += std::sqrt(var / static_cast<double>(window));
    } else {
      double cum = 0.0;
      double peak = 0.0;
      for (std::size_t i = 0; i < window; ++i) {
        cum += x[start + i] - mean;
        peak = std::max(peak, std::abs(cum));
      }
      total += peak;
    }
    ++n_windows;
  }
  return total / static_cast<double>(n_windows);
}

std::vector<float> white_noise(std::size_t n, std::uint64_t seed,
                               std::uint64_t pixel) {
  std::vector<float> x(n);
  for (std::size_t t = 0; t < n; ++t) {
    x[t] = static_cast<float>(
        dffoct::rng::gaussian(seed, dffoct::rng::Stream::kScene, pixel, t));
  }
  return x;
}

}  // namespace

TEST_CASE("dyn config validation") {
  DynConfig c;
  c.window = 50;
  CHECK_NOTHROW(c.validate(100));
  CHECK(c.effective_stride() == 50);
  c.stride = 10;
  CHECK(c.effective_stride() == 10);
  CHECK_NOTHROW(c.validate(100));

  c = DynConfig{};
  c.window = 1;
  CHECK_THROWS_AS(c.validate(100), dffoct::ConfigError);
  c.window = 101;
  CHECK_THROWS_AS(c.validate(100), dffoct::ConfigError);
  c.window = 50;
  c.stride = 51;
  CHECK_THROWS_AS(c.validate(100), dffoct::ConfigError);
}

TEST_CASE("constant series carry no fluctuation under either statistic") {
  dffoct::Stack s = stack_of({std::vector<float>(100, 7.5f)});
  DynConfig c;
  c.window = 10;
  CHECK(dffoct::dyn_std(s, c).values[0] == 0.0f);
  CHECK(dffoct::dyn_cumsum(s, c).values[0] == 0.0f);
}

TEST_CASE("alternating series: both statistics equal the amplitude") {
  // x = a, -a, ... over an even window: mean 0, population SD = a, and the
  // centered partial sums bounce between a and 0 so the peak is also a.
  std::vector<float> x(64);
  for (std::size_t t = 0; t < 64; ++t) {
    x[t] = (t % 2 == 0) ? 3.0f : -3.0f;
  }
  dffoct::Stack s = stack_of({x});
  DynConfig c;
  c.window = 16;
  CHECK(dffoct::dyn_std(s, c).values[0] == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(dffoct::dyn_cumsum(s, c).values[0] ==
        doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("linear ramp: cumsum integrates the drift to slope*window^2/8, "
          "std only sees slope*window/sqrt(12)") {
  const double b = 0.2;
  const std::size_t window = 50;
  std::vector<float> x(window);
  for (std::size_t t = 0; t < window; ++t) {
    x[t] = static_cast<float>(b * static_cast<double>(t));
  }
  dffoct::Stack s = stack_of({x});
  DynConfig c;
  c.window = window;

  const double expected_cumsum =
      b * static_cast<double>(window) * static_cast<double>(window) / 8.0;
  const double expected_std =
      b * std::sqrt((static_cast<double>(window) * window - 1.0) / 12.0);
  const double got_cumsum = dffoct::dyn_cumsum(s, c).values[0];
  const double got_std = dffoct::dyn_std(s, c).values[0];
  CHECK(got_cumsum == doctest::Approx(expected_cumsum).epsilon(1e-5));
  CHECK(got_std == doctest::Approx(expected_std).epsilon(1e-5));
  // The whole point of integrating first: a slow drift is worth ~7x more
  // than its standard deviation at this window length.
  CHECK(got_cumsum / got_std > 15.0);
}

TEST_CASE("both operators match a naive per-window oracle on random data") {
  std::vector<std::vector<float>> series;
  for (std::uint64_t p = 0; p < 6; ++p) {
    series.push_back(white_noise(137, 11, p));
    // Add a per-pixel offset and trend so the windows differ.
    for (std::size_t t = 0; t < series.back().size(); ++t) {
      series.back()[t] +=
          static_cast<float>(10.0 * static_cast<double>(p) +
                             0.01 * static_cast<double>(p * t));
    }
  }
  dffoct::Stack s = stack_of(series);

  struct Variant {
    std::size_t window;
    std::size_t stride;
  };
  for (const Variant v : {Variant{16, 0}, Variant{16, 16}, Variant{16, 5},
                          Variant{137, 0}, Variant{32, 1}}) {
    DynConfig c;
    c.window = v.window;
    c.stride = v.stride;
    dffoct::DynamicImage img_std = dffoct::dyn_std(s, c);
    dffoct::DynamicImage img_cum = dffoct::dyn_cumsum(s, c);
    const std::size_t stride = c.effective_stride();
    for (std::size_t p = 0; p < series.size(); ++p) {
      CHECK(img_std.values[p] ==
            doctest::Approx(oracle_pixel(series[p], v.window, stride,
                                         DynMethod::kStd))
                .epsilon(1e-5));
      CHECK(img_cum.values[p] ==
            doctest::Approx(oracle_pixel(series[p], v.window, stride,
                                         DynMethod::kCumsum))
                .epsilon(1e-5));
    }
  }
}

TEST_CASE("dispatcher routes on method") {
  dffoct::Stack s = stack_of({white_noise(64, 2, 0)});
  DynConfig c;
  c.window = 16;
  c.method = DynMethod::kStd;
  CHECK(dffoct::dynamic_image(s, c).values ==
        dffoct::dyn_std(s, c).values);
  c.method = DynMethod::kCumsum;
  CHECK(dffoct::dynamic_image(s, c).values ==
        dffoct::dyn_cumsum(s, c).values);
}

TEST_CASE("translation leaves both statistics unchanged; scaling is "
          "homogeneous") {
  const std::vector<float> x = white_noise(128, 5, 3);
  std::vector<float> shifted = x;
  std::vector<float> scaled = x;
  for (std::size_t t = 0; t < x.size(); ++t) {
    shifted[t] += 1000.0f;
    scaled[t] *= 8.0f;
  }
  dffoct::Stack s = stack_of({x, shifted, scaled});
  DynConfig c;
  c.window = 32;
  for (auto op : {dffoct::dyn_std, dffoct::dyn_cumsum}) {
    dffoct::DynamicImage img = op(s, c);
    CHECK(img.values[1] == doctest::Approx(img.values[0]).epsilon(1e-4));
    CHECK(img.values[2] ==
          doctest::Approx(8.0 * img.values[0]).epsilon(1e-5));
  }
}

TEST_CASE("white-noise calibration: mean window SD and mean peak partial "
          "sum at window 50") {
  // For unit white noise and window 50 the window SD concentrates near
  // sqrt(49/50)*c4(50) ~ 0.985 and the mean peak |partial sum| near 5.58.
  // 2000 windows put the standard error below 0.5% for both.
  dffoct::Stack s = stack_of({white_noise(100000, 17, 0)});
  DynConfig c;
  c.window = 50;
  const double mean_sd = dffoct::dyn_std(s, c).values[0];
  const double mean_peak = dffoct::dyn_cumsum(s, c).values[0];
  CHECK(mean_sd > 0.970);
  CHECK(mean_sd < 1.000);
  CHECK(mean_peak > 5.40);
  CHECK(mean_peak < 5.76);
  // The two statistics sit in a fixed ratio on white noise; drift-driven
  // pixels break it upward, which is what the contrast gain measures.
  CHECK(mean_peak / mean_sd > 5.3);
  CHECK(mean_peak / mean_sd < 6.0);
}

TEST_CASE("bridge supremum CDF: 1 - exp(-2u^2)") {
  CHECK(dffoct::bridge_max_cdf(0.0) == 0.0);
  CHECK(dffoct::bridge_max_cdf(0.5) ==
        doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-12));
  CHECK(dffoct::bridge_max_cdf(1.0) ==
        doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-12));
  CHECK(dffoct::bridge_max_cdf(3.0) ==
        doctest::Approx(1.0 - std::exp(-18.0)).epsilon(1e-12));
  CHECK_THROWS_AS(dffoct::bridge_max_cdf(-0.1), dffoct::ArgumentError);
}

TEST_CASE("bridge supremum of explicit increment lists") {
  // S = (1, 0): ends at zero, peak 1 at j = 1.
  CHECK(dffoct::bridge_sup({1.0, -1.0}) == doctest::Approx(1.0));
  // Pure drift is cancelled by the pinning: the bridge never leaves zero.
  CHECK(dffoct::bridge_sup({-1.0, -1.0}) == doctest::Approx(0.0));
  CHECK(dffoct::bridge_sup({2.0, 2.0, 2.0, 2.0}) == doctest::Approx(0.0));
  // S = (2, 2): bridge peaks at j = 1 with 2 - (1/2)*4/2... = 1.
  CHECK(dffoct::bridge_sup({2.0, 0.0}) == doctest::Approx(1.0));
  // The supremum includes j = 0, so it is never negative.
  CHECK(dffoct::bridge_sup({-5.0, 2.0, 3.0}) >= 0.0);
  CHECK_THROWS_AS(dffoct::bridge_sup({}), dffoct::ArgumentError);
}

TEST_CASE("bridge supremum is invariant to a constant bias in the "
          "increments") {
  std::vector<double> steps(256);
  for (std::size_t t = 0; t < 256; ++t) {
    steps[t] =
        dffoct::rng::gaussian(23, dffoct::rng::Stream::kBridge, 9, t);
  }
  const double base = dffoct::bridge_sup(steps);
  for (double& v : steps) {
    v += 0.7;  // the (j/n) S_n term subtracts any per-step constant exactly
  }
  CHECK(dffoct::bridge_sup(steps) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("bridge_max_samples: deterministic, normalized, close to the "
          "continuous law") {
  const std::vector<double> a = dffoct::bridge_max_samples(64, 100, 3);
  const std::vector<double> b = dffoct::bridge_max_samples(64, 100, 3);
  CHECK(a == b);
  const std::vector<double> c = dffoct::bridge_max_samples(64, 100, 4);
  CHECK(a != c);
  REQUIRE(a.size() == 100);
  for (double v : a) {
    CHECK(v >= 0.0);
  }
  CHECK_THROWS_AS(dffoct::bridge_max_samples(1, 10, 0), dffoct::Error);
  CHECK_THROWS_AS(dffoct::bridge_max_samples(64, 0, 0), dffoct::Error);

  // Kolmogorov-Smirnov distance against 1 - exp(-2u^2) with 2000 samples
  // at 512 steps; the acceptance gate pins the full-size version.
  std::vector<double> samples = dffoct::bridge_max_samples(512, 2000, 7);
  std::sort(samples.begin(), samples.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double model = dffoct::bridge_max_cdf(samples[i]);
    const double hi = static_cast<double>(i + 1) / 2000.0;
    const double lo = static_cast<double>(i) / 2000.0;
    ks = std::max(ks, std::max(std::abs(model - hi), std::abs(model - lo)));
  }
  CHECK(ks < 0.035);
}
