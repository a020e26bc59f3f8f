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

#ifndef DFFOCT_SIMULATE_HPP_
#define DFFOCT_SIMULATE_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dffoct/stack.hpp"

namespace dffoct {

// Per-pixel phase evolution of a motile scatterer. Centered walks model
// stationary intracellular motion; biased walks model a scatterer crossing
// the coherence volume at roughly constant velocity.
struct WalkSpec {
  enum class Kind { kCenteredGaussian, kBiasedGaussian };
  Kind kind = Kind::kCenteredGaussian;
  double std_radians_per_frame = 0.1;
  double drift_radians_per_frame = 0.0;  // biased walks only
};

// Global axial displacement z(t) of the sample, in nanometers.
struct MotionSpec {
  enum class Kind { kNone, kSinusoid, kRandomWalk, kTrace };
  Kind kind = Kind::kNone;
  double amplitude_nm = 0.0;   // sinusoid
  double frequency_hz = 0.0;   // sinusoid
  double phase = 0.0;          // sinusoid, radians
  double std_nm_per_frame = 0.0;  // random walk
  std::vector<double> z_nm;    // explicit trace, length = frames
};

// Pixel set of a scene region. Shapes keep scene files compact; an explicit
// pixel list covers everything else.
struct RegionShape {
  enum class Kind { kRect, kDisk, kPixels };
  Kind kind = Kind::kRect;
  // rect: [x0, x1) x [y0, y1)
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  // disk: center and radius (pixels inside or on the circle)
  double cx = 0.0, cy = 0.0, radius = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> pixels;
};

struct Region {
  enum class Kind { kBackground, kStaticReflector, kMotile };
  Kind kind = Kind::kBackground;
  double r_s = 0.0;  // sample reflectivity of the region
  WalkSpec walk;     // motile regions only
  RegionShape shape;
};

// Regions must cover disjoint pixel sets; pixels outside every region are
// background (zero sample reflectivity).
struct SceneSpec {
  std::vector<Region> regions;
  MotionSpec bulk_motion;
};

struct SimConfig {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t frames = 0;
  double wavelength_nm = 660.0;
  double source_intensity = 16000.0;   // I0, arbitrary units
  double quantum_efficiency = 1.0;     // in (0, 1]
  double r_ref = 0.1;                  // reference reflectivity, in (0, 1]
  double r_inc = 0.0;                  // incoherent reflectivity, >= 0
  double frame_rate_hz = 150.0;
  double camera_noise_std = 0.0;       // additive Gaussian on intensity
  std::uint64_t rng_seed = 0;

  void validate() const;
};

enum class PixelKind : std::uint8_t {
  kBackground = 0,
  kStaticReflector = 1,
  kMotile = 2,
};

// Oracle surface: what the simulator knows that a real acquisition hides.
// region_id_map assigns 1-based ids to motile regions (0 elsewhere) so a
// segmentation mask can be derived without re-rasterizing the scene.
struct SimGroundTruth {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<PixelKind> label_map;
  std::vector<float> motility_map;  // walk std per pixel, 0 if non-motile
  std::vector<std::uint32_t> region_id_map;
  std::vector<double> z_trace_nm;   // per frame
};

// Interferometric phase of an axial displacement: 4*pi*z / lambda (the
// optical path doubles on reflection, and the fringe period is lambda/2).
double phase_from_displacement(double z_nm, double wavelength_nm);

// Generates a stack from the interference model. Per pixel r and frame t:
//   I(r,t) = eta*I0/4 * (R + R_inc + R_ref + 2*sqrt(R*R_ref)*cos(dphi))
//            + camera noise,
//   dphi(r,t) = phi0(r) + walk(r,t) + 4*pi*z(t)/lambda.
// Static reflectors keep walk = 0; background pixels have R = 0. The same
// seed and inputs give a bit-identical stack regardless of evaluation
// order (counter-based RNG). Throws DimensionError when a region exceeds
// the configured dims and ConfigError on overlapping regions or parameter
// violations.
std::pair<Stack, SimGroundTruth> simulate_stack(const SimConfig& config,
                                                const SceneSpec& scene);

// JSON codecs for the CLI scene documents; schema documented in README.
SimConfig sim_config_from_json(const nlohmann::json& j);
SceneSpec scene_from_json(const nlohmann::json& j, const SimConfig& config);
nlohmann::json to_json(const SimConfig& config);
nlohmann::json to_json(const SceneSpec& scene);
nlohmann::json to_json(const SimGroundTruth& truth);
SimGroundTruth ground_truth_from_json(const nlohmann::json& j);

// Built-in scene templates (returned as config + scene so they can be
// serialized, edited and replayed):
//  - "fibers": bright static strips over dim motile cells of mixed speeds,
//    optionally shaken by a sinusoidal bulk motion. Exercises artifact
//    detection and removal.
//  - "cells": many dim cells with biased phase walks on a noise background.
//    Exercises the contrast operators and SNR metrics.
//  - "drifting-tissue": dim slow cells under random-walk bulk motion, no
//    bright static structure (bright statics couple the mean-intensity
//    direction into rejected components and leave a common low-frequency
//    residue after truncation). Exercises the combined filter + contrast
//    pipeline.
// The seed randomizes placement and per-region parameters deterministically.
struct SceneBundle {
  SimConfig config;
  SceneSpec scene;
};
SceneBundle scene_template(const std::string& name, std::size_t width,
                           std::size_t height, std::size_t frames,
                           std::uint64_t seed, bool with_bulk_motion);
std::vector<std::string> scene_template_names();

}  // namespace dffoct

#endif  // DFFOCT_SIMULATE_HPP_
