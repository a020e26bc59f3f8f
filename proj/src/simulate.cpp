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

#include "dffoct/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "dffoct/rng.hpp"

namespace dffoct {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<std::pair<std::size_t, std::size_t>> shape_pixels(
    const RegionShape& shape) {
  std::vector<std::pair<std::size_t, std::size_t>> px;
  switch (shape.kind) {
    case RegionShape::Kind::kRect:
      for (std::size_t y = shape.y0; y < shape.y1; ++y) {
        for (std::size_t x = shape.x0; x < shape.x1; ++x) {
          px.emplace_back(x, y);
        }
      }
      break;
    case RegionShape::Kind::kDisk: {
      const double r2 = shape.radius * shape.radius;
      const long x_lo = static_cast<long>(std::floor(shape.cx - shape.radius));
      const long x_hi = static_cast<long>(std::ceil(shape.cx + shape.radius));
      const long y_lo = static_cast<long>(std::floor(shape.cy - shape.radius));
      const long y_hi = static_cast<long>(std::ceil(shape.cy + shape.radius));
      for (long y = y_lo; y <= y_hi; ++y) {
        for (long x = x_lo; x <= x_hi; ++x) {
          const double dx = static_cast<double>(x) - shape.cx;
          const double dy = static_cast<double>(y) - shape.cy;
          if (dx * dx + dy * dy <= r2 && x >= 0 && y >= 0) {
            px.emplace_back(static_cast<std::size_t>(x),
                            static_cast<std::size_t>(y));
          }
        }
      }
      break;
    }
    case RegionShape::Kind::kPixels:
      px = shape.pixels;
      break;
  }
  return px;
}

std::vector<double> bulk_trace(const MotionSpec& motion,
                               const SimConfig& config) {
  std::vector<double> z(config.frames, 0.0);
  switch (motion.kind) {
    case MotionSpec::Kind::kNone:
      break;
    case MotionSpec::Kind::kSinusoid: {
      if (motion.frequency_hz < 0.0 || motion.amplitude_nm < 0.0) {
        throw ConfigError("sinusoid motion needs non-negative amplitude "
                          "and frequency");
      }
      const double w = 2.0 * kPi * motion.frequency_hz / config.frame_rate_hz;
      for (std::size_t t = 0; t < config.frames; ++t) {
        z[t] = motion.amplitude_nm *
               std::sin(w * static_cast<double>(t) + motion.phase);
      }
      break;
    }
    case MotionSpec::Kind::kRandomWalk: {
      if (motion.std_nm_per_frame < 0.0) {
        throw ConfigError("random-walk motion needs a non-negative step std");
      }
      double acc = 0.0;
      for (std::size_t t = 0; t < config.frames; ++t) {
        acc += motion.std_nm_per_frame *
               rng::gaussian(config.rng_seed, rng::Stream::kBulkMotion, 0, t);
        z[t] = acc;
      }
      break;
    }
    case MotionSpec::Kind::kTrace:
      if (motion.z_nm.size() != config.frames) {
        throw ConfigError("motion trace length " +
                          std::to_string(motion.z_nm.size()) +
                          " does not match frames " +
                          std::to_string(config.frames));
      }
      z = motion.z_nm;
      break;
  }
  return z;
}

std::string json_type_error(const std::string& path, const char* expected) {
  return "scene document: '" + path + "' must be " + expected;
}

double number_at(const nlohmann::json& j, const std::string& path,
                 const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ConfigError(json_type_error(path + "." + key, "a number"));
  }
  return j.at(key).get<double>();
}

double number_or(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key)) {
    return fallback;
  }
  if (!j.at(key).is_number()) {
    throw ConfigError(json_type_error(key, "a number"));
  }
  return j.at(key).get<double>();
}

std::size_t index_at(const nlohmann::json& j, const std::string& path,
                     const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_unsigned()) {
    throw ConfigError(json_type_error(path + "." + key,
                                      "a non-negative integer"));
  }
  return j.at(key).get<std::size_t>();
}

std::string string_at(const nlohmann::json& j, const std::string& path,
                      const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw ConfigError(json_type_error(path + "." + key, "a string"));
  }
  return j.at(key).get<std::string>();
}

}  // namespace

void SimConfig::validate() const {
  if (width < 1 || height < 1) {
    throw ConfigError("simulation dims must be >= 1");
  }
  if (frames < 2) {
    throw ConfigError("simulation needs at least 2 frames");
  }
  if (!(wavelength_nm > 0.0)) {
    throw ConfigError("wavelength_nm must be positive");
  }
  if (!(quantum_efficiency > 0.0 && quantum_efficiency <= 1.0)) {
    throw ConfigError("quantum_efficiency must be in (0, 1]");
  }
  if (!(r_ref > 0.0 && r_ref <= 1.0)) {
    throw ConfigError("r_ref must be in (0, 1]");
  }
  if (r_inc < 0.0) {
    throw ConfigError("r_inc must be >= 0");
  }
  if (!(frame_rate_hz > 0.0)) {
    throw ConfigError("frame_rate_hz must be positive");
  }
  if (camera_noise_std < 0.0) {
    throw ConfigError("camera_noise_std must be >= 0");
  }
  if (source_intensity < 0.0) {
    throw ConfigError("source_intensity must be >= 0");
  }
}

double phase_from_displacement(double z_nm, double wavelength_nm) {
  if (!(wavelength_nm > 0.0)) {
    throw ArgumentError("wavelength must be positive");
  }
  return 4.0 * kPi * z_nm / wavelength_nm;
}

std::pair<Stack, SimGroundTruth> simulate_stack(const SimConfig& config,
                                                const SceneSpec& scene) {
  config.validate();
  const std::size_t n_px = config.width * config.height;

  SimGroundTruth truth;
  truth.width = config.width;
  truth.height = config.height;
  truth.label_map.assign(n_px, PixelKind::kBackground);
  truth.motility_map.assign(n_px, 0.0f);
  truth.region_id_map.assign(n_px, 0);

  // Rasterize regions; each pixel may belong to at most one region.
  std::vector<double> refl(n_px, 0.0);
  std::vector<double> walk_std(n_px, 0.0);
  std::vector<double> walk_drift(n_px, 0.0);
  std::vector<std::uint8_t> claimed(n_px, 0);
  std::uint32_t motile_id = 0;
  for (const Region& region : scene.regions) {
    if (region.kind != Region::Kind::kBackground && region.r_s < 0.0) {
      throw ConfigError("region reflectivity must be >= 0");
    }
    if (region.kind == Region::Kind::kMotile) {
      if (!(region.walk.std_radians_per_frame > 0.0)) {
        throw ConfigError("motile walk std must be positive");
      }
      if (!std::isfinite(region.walk.drift_radians_per_frame)) {
        throw ConfigError("motile walk drift must be finite");
      }
      ++motile_id;
    }
    for (const auto& [x, y] : shape_pixels(region.shape)) {
      if (x >= config.width || y >= config.height) {
        throw DimensionError("scene region exceeds configured dims at (" +
                             std::to_string(x) + ", " + std::to_string(y) +
                             ")");
      }
      const std::size_t p = y * config.width + x;
      if (claimed[p]) {
        throw ConfigError("scene regions overlap at (" + std::to_string(x) +
                          ", " + std::to_string(y) + ")");
      }
      claimed[p] = 1;
      switch (region.kind) {
        case Region::Kind::kBackground:
          break;
        case Region::Kind::kStaticReflector:
          truth.label_map[p] = PixelKind::kStaticReflector;
          refl[p] = region.r_s;
          break;
        case Region::Kind::kMotile:
          truth.label_map[p] = PixelKind::kMotile;
          truth.motility_map[p] =
              static_cast<float>(region.walk.std_radians_per_frame);
          truth.region_id_map[p] = motile_id;
          refl[p] = region.r_s;
          walk_std[p] = region.walk.std_radians_per_frame;
          if (region.walk.kind == WalkSpec::Kind::kBiasedGaussian) {
            walk_drift[p] = region.walk.drift_radians_per_frame;
          }
          break;
      }
    }
  }

  truth.z_trace_nm = bulk_trace(scene.bulk_motion, config);

  const double prefactor =
      config.quantum_efficiency * config.source_intensity / 4.0;
  std::vector<double> base(n_px);
  std::vector<double> coherent(n_px);
  std::vector<double> phase(n_px);  // phi0 now, phi0 + walk as frames advance
  for (std::size_t p = 0; p < n_px; ++p) {
    base[p] = prefactor * (refl[p] + config.r_inc + config.r_ref);
    coherent[p] = 2.0 * prefactor * std::sqrt(refl[p] * config.r_ref);
    phase[p] = (refl[p] > 0.0)
                   ? 2.0 * kPi * rng::uniform01(config.rng_seed,
                                                rng::Stream::kInitialPhase, p,
                                                0)
                   : 0.0;
  }

  Stack stack;
  stack.width = config.width;
  stack.height = config.height;
  stack.frames = config.frames;
  stack.frame_rate_hz = config.frame_rate_hz;
  stack.wavelength_nm = config.wavelength_nm;
  stack.data.resize(n_px * config.frames);

  const bool noisy = config.camera_noise_std > 0.0;
  for (std::size_t t = 0; t < config.frames; ++t) {
    const double theta =
        phase_from_displacement(truth.z_trace_nm[t], config.wavelength_nm);
    float* frame = stack.data.data() + t * n_px;
    for (std::size_t p = 0; p < n_px; ++p) {
      if (walk_std[p] > 0.0) {
        phase[p] += walk_std[p] * rng::gaussian(config.rng_seed,
                                                rng::Stream::kWalkStep, p, t) +
                    walk_drift[p];
      }
      double intensity = base[p];
      if (coherent[p] > 0.0) {
        intensity += coherent[p] * std::cos(phase[p] + theta);
      }
      if (noisy) {
        intensity += config.camera_noise_std *
                     rng::gaussian(config.rng_seed, rng::Stream::kCameraNoise,
                                   p, t);
      }
      frame[p] = static_cast<float>(intensity);
    }
  }
  return {std::move(stack), std::move(truth)};
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw ConfigError("scene document: 'config' must be an object");
  }
  SimConfig c;
  c.width = index_at(j, "config", "width");
  c.height = index_at(j, "config", "height");
  c.frames = index_at(j, "config", "frames");
  c.wavelength_nm = number_or(j, "wavelength_nm", c.wavelength_nm);
  c.source_intensity = number_or(j, "source_intensity", c.source_intensity);
  c.quantum_efficiency =
      number_or(j, "quantum_efficiency", c.quantum_efficiency);
  c.r_ref = number_or(j, "r_ref", c.r_ref);
  c.r_inc = number_or(j, "r_inc", c.r_inc);
  c.frame_rate_hz = number_or(j, "frame_rate_hz", c.frame_rate_hz);
  c.camera_noise_std = number_or(j, "camera_noise_std", c.camera_noise_std);
  if (j.contains("rng_seed")) {
    if (!j.at("rng_seed").is_number_unsigned()) {
      throw ConfigError(
          json_type_error("config.rng_seed", "a non-negative integer"));
    }
    c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  }
  c.validate();
  return c;
}

namespace {

RegionShape shape_from_json(const nlohmann::json& j, const std::string& path) {
  RegionShape s;
  const std::string type = string_at(j, path, "type");
  if (type == "rect") {
    s.kind = RegionShape::Kind::kRect;
    s.x0 = index_at(j, path, "x0");
    s.y0 = index_at(j, path, "y0");
    s.x1 = index_at(j, path, "x1");
    s.y1 = index_at(j, path, "y1");
  } else if (type == "disk") {
    s.kind = RegionShape::Kind::kDisk;
    s.cx = number_at(j, path, "cx");
    s.cy = number_at(j, path, "cy");
    s.radius = number_at(j, path, "radius");
  } else if (type == "pixels") {
    s.kind = RegionShape::Kind::kPixels;
    if (!j.contains("pixels") || !j.at("pixels").is_array()) {
      throw ConfigError(json_type_error(path + ".pixels", "an array"));
    }
    for (const auto& e : j.at("pixels")) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() ||
          !e[1].is_number_unsigned()) {
        throw ConfigError(
            json_type_error(path + ".pixels[]", "an [x, y] pair"));
      }
      s.pixels.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
    }
  } else {
    throw ConfigError(json_type_error(path + ".type",
                                      "'rect', 'disk' or 'pixels'"));
  }
  return s;
}

WalkSpec walk_from_json(const nlohmann::json& j, const std::string& path) {
  WalkSpec w;
  const std::string kind = string_at(j, path, "kind");
  if (kind == "centered_gaussian") {
    w.kind = WalkSpec::Kind::kCenteredGaussian;
  } else if (kind == "biased_gaussian") {
    w.kind = WalkSpec::Kind::kBiasedGaussian;
    w.drift_radians_per_frame = number_at(j, path, "drift");
  } else {
    throw ConfigError(json_type_error(
        path + ".kind", "'centered_gaussian' or 'biased_gaussian'"));
  }
  w.std_radians_per_frame = number_at(j, path, "std");
  return w;
}

MotionSpec motion_from_json(const nlohmann::json& j) {
  MotionSpec m;
  const std::string path = "scene.bulk_motion";
  const std::string kind = string_at(j, path, "kind");
  if (kind == "none") {
    m.kind = MotionSpec::Kind::kNone;
  } else if (kind == "sinusoid") {
    m.kind = MotionSpec::Kind::kSinusoid;
    m.amplitude_nm = number_at(j, path, "amplitude_nm");
    m.frequency_hz = number_at(j, path, "frequency_hz");
    m.phase = number_or(j, "phase", 0.0);
  } else if (kind == "random_walk") {
    m.kind = MotionSpec::Kind::kRandomWalk;
    m.std_nm_per_frame = number_at(j, path, "std_nm_per_frame");
  } else if (kind == "trace") {
    m.kind = MotionSpec::Kind::kTrace;
    if (!j.contains("z_nm") || !j.at("z_nm").is_array()) {
      throw ConfigError(json_type_error(path + ".z_nm", "an array"));
    }
    for (const auto& e : j.at("z_nm")) {
      if (!e.is_number()) {
        throw ConfigError(json_type_error(path + ".z_nm[]", "a number"));
      }
      m.z_nm.push_back(e.get<double>());
    }
  } else {
    throw ConfigError(json_type_error(
        path + ".kind", "'none', 'sinusoid', 'random_walk' or 'trace'"));
  }
  return m;
}

}  // namespace

SceneSpec scene_from_json(const nlohmann::json& j, const SimConfig& config) {
  (void)config;
  if (!j.is_object()) {
    throw ConfigError("scene document: 'scene' must be an object");
  }
  SceneSpec s;
  if (j.contains("bulk_motion")) {
    s.bulk_motion = motion_from_json(j.at("bulk_motion"));
  }
  if (!j.contains("regions") || !j.at("regions").is_array()) {
    throw ConfigError(json_type_error("scene.regions", "an array"));
  }
  std::size_t i = 0;
  for (const auto& rj : j.at("regions")) {
    const std::string path = "scene.regions[" + std::to_string(i++) + "]";
    Region r;
    const std::string kind = string_at(rj, path, "kind");
    if (kind == "background") {
      r.kind = Region::Kind::kBackground;
    } else if (kind == "static_reflector") {
      r.kind = Region::Kind::kStaticReflector;
      r.r_s = number_at(rj, path, "r_s");
    } else if (kind == "motile") {
      r.kind = Region::Kind::kMotile;
      r.r_s = number_at(rj, path, "r_s");
      if (!rj.contains("walk")) {
        throw ConfigError(json_type_error(path + ".walk", "an object"));
      }
      r.walk = walk_from_json(rj.at("walk"), path + ".walk");
    } else {
      throw ConfigError(json_type_error(
          path + ".kind", "'background', 'static_reflector' or 'motile'"));
    }
    if (!rj.contains("shape")) {
      throw ConfigError(json_type_error(path + ".shape", "an object"));
    }
    r.shape = shape_from_json(rj.at("shape"), path + ".shape");
    s.regions.push_back(std::move(r));
  }
  return s;
}

nlohmann::json to_json(const SimConfig& config) {
  nlohmann::json j;
  j["width"] = config.width;
  j["height"] = config.height;
  j["frames"] = config.frames;
  j["wavelength_nm"] = config.wavelength_nm;
  j["source_intensity"] = config.source_intensity;
  j["quantum_efficiency"] = config.quantum_efficiency;
  j["r_ref"] = config.r_ref;
  j["r_inc"] = config.r_inc;
  j["frame_rate_hz"] = config.frame_rate_hz;
  j["camera_noise_std"] = config.camera_noise_std;
  j["rng_seed"] = config.rng_seed;
  return j;
}

nlohmann::json to_json(const SceneSpec& scene) {
  nlohmann::json j;
  nlohmann::json motion;
  switch (scene.bulk_motion.kind) {
    case MotionSpec::Kind::kNone:
      motion["kind"] = "none";
      break;
    case MotionSpec::Kind::kSinusoid:
      motion["kind"] = "sinusoid";
      motion["amplitude_nm"] = scene.bulk_motion.amplitude_nm;
      motion["frequency_hz"] = scene.bulk_motion.frequency_hz;
      motion["phase"] = scene.bulk_motion.phase;
      break;
    case MotionSpec::Kind::kRandomWalk:
      motion["kind"] = "random_walk";
      motion["std_nm_per_frame"] = scene.bulk_motion.std_nm_per_frame;
      break;
    case MotionSpec::Kind::kTrace:
      motion["kind"] = "trace";
      motion["z_nm"] = scene.bulk_motion.z_nm;
      break;
  }
  j["bulk_motion"] = std::move(motion);
  nlohmann::json regions = nlohmann::json::array();
  for (const Region& r : scene.regions) {
    nlohmann::json rj;
    switch (r.kind) {
      case Region::Kind::kBackground:
        rj["kind"] = "background";
        break;
      case Region::Kind::kStaticReflector:
        rj["kind"] = "static_reflector";
        rj["r_s"] = r.r_s;
        break;
      case Region::Kind::kMotile: {
        rj["kind"] = "motile";
        rj["r_s"] = r.r_s;
        nlohmann::json wj;
        wj["kind"] = r.walk.kind == WalkSpec::Kind::kCenteredGaussian
                         ? "centered_gaussian"
                         : "biased_gaussian";
        wj["std"] = r.walk.std_radians_per_frame;
        if (r.walk.kind == WalkSpec::Kind::kBiasedGaussian) {
          wj["drift"] = r.walk.drift_radians_per_frame;
        }
        rj["walk"] = std::move(wj);
        break;
      }
    }
    nlohmann::json sj;
    switch (r.shape.kind) {
      case RegionShape::Kind::kRect:
        sj["type"] = "rect";
        sj["x0"] = r.shape.x0;
        sj["y0"] = r.shape.y0;
        sj["x1"] = r.shape.x1;
        sj["y1"] = r.shape.y1;
        break;
      case RegionShape::Kind::kDisk:
        sj["type"] = "disk";
        sj["cx"] = r.shape.cx;
        sj["cy"] = r.shape.cy;
        sj["radius"] = r.shape.radius;
        break;
      case RegionShape::Kind::kPixels: {
        sj["type"] = "pixels";
        nlohmann::json px = nlohmann::json::array();
        for (const auto& [x, y] : r.shape.pixels) {
          px.push_back(nlohmann::json::array({x, y}));
        }
        sj["pixels"] = std::move(px);
        break;
      }
    }
    rj["shape"] = std::move(sj);
    regions.push_back(std::move(rj));
  }
  j["regions"] = std::move(regions);
  return j;
}

nlohmann::json to_json(const SimGroundTruth& truth) {
  nlohmann::json j;
  j["width"] = truth.width;
  j["height"] = truth.height;
  std::vector<int> labels(truth.label_map.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = static_cast<int>(truth.label_map[i]);
  }
  j["labels"] = labels;
  j["motility"] = truth.motility_map;
  j["region_ids"] = truth.region_id_map;
  j["z_trace_nm"] = truth.z_trace_nm;
  return j;
}

SimGroundTruth ground_truth_from_json(const nlohmann::json& j) {
  SimGroundTruth t;
  t.width = index_at(j, "truth", "width");
  t.height = index_at(j, "truth", "height");
  const auto expect_array = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key) || !j.at(key).is_array()) {
      throw ConfigError(json_type_error(std::string("truth.") + key,
                                        "an array"));
    }
    return j.at(key);
  };
  for (const auto& e : expect_array("labels")) {
    const int v = e.get<int>();
    if (v < 0 || v > 2) {
      throw ConfigError("truth.labels[] must be 0, 1 or 2");
    }
    t.label_map.push_back(static_cast<PixelKind>(v));
  }
  for (const auto& e : expect_array("motility")) {
    t.motility_map.push_back(e.get<float>());
  }
  for (const auto& e : expect_array("region_ids")) {
    t.region_id_map.push_back(e.get<std::uint32_t>());
  }
  for (const auto& e : expect_array("z_trace_nm")) {
    t.z_trace_nm.push_back(e.get<double>());
  }
  const std::size_t n = t.width * t.height;
  if (t.label_map.size() != n || t.motility_map.size() != n ||
      t.region_id_map.size() != n) {
    throw DimensionError("truth maps do not match dims");
  }
  return t;
}

namespace {

// Deterministic helper draws for template construction.
double scene_u(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return rng::uniform01(seed, rng::Stream::kScene, a, b);
}

// Disk pixels minus already-claimed ones, clipped to the image.
RegionShape carve_disk(double cx, double cy, double radius, std::size_t width,
                       std::size_t height,
                       std::vector<std::uint8_t>& claimed) {
  RegionShape shape;
  shape.kind = RegionShape::Kind::kPixels;
  RegionShape disk;
  disk.kind = RegionShape::Kind::kDisk;
  disk.cx = cx;
  disk.cy = cy;
  disk.radius = radius;
  for (const auto& [x, y] : shape_pixels(disk)) {
    if (x >= width || y >= height) {
      continue;
    }
    const std::size_t p = y * width + x;
    if (!claimed[p]) {
      claimed[p] = 1;
      shape.pixels.emplace_back(x, y);
    }
  }
  return shape;
}

void add_strips(SceneSpec& scene, std::vector<std::uint8_t>& claimed,
                std::size_t width, std::size_t height, bool vertical,
                double r_s, std::uint64_t seed, std::uint64_t jitter_tag) {
  const std::size_t span = vertical ? width : height;
  const std::size_t n_strips = std::max<std::size_t>(3, span / 21);
  for (std::size_t k = 0; k < n_strips; ++k) {
    const std::size_t slot = k * span / n_strips;
    const std::size_t jitter =
        static_cast<std::size_t>(scene_u(seed, jitter_tag, k) * 3.0);
    const std::size_t lo = std::min(slot + jitter, span - 2);
    Region strip;
    strip.kind = Region::Kind::kStaticReflector;
    strip.r_s = r_s;
    strip.shape.kind = RegionShape::Kind::kRect;
    if (vertical) {
      strip.shape.x0 = lo;
      strip.shape.x1 = lo + 2;
      strip.shape.y0 = 0;
      strip.shape.y1 = height;
    } else {
      strip.shape.x0 = 0;
      strip.shape.x1 = width;
      strip.shape.y0 = lo;
      strip.shape.y1 = lo + 2;
    }
    for (const auto& [x, y] : shape_pixels(strip.shape)) {
      claimed[y * width + x] = 1;
    }
    scene.regions.push_back(std::move(strip));
  }
}

// Grid of jittered disks; claimed pixels (strips) are left out so regions
// stay disjoint. make_walk(i) supplies each cell's motion model.
template <typename WalkFn>
void add_cell_grid(SceneSpec& scene, std::vector<std::uint8_t>& claimed,
                   std::size_t width, std::size_t height, std::size_t pitch,
                   double r_s, std::uint64_t seed, std::uint64_t tag,
                   WalkFn make_walk) {
  std::size_t cell_index = 0;
  for (std::size_t gy = 0; gy + pitch <= height; gy += pitch) {
    for (std::size_t gx = 0; gx + pitch <= width; gx += pitch) {
      const double radius = 4.0 + 2.0 * scene_u(seed, tag, 3 * cell_index);
      const double jx = 4.0 * scene_u(seed, tag, 3 * cell_index + 1) - 2.0;
      const double jy = 4.0 * scene_u(seed, tag, 3 * cell_index + 2) - 2.0;
      const double half = static_cast<double>(pitch) / 2.0;
      double cx = static_cast<double>(gx) + half + jx;
      double cy = static_cast<double>(gy) + half + jy;
      cx = std::clamp(cx, radius, static_cast<double>(width - 1) - radius);
      cy = std::clamp(cy, radius, static_cast<double>(height - 1) - radius);
      Region cell;
      cell.kind = Region::Kind::kMotile;
      cell.r_s = r_s;
      cell.walk = make_walk(cell_index);
      cell.shape = carve_disk(cx, cy, radius, width, height, claimed);
      if (!cell.shape.pixels.empty()) {
        scene.regions.push_back(std::move(cell));
      }
      ++cell_index;
    }
  }
}

}  // namespace

SceneBundle scene_template(const std::string& name, std::size_t width,
                           std::size_t height, std::size_t frames,
                           std::uint64_t seed, bool with_bulk_motion) {
  SceneBundle b;
  b.config.width = width;
  b.config.height = height;
  b.config.frames = frames;
  b.config.source_intensity = 16000.0;
  b.config.quantum_efficiency = 1.0;
  b.config.r_ref = 0.1;
  b.config.r_inc = 0.3;
  b.config.camera_noise_std = 2.0;
  b.config.rng_seed = seed;
  std::vector<std::uint8_t> claimed(width * height, 0);

  if (name == "fibers") {
    // Bright static strips over motile cells with graded walk speeds, so
    // the ensemble temporal spectrum falls off smoothly from low frequency
    // to the white camera-noise floor.
    add_strips(b.scene, claimed, width, height, /*vertical=*/true, 0.05, seed,
               11);
    add_cell_grid(b.scene, claimed, width, height, /*pitch=*/16, 1e-4, seed,
                  12, [&](std::size_t i) {
                    WalkSpec w;
                    w.kind = WalkSpec::Kind::kCenteredGaussian;
                    const double u = scene_u(seed, 13, i);
                    w.std_radians_per_frame =
                        0.3 * std::exp(u * std::log(2.5 / 0.3));
                    return w;
                  });
    if (with_bulk_motion) {
      b.scene.bulk_motion.kind = MotionSpec::Kind::kSinusoid;
      b.scene.bulk_motion.amplitude_nm = 100.0;
      b.scene.bulk_motion.frequency_hz = 5.0;
      b.scene.bulk_motion.phase = 0.0;
    }
  } else if (name == "cells") {
    // Dim cells with biased walks on a pure-noise background; both drift
    // directions are present so the bias is not a global trend.
    add_cell_grid(b.scene, claimed, width, height, /*pitch=*/16, 1e-4, seed,
                  21, [&](std::size_t i) {
                    WalkSpec w;
                    w.kind = WalkSpec::Kind::kBiasedGaussian;
                    w.std_radians_per_frame = 0.03;
                    const double u = scene_u(seed, 22, i);
                    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
                    w.drift_radians_per_frame = sign * (0.03 + 0.03 * u);
                    return w;
                  });
    if (with_bulk_motion) {
      b.scene.bulk_motion.kind = MotionSpec::Kind::kSinusoid;
      b.scene.bulk_motion.amplitude_nm = 50.0;
      b.scene.bulk_motion.frequency_hz = 5.0;
    }
  } else if (name == "drifting-tissue") {
    // Dim, slowly fluctuating cells under random-walk bulk motion, the
    // regime where the whole sample drifts axially. Deliberately free of
    // bright static structures: those couple the mean-intensity direction
    // into the rejected components and leave a common low-frequency
    // residue on every pixel after truncation.
    add_cell_grid(b.scene, claimed, width, height, /*pitch=*/18, 4e-5, seed,
                  32, [&](std::size_t i) {
                    WalkSpec w;
                    w.kind = WalkSpec::Kind::kCenteredGaussian;
                    const double u = scene_u(seed, 33, i);
                    w.std_radians_per_frame =
                        0.06 * std::exp(u * std::log(0.2 / 0.06));
                    return w;
                  });
    if (with_bulk_motion) {
      b.scene.bulk_motion.kind = MotionSpec::Kind::kRandomWalk;
      b.scene.bulk_motion.std_nm_per_frame = 25.0;
    }
  } else {
    throw ConfigError("unknown scene template '" + name +
                      "'; available: fibers, cells, drifting-tissue");
  }
  return b;
}

std::vector<std::string> scene_template_names() {
  return {"fibers", "cells", "drifting-tissue"};
}

}  // namespace dffoct
