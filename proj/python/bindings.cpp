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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dffoct/dynamic.hpp"
#include "dffoct/errors.hpp"
#include "dffoct/io.hpp"
#include "dffoct/metrics.hpp"
#include "dffoct/simulate.hpp"
#include "dffoct/stack.hpp"
#include "dffoct/svd_filter.hpp"
#include "dffoct/version.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

using FloatCube = py::array_t<float, py::array::c_style | py::array::forcecast>;
using FloatImage =
    py::array_t<float, py::array::c_style | py::array::forcecast>;

// ndarray (frames, height, width) <-> Stack; the C-contiguous axis order
// matches the stack layout sample for sample.
dffoct::Stack stack_from_array(const FloatCube& array,
                               std::optional<double> frame_rate_hz,
                               std::optional<double> wavelength_nm) {
  if (array.ndim() != 3) {
    throw dffoct::ArgumentError("stack array must be (frames, height, width)");
  }
  dffoct::Stack s;
  s.frames = static_cast<std::size_t>(array.shape(0));
  s.height = static_cast<std::size_t>(array.shape(1));
  s.width = static_cast<std::size_t>(array.shape(2));
  s.frame_rate_hz = frame_rate_hz;
  s.wavelength_nm = wavelength_nm;
  s.data.resize(static_cast<std::size_t>(array.size()));
  std::memcpy(s.data.data(), array.data(), s.data.size() * sizeof(float));
  s.validate();
  return s;
}

py::array_t<float> array_from_stack(const dffoct::Stack& s) {
  py::array_t<float> array({s.frames, s.height, s.width});
  std::memcpy(array.mutable_data(), s.data.data(),
              s.data.size() * sizeof(float));
  return array;
}

py::array_t<float> array_from_image(const dffoct::DynamicImage& image) {
  py::array_t<float> array({image.height, image.width});
  std::memcpy(array.mutable_data(), image.values.data(),
              image.values.size() * sizeof(float));
  return array;
}

dffoct::DynamicImage image_from_array(const FloatImage& array) {
  if (array.ndim() != 2) {
    throw dffoct::ArgumentError("image array must be (height, width)");
  }
  dffoct::DynamicImage image;
  image.height = static_cast<std::size_t>(array.shape(0));
  image.width = static_cast<std::size_t>(array.shape(1));
  image.values.resize(static_cast<std::size_t>(array.size()));
  std::memcpy(image.values.data(), array.data(),
              image.values.size() * sizeof(float));
  return image;
}

dffoct::io::MaskImage mask_from_array(
    const py::array_t<std::uint32_t,
                      py::array::c_style | py::array::forcecast>& array) {
  if (array.ndim() != 2) {
    throw dffoct::ArgumentError("mask array must be (height, width)");
  }
  dffoct::io::MaskImage mask;
  mask.height = static_cast<std::size_t>(array.shape(0));
  mask.width = static_cast<std::size_t>(array.shape(1));
  mask.labels.assign(array.data(), array.data() + array.size());
  return mask;
}

dffoct::FilterConfig make_filter_config(double threshold_mult,
                                        std::size_t max_candidates,
                                        const std::vector<std::size_t>& manual,
                                        std::size_t tile_width,
                                        std::size_t tile_height,
                                        std::size_t workers,
                                        std::size_t memory_budget_bytes) {
  dffoct::FilterConfig c;
  c.threshold_multiplier = threshold_mult;
  if (max_candidates > 0) {
    c.max_candidate_index = max_candidates;
  }
  if (!manual.empty()) {
    c.detector = dffoct::Detector::kManual;
    c.manual_indices = manual;
  }
  c.tile_width = tile_width;
  c.tile_height = tile_height;
  c.n_workers = workers;
  c.memory_budget_bytes = memory_budget_bytes;
  return c;
}

}  // namespace

PYBIND11_MODULE(dffoct, m) {
  m.doc() = "Motion-artifact filtering and dynamic-contrast imaging for "
            "full-field OCT time stacks";
  m.attr("__version__") = dffoct::kVersion;

  m.def(
      "scene_template",
      [](const std::string& name, std::size_t width, std::size_t height,
         std::size_t frames, std::uint64_t seed, bool with_bulk_motion) {
        const dffoct::SceneBundle b = dffoct::scene_template(
            name, width, height, frames, seed, with_bulk_motion);
        json doc;
        doc["config"] = dffoct::to_json(b.config);
        doc["scene"] = dffoct::to_json(b.scene);
        return doc.dump();
      },
      py::arg("name"), py::arg("width"), py::arg("height"), py::arg("frames"),
      py::arg("seed") = 1, py::arg("with_bulk_motion") = false,
      "Scene JSON document for a built-in template "
      "(fibers, cells, drifting-tissue)");

  m.def("scene_template_names", &dffoct::scene_template_names);

  m.def(
      "simulate",
      [](const std::string& scene_doc) {
        const json doc = json::parse(scene_doc, nullptr, false);
        if (doc.is_discarded() || !doc.contains("config") ||
            !doc.contains("scene")) {
          throw dffoct::ConfigError(
              "scene document needs 'config' and 'scene' objects");
        }
        const dffoct::SimConfig config =
            dffoct::sim_config_from_json(doc.at("config"));
        const dffoct::SceneSpec scene =
            dffoct::scene_from_json(doc.at("scene"), config);
        auto [stack, truth] = dffoct::simulate_stack(config, scene);
        return py::make_tuple(array_from_stack(stack),
                              dffoct::to_json(truth).dump());
      },
      py::arg("scene_doc"),
      "Render a stack from a scene JSON document; returns "
      "(array(frames, height, width), truth_json)");

  m.def("phase_from_displacement", &dffoct::phase_from_displacement,
        py::arg("z_nm"), py::arg("wavelength_nm"),
        "Round-trip interferometric phase of an axial displacement");

  m.def(
      "filter_stack",
      [](const FloatCube& array, double threshold_mult,
         std::size_t max_candidates, const std::vector<std::size_t>& manual,
         std::size_t tile_width, std::size_t tile_height, std::size_t workers,
         std::size_t memory_budget_bytes, std::optional<double> frame_rate_hz,
         std::optional<double> wavelength_nm) {
        const dffoct::Stack stack =
            stack_from_array(array, frame_rate_hz, wavelength_nm);
        const dffoct::FilterConfig config = make_filter_config(
            threshold_mult, max_candidates, manual, tile_width, tile_height,
            workers, memory_budget_bytes);
        dffoct::FilterReport report;
        dffoct::DynamicImage artifact;
        const dffoct::Stack filtered =
            dffoct::filter_stack(stack, config, &report, &artifact);
        return py::make_tuple(array_from_stack(filtered),
                              report.to_json().dump(),
                              array_from_image(artifact));
      },
      py::arg("stack"), py::arg("threshold_mult") = 3.0,
      py::arg("max_candidates") = 0,
      py::arg("manual_indices") = std::vector<std::size_t>{},
      py::arg("tile_width") = 0, py::arg("tile_height") = 0,
      py::arg("workers") = 0, py::arg("memory_budget_bytes") = 0,
      py::arg("frame_rate_hz") = std::nullopt,
      py::arg("wavelength_nm") = std::nullopt,
      "Returns (filtered, report_json, artifact_image)");

  m.def(
      "zero_crossing_rate",
      [](const std::vector<double>& series) {
        return dffoct::zero_crossing_rate(series);
      },
      py::arg("series"));

  m.def(
      "dyn_std",
      [](const FloatCube& array, std::size_t window, std::size_t stride) {
        dffoct::DynConfig c;
        c.method = dffoct::DynMethod::kStd;
        c.window = window;
        c.stride = stride;
        return array_from_image(
            dffoct::dyn_std(stack_from_array(array, {}, {}), c));
      },
      py::arg("stack"), py::arg("window") = 50, py::arg("stride") = 0);

  m.def(
      "dyn_cumsum",
      [](const FloatCube& array, std::size_t window, std::size_t stride) {
        dffoct::DynConfig c;
        c.method = dffoct::DynMethod::kCumsum;
        c.window = window;
        c.stride = stride;
        return array_from_image(
            dffoct::dyn_cumsum(stack_from_array(array, {}, {}), c));
      },
      py::arg("stack"), py::arg("window") = 50, py::arg("stride") = 0);

  m.def("bridge_max_cdf", &dffoct::bridge_max_cdf, py::arg("u"));

  m.def(
      "bridge_max_samples",
      [](std::size_t n_frames, std::size_t n_trials, std::uint64_t seed) {
        const std::vector<double> s =
            dffoct::bridge_max_samples(n_frames, n_trials, seed);
        py::array_t<double> array(static_cast<py::ssize_t>(s.size()));
        std::memcpy(array.mutable_data(), s.data(),
                    s.size() * sizeof(double));
        return array;
      },
      py::arg("n_frames"), py::arg("n_trials"), py::arg("seed") = 1);

  m.def(
      "snr_per_cell",
      [](const FloatImage& image,
         const py::array_t<std::uint32_t,
                           py::array::c_style | py::array::forcecast>& mask) {
        return dffoct::snr_per_cell(image_from_array(image),
                                    mask_from_array(mask))
            .to_json()
            .dump();
      },
      py::arg("image"), py::arg("mask"),
      "Per-cell contrast report as a JSON string");

  m.def(
      "snr_gain",
      [](const FloatImage& image_a, const FloatImage& image_b,
         const py::array_t<std::uint32_t,
                           py::array::c_style | py::array::forcecast>& mask) {
        const dffoct::io::MaskImage m2 = mask_from_array(mask);
        const dffoct::SnrReport a =
            dffoct::snr_per_cell(image_from_array(image_a), m2);
        const dffoct::SnrReport b =
            dffoct::snr_per_cell(image_from_array(image_b), m2);
        return dffoct::snr_gain(a, b).to_json(a, b).dump();
      },
      py::arg("image_a"), py::arg("image_b"), py::arg("mask"),
      "Per-cell gain report (b over a) as a JSON string");

  m.def(
      "read_stack",
      [](const std::string& path) {
        const dffoct::Stack s = dffoct::io::read_stack(path);
        py::dict meta;
        if (s.frame_rate_hz) {
          meta["frame_rate_hz"] = *s.frame_rate_hz;
        }
        if (s.wavelength_nm) {
          meta["wavelength_nm"] = *s.wavelength_nm;
        }
        return py::make_tuple(array_from_stack(s), meta);
      },
      py::arg("path"), "Returns (array(frames, height, width), metadata)");

  m.def(
      "write_stack",
      [](const FloatCube& array, const std::string& path,
         std::optional<double> frame_rate_hz,
         std::optional<double> wavelength_nm) {
        dffoct::io::write_stack(
            stack_from_array(array, frame_rate_hz, wavelength_nm), path);
      },
      py::arg("stack"), py::arg("path"),
      py::arg("frame_rate_hz") = std::nullopt,
      py::arg("wavelength_nm") = std::nullopt);

  m.def(
      "read_image",
      [](const std::string& path) {
        return array_from_image(dffoct::io::read_image(path));
      },
      py::arg("path"));

  m.def(
      "write_image",
      [](const FloatImage& array, const std::string& path,
         const std::string& format) {
        dffoct::io::ImageFormat f;
        if (format == "dstk") {
          f = dffoct::io::ImageFormat::kDstk2d;
        } else if (format == "pgm") {
          f = dffoct::io::ImageFormat::kPgm16;
        } else {
          throw dffoct::ArgumentError("format must be 'dstk' or 'pgm'");
        }
        dffoct::io::write_image(image_from_array(array), path, f);
      },
      py::arg("image"), py::arg("path"), py::arg("format") = "dstk");
}
