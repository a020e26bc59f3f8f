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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dffoct/dynamic.hpp"
#include "dffoct/errors.hpp"
#include "dffoct/io.hpp"
#include "dffoct/metrics.hpp"
#include "dffoct/simulate.hpp"
#include "dffoct/stack.hpp"
#include "dffoct/svd_filter.hpp"
#include "dffoct/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Wh {
  std::size_t w = 0;
  std::size_t h = 0;
};

Wh parse_wh(const std::string& text, const char* flag) {
  Wh r;
  const auto x = text.find('x');
  try {
    if (x == std::string::npos || x == 0 || x + 1 >= text.size()) {
      throw std::invalid_argument("format");
    }
    std::size_t used = 0;
    r.w = std::stoull(text.substr(0, x), &used);
    if (used != x) {
      throw std::invalid_argument("format");
    }
    r.h = std::stoull(text.substr(x + 1), &used);
    if (used != text.size() - x - 1) {
      throw std::invalid_argument("format");
    }
  } catch (const std::exception&) {
    throw dffoct::ArgumentError(std::string(flag) + " expects WxH, got '" +
                                text + "'");
  }
  return r;
}

void parse_whd(const std::string& text, dffoct::SimConfig& config) {
  const auto second = text.rfind('x');
  const auto first = second == std::string::npos
                         ? std::string::npos
                         : text.rfind('x', second - 1);
  if (first == std::string::npos || second == first) {
    throw dffoct::ArgumentError("--size expects WxHxT, got '" + text + "'");
  }
  const Wh wh = parse_wh(text.substr(0, second), "--size");
  try {
    std::size_t used = 0;
    config.frames = std::stoull(text.substr(second + 1), &used);
    if (used != text.size() - second - 1) {
      throw std::invalid_argument("format");
    }
  } catch (const std::exception&) {
    throw dffoct::ArgumentError("--size expects WxHxT, got '" + text + "'");
  }
  config.width = wh.w;
  config.height = wh.h;
}

// Default decomposition budget: three quarters of currently available
// memory, so one oversized run degrades into a clear error instead of
// swapping the machine.
std::size_t auto_budget_bytes() {
  std::ifstream meminfo("/proc/meminfo");
  std::string key;
  std::uint64_t value = 0;
  std::string unit;
  while (meminfo >> key >> value >> unit) {
    if (key == "MemAvailable:") {
      return static_cast<std::size_t>(value * 1024ULL / 4ULL * 3ULL);
    }
  }
  return 0;  // unknown; no cap
}

struct FilterFlags {
  double threshold_mult = 3.0;
  std::string tile;
  std::vector<std::size_t> manual_indices;
  std::size_t max_candidates = 0;  // 0 = unlimited
  std::int64_t budget_mb = -1;     // -1 = auto, 0 = unlimited
  std::size_t workers = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--threshold-mult", threshold_mult,
                    "Outlier gate in units of jump std")
        ->capture_default_str();
    cmd->add_option("--tile", tile,
                    "Process in WxH tiles instead of whole frames");
    cmd->add_option("--manual-indices", manual_indices,
                    "Reject exactly these component indices")
        ->delimiter(',');
    cmd->add_option("--max-candidates", max_candidates,
                    "Only components below this index may be rejected");
    cmd->add_option("--memory-budget-mb", budget_mb,
                    "Peak working-set cap; -1 = auto, 0 = unlimited")
        ->capture_default_str();
    cmd->add_option("--workers", workers,
                    "Tile worker threads; 0 = one per tile");
  }

  dffoct::FilterConfig to_config() const {
    dffoct::FilterConfig c;
    c.threshold_multiplier = threshold_mult;
    if (!tile.empty()) {
      const Wh wh = parse_wh(tile, "--tile");
      c.tile_width = wh.w;
      c.tile_height = wh.h;
    }
    if (!manual_indices.empty()) {
      c.detector = dffoct::Detector::kManual;
      c.manual_indices = manual_indices;
    }
    if (max_candidates > 0) {
      c.max_candidate_index = max_candidates;
    }
    if (budget_mb < 0) {
      c.memory_budget_bytes = auto_budget_bytes();
    } else {
      c.memory_budget_bytes =
          static_cast<std::size_t>(budget_mb) * 1024 * 1024;
    }
    c.n_workers = workers;
    return c;
  }
};

json filter_config_to_json(const dffoct::FilterConfig& c) {
  json j;
  j["detector"] =
      c.detector == dffoct::Detector::kManual ? "manual" : "zcr_outlier";
  j["threshold_multiplier"] = c.threshold_multiplier;
  if (c.max_candidate_index !=
      std::numeric_limits<std::size_t>::max()) {
    j["max_candidate_index"] = c.max_candidate_index;
  }
  j["manual_indices"] = c.manual_indices;
  j["tile_width"] = c.tile_width;
  j["tile_height"] = c.tile_height;
  j["memory_budget_bytes"] = c.memory_budget_bytes;
  j["n_workers"] = c.n_workers;
  return j;
}

dffoct::FilterConfig filter_config_from_json(const json& j) {
  dffoct::FilterConfig c;
  if (j.value("detector", "zcr_outlier") == std::string("manual")) {
    c.detector = dffoct::Detector::kManual;
  }
  c.threshold_multiplier =
      j.value("threshold_multiplier", c.threshold_multiplier);
  if (j.contains("max_candidate_index")) {
    c.max_candidate_index = j.at("max_candidate_index").get<std::size_t>();
  }
  if (j.contains("manual_indices")) {
    j.at("manual_indices").get_to(c.manual_indices);
  }
  c.tile_width = j.value("tile_width", std::size_t{0});
  c.tile_height = j.value("tile_height", std::size_t{0});
  c.memory_budget_bytes = j.value("memory_budget_bytes", std::size_t{0});
  c.n_workers = j.value("n_workers", std::size_t{0});
  return c;
}

dffoct::io::MaskImage mask_from_truth(const dffoct::SimGroundTruth& truth) {
  dffoct::io::MaskImage mask;
  mask.width = truth.width;
  mask.height = truth.height;
  mask.labels = truth.region_id_map;
  return mask;
}

int cmd_simulate(const std::string& scene_path, const std::string& tmpl,
                 const std::string& size, std::uint64_t seed,
                 bool bulk_motion, const std::string& out,
                 const std::string& out_truth, const std::string& out_mask,
                 const std::string& out_scene) {
  dffoct::SceneBundle bundle;
  if (!scene_path.empty()) {
    const json doc = dffoct::io::read_json(scene_path);
    if (!doc.contains("config") || !doc.contains("scene")) {
      throw dffoct::ConfigError(
          "scene document needs 'config' and 'scene' objects");
    }
    bundle.config = dffoct::sim_config_from_json(doc.at("config"));
    bundle.scene = dffoct::scene_from_json(doc.at("scene"), bundle.config);
  } else {
    dffoct::SimConfig dims;
    parse_whd(size, dims);
    bundle = dffoct::scene_template(tmpl, dims.width, dims.height,
                                    dims.frames, seed, bulk_motion);
  }
  auto [stack, truth] = dffoct::simulate_stack(bundle.config, bundle.scene);
  dffoct::io::write_stack(stack, out);
  std::cout << "wrote " << out << " (" << stack.width << "x" << stack.height
            << "x" << stack.frames << ")\n";
  if (!out_truth.empty()) {
    dffoct::io::write_json(dffoct::to_json(truth), out_truth);
  }
  if (!out_mask.empty()) {
    dffoct::io::write_mask(mask_from_truth(truth), out_mask);
  }
  if (!out_scene.empty()) {
    json doc;
    doc["config"] = dffoct::to_json(bundle.config);
    doc["scene"] = dffoct::to_json(bundle.scene);
    dffoct::io::write_json(doc, out_scene);
  }
  return 0;
}

int cmd_filter(const std::string& in, const std::string& out,
               const std::string& report_path,
               const std::string& artifact_path, const FilterFlags& flags) {
  const dffoct::FilterConfig config = flags.to_config();
  const dffoct::Stack stack = dffoct::io::read_stack(in);
  dffoct::FilterReport report;
  dffoct::DynamicImage artifact;
  dffoct::Stack filtered = dffoct::filter_stack(
      stack, config, &report,
      artifact_path.empty() ? nullptr : &artifact);
  dffoct::io::write_stack(filtered, out);
  if (!report_path.empty()) {
    dffoct::io::write_json(report.to_json(), report_path);
  }
  if (!artifact_path.empty()) {
    dffoct::io::write_image(artifact, artifact_path,
                            dffoct::io::ImageFormat::kDstk2d);
  }
  std::cout << "rejected components:";
  for (std::size_t i : report.rejected_indices) {
    std::cout << ' ' << i;
  }
  if (report.rejected_indices.empty()) {
    std::cout << " none";
  }
  std::cout << " (threshold " << report.threshold_value << ", "
            << report.wall_time_seconds << " s)\n";
  return 0;
}

dffoct::DynConfig dyn_config_from(const std::string& method, std::size_t tau,
                                  std::size_t stride) {
  dffoct::DynConfig c;
  if (method == "std") {
    c.method = dffoct::DynMethod::kStd;
  } else if (method == "cumsum") {
    c.method = dffoct::DynMethod::kCumsum;
  } else {
    throw dffoct::ArgumentError("--method must be 'std' or 'cumsum', got '" +
                                method + "'");
  }
  c.window = tau;
  c.stride = stride;
  return c;
}

int cmd_dyn(const std::string& in, const std::string& out,
            const std::string& method, std::size_t tau, std::size_t stride,
            const std::string& preview) {
  const dffoct::Stack stack = dffoct::io::read_stack(in);
  const dffoct::DynConfig config = dyn_config_from(method, tau, stride);
  const dffoct::DynamicImage image = dffoct::dynamic_image(stack, config);
  dffoct::io::write_image(image, out, dffoct::io::ImageFormat::kDstk2d);
  if (!preview.empty()) {
    dffoct::io::write_image(image, preview,
                            dffoct::io::ImageFormat::kPgm16);
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_snr(const std::string& image_a, const std::string& image_b,
            const std::string& mask_path, const std::string& out_csv,
            const std::string& out_json) {
  const dffoct::DynamicImage a = dffoct::io::read_image(image_a);
  const dffoct::DynamicImage b = dffoct::io::read_image(image_b);
  const dffoct::io::MaskImage mask = dffoct::io::read_mask(mask_path);
  const dffoct::SnrReport ra = dffoct::snr_per_cell(a, mask);
  const dffoct::SnrReport rb = dffoct::snr_per_cell(b, mask);
  const dffoct::SnrGain gain = dffoct::snr_gain(ra, rb);
  if (!out_csv.empty()) {
    dffoct::write_snr_csv(out_csv, ra, rb, gain);
  }
  if (!out_json.empty()) {
    dffoct::io::write_json(gain.to_json(ra, rb), out_json);
  }
  std::cout << "cells: " << gain.cell_ids.size() << ", mean gain "
            << gain.mean_gain << "\n";
  return 0;
}

// One pipeline execution; shared by `pipeline` and `rerun` so a manifest
// re-executes through exactly the same code path.
int run_pipeline(const std::string& in, const std::string& out_dir,
                 const dffoct::FilterConfig& filter_config,
                 const dffoct::DynConfig& dyn_config,
                 const std::string& mask_path, bool previews) {
  fs::create_directories(out_dir);
  const auto out = [&](const char* name) {
    return (fs::path(out_dir) / name).string();
  };
  json manifest;
  manifest["tool_version"] = dffoct::kVersion;
  manifest["command"] = "pipeline";
  manifest["input"] = fs::absolute(in).string();
  manifest["filter"] = filter_config_to_json(filter_config);
  json dj;
  dj["window"] = dyn_config.window;
  dj["stride"] = dyn_config.stride;
  manifest["dyn"] = dj;
  manifest["mask"] = mask_path.empty()
                         ? json()
                         : json(fs::absolute(mask_path).string());
  manifest["previews"] = previews;
  json stages = json::array();
  const auto stage = [&](const char* name, auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    json s;
    s["name"] = name;
    s["wall_time_seconds"] = seconds;
    stages.push_back(std::move(s));
    std::cout << name << ": " << seconds << " s\n";
  };

  const dffoct::Stack stack = dffoct::io::read_stack(in);
  dffoct::Stack filtered;
  dffoct::FilterReport report;
  dffoct::DynamicImage artifact;
  stage("filter", [&] {
    filtered = dffoct::filter_stack(stack, filter_config, &report, &artifact);
    dffoct::io::write_stack(filtered, out("filtered.dstk"));
    dffoct::io::write_json(report.to_json(), out("filter_report.json"));
    dffoct::io::write_image(artifact, out("artifact.dstk"),
                            dffoct::io::ImageFormat::kDstk2d);
    if (previews) {
      dffoct::io::write_image(artifact, out("artifact.pgm"),
                              dffoct::io::ImageFormat::kPgm16);
    }
  });

  dffoct::DynConfig std_config = dyn_config;
  std_config.method = dffoct::DynMethod::kStd;
  dffoct::DynConfig cum_config = dyn_config;
  cum_config.method = dffoct::DynMethod::kCumsum;
  dffoct::DynamicImage dyn_std_img;
  dffoct::DynamicImage dyn_cum_img;
  stage("dyn-std", [&] {
    dyn_std_img = dffoct::dyn_std(filtered, std_config);
    dffoct::io::write_image(dyn_std_img, out("dyn_std.dstk"),
                            dffoct::io::ImageFormat::kDstk2d);
    if (previews) {
      dffoct::io::write_image(dyn_std_img, out("dyn_std.pgm"),
                              dffoct::io::ImageFormat::kPgm16);
    }
  });
  stage("dyn-cumsum", [&] {
    dyn_cum_img = dffoct::dyn_cumsum(filtered, cum_config);
    dffoct::io::write_image(dyn_cum_img, out("dyn_cumsum.dstk"),
                            dffoct::io::ImageFormat::kDstk2d);
    if (previews) {
      dffoct::io::write_image(dyn_cum_img, out("dyn_cumsum.pgm"),
                              dffoct::io::ImageFormat::kPgm16);
    }
  });

  if (!mask_path.empty()) {
    stage("snr", [&] {
      const dffoct::io::MaskImage mask = dffoct::io::read_mask(mask_path);
      const dffoct::DynamicImage raw_std = dffoct::dyn_std(stack, std_config);
      const dffoct::DynamicImage raw_cum =
          dffoct::dyn_cumsum(stack, cum_config);
      dffoct::io::write_image(raw_std, out("dyn_std_raw.dstk"),
                              dffoct::io::ImageFormat::kDstk2d);
      dffoct::io::write_image(raw_cum, out("dyn_cumsum_raw.dstk"),
                              dffoct::io::ImageFormat::kDstk2d);
      const dffoct::SnrReport before_std = dffoct::snr_per_cell(raw_std, mask);
      const dffoct::SnrReport after_std =
          dffoct::snr_per_cell(dyn_std_img, mask);
      const dffoct::SnrGain gain_std = dffoct::snr_gain(before_std, after_std);
      dffoct::write_snr_csv(out("snr_std.csv"), before_std, after_std,
                            gain_std);
      dffoct::io::write_json(gain_std.to_json(before_std, after_std),
                             out("snr_std.json"));
      const dffoct::SnrReport before_cum = dffoct::snr_per_cell(raw_cum, mask);
      const dffoct::SnrReport after_cum =
          dffoct::snr_per_cell(dyn_cum_img, mask);
      const dffoct::SnrGain gain_cum = dffoct::snr_gain(before_cum, after_cum);
      dffoct::write_snr_csv(out("snr_cumsum.csv"), before_cum, after_cum,
                            gain_cum);
      dffoct::io::write_json(gain_cum.to_json(before_cum, after_cum),
                             out("snr_cumsum.json"));
    });
  }

  manifest["stages"] = std::move(stages);
  dffoct::io::write_json(manifest, out("manifest.json"));
  return 0;
}

int cmd_rerun(const std::string& manifest_path, const std::string& out_dir) {
  const json m = dffoct::io::read_json(manifest_path);
  if (m.value("command", "") != std::string("pipeline")) {
    throw dffoct::ConfigError("manifest is not a pipeline run manifest");
  }
  const auto need = [&](const char* key) -> const json& {
    if (!m.contains(key)) {
      throw dffoct::ConfigError(std::string("manifest: missing '") + key +
                                "'");
    }
    return m.at(key);
  };
  const std::string in = need("input").get<std::string>();
  const dffoct::FilterConfig fc = filter_config_from_json(need("filter"));
  dffoct::DynConfig dc;
  dc.window = need("dyn").value("window", dc.window);
  dc.stride = need("dyn").value("stride", dc.stride);
  const json& mask = need("mask");
  return run_pipeline(in, out_dir, fc, dc,
                      mask.is_null() ? "" : mask.get<std::string>(),
                      m.value("previews", false));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion-artifact filtering and dynamic-contrast imaging for "
               "full-field OCT time stacks"};
  app.set_version_flag("--version", dffoct::kVersion);
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand(
      "simulate", "Render a synthetic stack from a scene file or template");
  std::string sim_scene;
  std::string sim_template;
  std::string sim_size = "128x128x512";
  std::uint64_t sim_seed = 1;
  bool sim_bulk = false;
  std::string sim_out;
  std::string sim_out_truth;
  std::string sim_out_mask;
  std::string sim_out_scene;
  auto* scene_opt =
      sim->add_option("--scene", sim_scene, "Scene JSON document");
  sim->add_option("--template", sim_template,
                  "Built-in scene: fibers, cells, drifting-tissue")
      ->excludes(scene_opt);
  sim->add_option("--size", sim_size, "Stack dims WxHxT for --template")
      ->capture_default_str();
  sim->add_option("--seed", sim_seed, "RNG seed")->capture_default_str();
  sim->add_flag("--bulk-motion", sim_bulk,
                "Add the template's bulk-motion model");
  sim->add_option("--out", sim_out, "Output stack (.dstk)")->required();
  sim->add_option("--out-truth", sim_out_truth, "Ground-truth JSON");
  sim->add_option("--out-mask", sim_out_mask, "Cell label mask (PGM)");
  sim->add_option("--out-scene", sim_out_scene,
                  "Dump the resolved scene JSON");
  sim->callback([&] {
    if (sim_scene.empty() && sim_template.empty()) {
      throw dffoct::ArgumentError("simulate needs --scene or --template");
    }
    cmd_simulate(sim_scene, sim_template, sim_size, sim_seed, sim_bulk,
                 sim_out, sim_out_truth, sim_out_mask, sim_out_scene);
  });

  // filter
  auto* flt = app.add_subcommand(
      "filter", "Remove bulk-motion components from a stack");
  std::string flt_in;
  std::string flt_out;
  std::string flt_report;
  std::string flt_artifact;
  FilterFlags flt_flags;
  flt->add_option("--in", flt_in, "Input stack (.dstk)")->required();
  flt->add_option("--out", flt_out, "Filtered stack (.dstk)")->required();
  flt->add_option("--report", flt_report, "Evidence report JSON");
  flt->add_option("--out-artifact", flt_artifact,
                  "Rejected-component weight image (.dstk)");
  flt_flags.add_to(flt);
  flt->callback([&] {
    cmd_filter(flt_in, flt_out, flt_report, flt_artifact, flt_flags);
  });

  // dyn
  auto* dyn = app.add_subcommand(
      "dyn", "Compute a dynamic-contrast image from a stack");
  std::string dyn_in;
  std::string dyn_out;
  std::string dyn_method = "std";
  std::size_t dyn_tau = 50;
  std::size_t dyn_stride = 0;
  std::string dyn_preview;
  dyn->add_option("--in", dyn_in, "Input stack (.dstk)")->required();
  dyn->add_option("--out", dyn_out, "Output image (.dstk, 1 frame)")
      ->required();
  dyn->add_option("--method", dyn_method, "std or cumsum")
      ->capture_default_str();
  dyn->add_option("--tau", dyn_tau, "Window length in frames")
      ->capture_default_str();
  dyn->add_option("--stride", dyn_stride,
                  "Window spacing; 0 = non-overlapping");
  dyn->add_option("--preview", dyn_preview, "Also write a 16-bit PGM");
  dyn->callback([&] {
    cmd_dyn(dyn_in, dyn_out, dyn_method, dyn_tau, dyn_stride, dyn_preview);
  });

  // snr
  auto* snr = app.add_subcommand(
      "snr", "Per-cell contrast gain between two dynamic images");
  std::string snr_a;
  std::string snr_b;
  std::string snr_mask;
  std::string snr_csv;
  std::string snr_json;
  snr->add_option("--image-a", snr_a, "Reference image (.dstk)")->required();
  snr->add_option("--image-b", snr_b, "Comparison image (.dstk)")->required();
  snr->add_option("--mask", snr_mask, "Cell label mask (PGM or .dstk)")
      ->required();
  snr->add_option("--out-csv", snr_csv, "Per-cell CSV");
  snr->add_option("--out-json", snr_json, "Per-cell JSON");
  snr->callback([&] { cmd_snr(snr_a, snr_b, snr_mask, snr_csv, snr_json); });

  // pipeline
  auto* pipe = app.add_subcommand(
      "pipeline",
      "filter + dyn (std and cumsum) + optional snr, with a run manifest");
  std::string pipe_in;
  std::string pipe_out_dir;
  std::string pipe_mask;
  std::size_t pipe_tau = 50;
  std::size_t pipe_stride = 0;
  bool pipe_previews = false;
  FilterFlags pipe_flags;
  pipe->add_option("--in", pipe_in, "Input stack (.dstk)")->required();
  pipe->add_option("--out-dir", pipe_out_dir, "Output directory")->required();
  pipe->add_option("--mask", pipe_mask,
                   "Cell mask; enables the snr stage against the unfiltered "
                   "stack");
  pipe->add_option("--tau", pipe_tau, "Window length in frames")
      ->capture_default_str();
  pipe->add_option("--stride", pipe_stride,
                   "Window spacing; 0 = non-overlapping");
  pipe->add_flag("--previews", pipe_previews, "Also write 16-bit PGMs");
  pipe_flags.add_to(pipe);
  pipe->callback([&] {
    dffoct::DynConfig dc;
    dc.window = pipe_tau;
    dc.stride = pipe_stride;
    run_pipeline(pipe_in, pipe_out_dir, pipe_flags.to_config(), dc, pipe_mask,
                 pipe_previews);
  });

  // rerun
  auto* rerun = app.add_subcommand(
      "rerun", "Re-execute a pipeline run from its manifest");
  std::string rerun_manifest;
  std::string rerun_out_dir;
  rerun->add_option("--manifest", rerun_manifest, "manifest.json of a run")
      ->required();
  rerun->add_option("--out-dir", rerun_out_dir, "Output directory")
      ->required();
  rerun->callback([&] { cmd_rerun(rerun_manifest, rerun_out_dir); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const dffoct::BudgetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const dffoct::ComputeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const dffoct::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
