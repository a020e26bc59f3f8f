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

#include "dffoct/svd_filter.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <exception>
#include <mutex>
#include <thread>

#include <Eigen/Dense>
#include <lapacke.h>
#include <nlohmann/json.hpp>

#ifdef DFFOCT_HAVE_OPENBLAS
extern "C" void openblas_set_num_threads(int num_threads);
#endif

namespace dffoct {

namespace {

// BLAS threading is pinned so runs are bit-identical regardless of the
// machine; parallelism comes from independent tiles instead.
void pin_blas_threads() {
#ifdef DFFOCT_HAVE_OPENBLAS
  static std::once_flag flag;
  std::call_once(flag, [] { openblas_set_num_threads(1); });
#endif
}

double mib(std::size_t bytes) {
  return static_cast<double>(bytes) / (1024.0 * 1024.0);
}

// Peak f64 working set of one divide-and-conquer SVD: input copy, factors,
// and the documented LAPACK workspace for jobz='S'.
std::size_t decompose_workspace_bytes(std::size_t m, std::size_t n) {
  const std::size_t k = std::min(m, n);
  const std::size_t mx = std::max(m, n);
  const std::size_t lwork = 3 * k + std::max(mx, 4 * k * k + 4 * k);
  return 8 * (m * n + m * k + k * n + k + lwork) + 8 * (8 * k);
}

std::size_t zcr_impl(const double* p, std::size_t n) {
  std::size_t first = 0;
  while (first < n && p[first] == 0.0) {
    ++first;
  }
  if (first == n) {
    return 0;
  }
  int prev = p[first] > 0.0 ? 1 : -1;
  std::size_t count = 0;
  for (std::size_t i = first + 1; i < n; ++i) {
    int s = p[i] > 0.0 ? 1 : (p[i] < 0.0 ? -1 : prev);
    if (s * prev < 0) {
      ++count;
    }
    prev = s;
  }
  return count;
}

struct TileRect {
  std::size_t x0;
  std::size_t y0;
  std::size_t width;
  std::size_t height;
};

std::vector<TileRect> make_tiles(std::size_t width, std::size_t height,
                                 std::size_t tile_w, std::size_t tile_h) {
  const std::size_t tw = tile_w == 0 ? width : std::min(tile_w, width);
  const std::size_t th = tile_h == 0 ? height : std::min(tile_h, height);
  const std::size_t nx = std::max<std::size_t>(1, width / tw);
  const std::size_t ny = std::max<std::size_t>(1, height / th);
  std::vector<TileRect> tiles;
  tiles.reserve(nx * ny);
  // The last row/column absorbs the remainder so every tile is full size
  // or larger.
  for (std::size_t ty = 0; ty < ny; ++ty) {
    const std::size_t y0 = ty * th;
    const std::size_t y1 = (ty + 1 == ny) ? height : y0 + th;
    for (std::size_t tx = 0; tx < nx; ++tx) {
      const std::size_t x0 = tx * tw;
      const std::size_t x1 = (tx + 1 == nx) ? width : x0 + tw;
      tiles.push_back({x0, y0, x1 - x0, y1 - y0});
    }
  }
  return tiles;
}

}  // namespace

void FilterConfig::validate() const {
  if (!(threshold_multiplier > 0.0)) {
    throw ConfigError("threshold_multiplier must be positive");
  }
  if ((tile_width != 0 && tile_width < 2) ||
      (tile_height != 0 && tile_height < 2)) {
    throw ConfigError("tile dims must be at least 2x2 pixels");
  }
  if (max_candidate_index == 0) {
    throw ConfigError("max_candidate_index must be at least 1");
  }
}

SvdFactors decompose(const UnfoldedMatrix& matrix,
                     std::size_t memory_budget_bytes) {
  matrix.validate();
  const std::size_t m = matrix.n_pixels;
  const std::size_t n = matrix.frames;
  const std::size_t k = std::min(m, n);
  if (memory_budget_bytes > 0) {
    const std::size_t needed = decompose_workspace_bytes(m, n);
    if (needed > memory_budget_bytes) {
      throw BudgetError(
          "decomposition of a " + std::to_string(m) + "x" + std::to_string(n) +
          " matrix needs about " + std::to_string(mib(needed)) +
          " MiB but the budget is " + std::to_string(mib(memory_budget_bytes)) +
          " MiB; process in tiles (--tile WxH) or raise the budget");
    }
  }
  pin_blas_threads();

  Eigen::MatrixXd a = matrix.map().cast<double>();
  SvdFactors f;
  f.singular_values.resize(static_cast<Eigen::Index>(k));
  f.spatial_vectors.resize(static_cast<Eigen::Index>(m),
                           static_cast<Eigen::Index>(k));
  Eigen::MatrixXd vt(static_cast<Eigen::Index>(k),
                     static_cast<Eigen::Index>(n));
  const lapack_int info = LAPACKE_dgesdd(
      LAPACK_COL_MAJOR, 'S', static_cast<lapack_int>(m),
      static_cast<lapack_int>(n), a.data(), static_cast<lapack_int>(m),
      f.singular_values.data(), f.spatial_vectors.data(),
      static_cast<lapack_int>(m), vt.data(), static_cast<lapack_int>(k));
  if (info != 0) {
    throw ComputeError("svd backend failed for a " + std::to_string(m) + "x" +
                       std::to_string(n) + " matrix (info=" +
                       std::to_string(info) + ")");
  }
  f.temporal_vectors = vt.transpose();
  f.kept_mask.assign(k, 1);
  f.source_width = matrix.source_width;
  f.source_height = matrix.source_height;
  f.frame_rate_hz = matrix.frame_rate_hz;
  f.wavelength_nm = matrix.wavelength_nm;
  return f;
}

std::size_t zero_crossing_rate(const std::vector<double>& series) {
  return zcr_impl(series.data(), series.size());
}

std::set<std::size_t> detect_artifact_vectors(const SvdFactors& factors,
                                              const FilterConfig& config,
                                              ZcrSeries* evidence) {
  config.validate();
  const std::size_t k = factors.k();
  if (k < 3) {
    throw InsufficientDataError(
        "zcr outlier detection needs at least 3 temporal components, got " +
        std::to_string(k));
  }
  const std::size_t n_frames =
      static_cast<std::size_t>(factors.temporal_vectors.rows());
  std::vector<std::size_t> zcr(k);
  for (std::size_t i = 0; i < k; ++i) {
    zcr[i] = zcr_impl(
        factors.temporal_vectors.col(static_cast<Eigen::Index>(i)).data(),
        n_frames);
  }
  std::vector<std::size_t> dzcr(k - 1);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    dzcr[i] = zcr[i + 1] > zcr[i] ? zcr[i + 1] - zcr[i] : zcr[i] - zcr[i + 1];
    const double d = static_cast<double>(dzcr[i]);
    sum += d;
    sum_sq += d * d;
  }
  const double count = static_cast<double>(k - 1);
  const double mean = sum / count;
  const double var = std::max(0.0, sum_sq / count - mean * mean);
  const double threshold = config.threshold_multiplier * std::sqrt(var);
  if (evidence != nullptr) {
    evidence->zcr = zcr;
    evidence->dzcr = dzcr;
    evidence->threshold_value = threshold;
  }
  std::set<std::size_t> rejected;
  if (var == 0.0) {
    // Perfectly uniform jumps carry no outlier information.
    return rejected;
  }
  for (std::size_t i = 0; i + 1 < k; ++i) {
    if (static_cast<double>(dzcr[i]) > threshold) {
      const std::size_t member = zcr[i + 1] >= zcr[i] ? i + 1 : i;
      if (member < config.max_candidate_index) {
        rejected.insert(member);
      }
    }
  }
  return rejected;
}

void apply_filter(SvdFactors& factors, const std::set<std::size_t>& rejected) {
  const std::size_t k = factors.k();
  for (std::size_t idx : rejected) {
    if (idx >= k) {
      throw ArgumentError("component index " + std::to_string(idx) +
                          " out of range, decomposition has " +
                          std::to_string(k) + " components");
    }
  }
  for (std::size_t idx : rejected) {
    factors.kept_mask[idx] = 0;
  }
}

Stack reconstruct(const SvdFactors& factors) {
  const std::size_t k = factors.k();
  const std::size_t m = factors.source_width * factors.source_height;
  const std::size_t n = static_cast<std::size_t>(factors.temporal_vectors.rows());
  std::size_t r = 0;
  for (std::size_t i = 0; i < k; ++i) {
    r += factors.kept_mask[i] ? 1 : 0;
  }
  Eigen::MatrixXd x;
  if (r == 0) {
    x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m),
                              static_cast<Eigen::Index>(n));
  } else {
    Eigen::MatrixXd us(static_cast<Eigen::Index>(m),
                       static_cast<Eigen::Index>(r));
    Eigen::MatrixXd v(static_cast<Eigen::Index>(n),
                      static_cast<Eigen::Index>(r));
    Eigen::Index col = 0;
    for (std::size_t i = 0; i < k; ++i) {
      if (!factors.kept_mask[i]) {
        continue;
      }
      us.col(col) = factors.spatial_vectors.col(static_cast<Eigen::Index>(i)) *
                    factors.singular_values(static_cast<Eigen::Index>(i));
      v.col(col) = factors.temporal_vectors.col(static_cast<Eigen::Index>(i));
      ++col;
    }
    x.noalias() = us * v.transpose();
  }
  UnfoldedMatrix out;
  out.n_pixels = m;
  out.frames = n;
  out.source_width = factors.source_width;
  out.source_height = factors.source_height;
  out.frame_rate_hz = factors.frame_rate_hz;
  out.wavelength_nm = factors.wavelength_nm;
  out.values.resize(m * n);
  Eigen::Map<Eigen::MatrixXf>(out.values.data(), static_cast<Eigen::Index>(m),
                              static_cast<Eigen::Index>(n)) = x.cast<float>();
  return fold(out);
}

namespace {

struct TileResult {
  TileEvidence evidence;
  Stack filtered;
  std::vector<float> artifact;  // tile-local, row-major
};

TileResult run_tile(const Stack& stack, const TileRect& rect,
                    const FilterConfig& config, bool want_artifact) {
  const std::size_t n_px = rect.width * rect.height;
  UnfoldedMatrix tile;
  tile.n_pixels = n_px;
  tile.frames = stack.frames;
  tile.source_width = rect.width;
  tile.source_height = rect.height;
  tile.frame_rate_hz = stack.frame_rate_hz;
  tile.wavelength_nm = stack.wavelength_nm;
  tile.values.resize(n_px * stack.frames);
  for (std::size_t t = 0; t < stack.frames; ++t) {
    const float* src =
        stack.data.data() + (t * stack.height + rect.y0) * stack.width;
    float* dst = tile.values.data() + t * n_px;
    for (std::size_t y = 0; y < rect.height; ++y) {
      std::memcpy(dst + y * rect.width, src + y * stack.width + rect.x0,
                  rect.width * sizeof(float));
    }
  }

  SvdFactors factors = decompose(tile);
  TileResult result;
  result.evidence.x0 = rect.x0;
  result.evidence.y0 = rect.y0;
  result.evidence.width = rect.width;
  result.evidence.height = rect.height;
  result.evidence.singular_values.assign(
      factors.singular_values.data(),
      factors.singular_values.data() + factors.k());

  std::set<std::size_t> rejected;
  if (config.detector == Detector::kManual) {
    rejected.insert(config.manual_indices.begin(),
                    config.manual_indices.end());
    ZcrSeries evidence;
    // ZCR evidence is still reported so manual runs can be audited.
    detect_artifact_vectors(factors, config, &evidence);
    result.evidence.zcr = std::move(evidence.zcr);
    result.evidence.dzcr = std::move(evidence.dzcr);
    result.evidence.threshold_value = evidence.threshold_value;
  } else {
    ZcrSeries evidence;
    rejected = detect_artifact_vectors(factors, config, &evidence);
    result.evidence.zcr = std::move(evidence.zcr);
    result.evidence.dzcr = std::move(evidence.dzcr);
    result.evidence.threshold_value = evidence.threshold_value;
  }
  result.evidence.rejected_indices.assign(rejected.begin(), rejected.end());

  apply_filter(factors, rejected);
  result.filtered = reconstruct(factors);
  if (want_artifact) {
    result.artifact.assign(n_px, 0.0f);
    for (std::size_t idx : rejected) {
      const auto col =
          factors.spatial_vectors.col(static_cast<Eigen::Index>(idx));
      for (std::size_t p = 0; p < n_px; ++p) {
        result.artifact[p] +=
            static_cast<float>(std::abs(col(static_cast<Eigen::Index>(p))));
      }
    }
  }
  return result;
}

}  // namespace

Stack filter_stack(const Stack& stack, const FilterConfig& config,
                   FilterReport* report, DynamicImage* artifact) {
  const auto start = std::chrono::steady_clock::now();
  stack.validate();
  config.validate();
  const std::vector<TileRect> tiles =
      make_tiles(stack.width, stack.height, config.tile_width,
                 config.tile_height);

  std::size_t n_workers = config.n_workers;
  if (n_workers == 0) {
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    n_workers = std::min(tiles.size(), hw);
  }
  n_workers = std::min(n_workers, tiles.size());

  if (config.memory_budget_bytes > 0) {
    std::size_t worst = 0;
    for (const TileRect& rect : tiles) {
      worst = std::max(worst, decompose_workspace_bytes(
                                  rect.width * rect.height, stack.frames));
    }
    const std::size_t needed = worst * n_workers;
    if (needed > config.memory_budget_bytes) {
      throw BudgetError(
          "filtering needs about " + std::to_string(mib(needed)) +
          " MiB (" + std::to_string(n_workers) + " worker(s), largest tile " +
          std::to_string(mib(worst)) + " MiB) but the budget is " +
          std::to_string(mib(config.memory_budget_bytes)) +
          " MiB; process in smaller tiles (--tile WxH) or raise the budget");
    }
  }

  std::vector<TileResult> results(tiles.size());
  std::vector<std::exception_ptr> errors(tiles.size());
  const bool want_artifact = artifact != nullptr;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tiles.size()) {
        return;
      }
      try {
        results[i] = run_tile(stack, tiles[i], config, want_artifact);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) {
      pool.emplace_back(worker);
    }
    for (std::thread& t : pool) {
      t.join();
    }
  }
  for (const std::exception_ptr& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }

  Stack out;
  out.width = stack.width;
  out.height = stack.height;
  out.frames = stack.frames;
  out.frame_rate_hz = stack.frame_rate_hz;
  out.wavelength_nm = stack.wavelength_nm;
  out.data.resize(stack.data.size());
  if (want_artifact) {
    artifact->width = stack.width;
    artifact->height = stack.height;
    artifact->values.assign(stack.width * stack.height, 0.0f);
  }
  std::set<std::size_t> all_rejected;
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const TileRect& rect = tiles[i];
    const TileResult& r = results[i];
    for (std::size_t t = 0; t < stack.frames; ++t) {
      const float* src = r.filtered.data.data() + t * rect.width * rect.height;
      float* dst = out.data.data() + (t * stack.height + rect.y0) * stack.width;
      for (std::size_t y = 0; y < rect.height; ++y) {
        std::memcpy(dst + y * stack.width + rect.x0, src + y * rect.width,
                    rect.width * sizeof(float));
      }
    }
    if (want_artifact) {
      for (std::size_t y = 0; y < rect.height; ++y) {
        for (std::size_t x = 0; x < rect.width; ++x) {
          artifact->values[(rect.y0 + y) * stack.width + rect.x0 + x] =
              r.artifact[y * rect.width + x];
        }
      }
    }
    all_rejected.insert(r.evidence.rejected_indices.begin(),
                        r.evidence.rejected_indices.end());
  }

  if (report != nullptr) {
    report->rejected_indices.assign(all_rejected.begin(), all_rejected.end());
    report->zcr = results[0].evidence.zcr;
    report->dzcr = results[0].evidence.dzcr;
    report->threshold_value = results[0].evidence.threshold_value;
    report->singular_values = results[0].evidence.singular_values;
    report->tiles.clear();
    for (TileResult& r : results) {
      report->tiles.push_back(std::move(r.evidence));
    }
    report->wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
  }
  return out;
}

nlohmann::json FilterReport::to_json() const {
  nlohmann::json j;
  j["rejected_indices"] = rejected_indices;
  j["zcr"] = zcr;
  j["dzcr"] = dzcr;
  j["threshold_value"] = threshold_value;
  j["singular_values"] = singular_values;
  j["wall_time_seconds"] = wall_time_seconds;
  nlohmann::json tj = nlohmann::json::array();
  for (const TileEvidence& t : tiles) {
    nlohmann::json e;
    e["x0"] = t.x0;
    e["y0"] = t.y0;
    e["width"] = t.width;
    e["height"] = t.height;
    e["rejected_indices"] = t.rejected_indices;
    e["zcr"] = t.zcr;
    e["dzcr"] = t.dzcr;
    e["threshold_value"] = t.threshold_value;
    e["singular_values"] = t.singular_values;
    tj.push_back(std::move(e));
  }
  j["tiles"] = std::move(tj);
  return j;
}

FilterReport FilterReport::from_json(const nlohmann::json& j) {
  const auto need = [&](const nlohmann::json& obj,
                        const char* key) -> const nlohmann::json& {
    if (!obj.contains(key)) {
      throw ConfigError(std::string("filter report: missing '") + key + "'");
    }
    return obj.at(key);
  };
  FilterReport r;
  need(j, "rejected_indices").get_to(r.rejected_indices);
  need(j, "zcr").get_to(r.zcr);
  need(j, "dzcr").get_to(r.dzcr);
  need(j, "threshold_value").get_to(r.threshold_value);
  need(j, "singular_values").get_to(r.singular_values);
  need(j, "wall_time_seconds").get_to(r.wall_time_seconds);
  for (const auto& e : need(j, "tiles")) {
    TileEvidence t;
    need(e, "x0").get_to(t.x0);
    need(e, "y0").get_to(t.y0);
    need(e, "width").get_to(t.width);
    need(e, "height").get_to(t.height);
    need(e, "rejected_indices").get_to(t.rejected_indices);
    need(e, "zcr").get_to(t.zcr);
    need(e, "dzcr").get_to(t.dzcr);
    need(e, "threshold_value").get_to(t.threshold_value);
    need(e, "singular_values").get_to(t.singular_values);
    r.tiles.push_back(std::move(t));
  }
  return r;
}

}  // namespace dffoct
