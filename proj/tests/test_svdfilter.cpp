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

#include <cmath>
#include <cstdint>
#include <numbers>
#include <set>
#include <vector>

#include "doctest.h"
#include <nlohmann/json.hpp>

#include "dffoct/dynamic.hpp"
#include "dffoct/errors.hpp"
#include "dffoct/rng.hpp"
#include "dffoct/simulate.hpp"
#include "dffoct/svd_filter.hpp"

using dffoct::FilterConfig;
using dffoct::SvdFactors;
using dffoct::UnfoldedMatrix;

namespace {

constexpr double kPi = std::numbers::pi;

UnfoldedMatrix matrix_from(const std::vector<std::vector<double>>& rows) {
  UnfoldedMatrix m;
  m.n_pixels = rows.size();
  m.frames = rows[0].size();
  m.source_width = m.n_pixels;
  m.source_height = 1;
  m.values.resize(m.n_pixels * m.frames);
  for (std::size_t p = 0; p < m.n_pixels; ++p) {
    for (std::size_t t = 0; t < m.frames; ++t) {
      m.values[t * m.n_pixels + p] = static_cast<float>(rows[p][t]);
    }
  }
  return m;
}

UnfoldedMatrix random_matrix(std::size_t n_px, std::size_t frames,
                             std::uint64_t seed) {
  UnfoldedMatrix m;
  m.n_pixels = n_px;
  m.frames = frames;
  m.source_width = n_px;
  m.source_height = 1;
  m.values.resize(n_px * frames);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    m.values[i] = static_cast<float>(
        dffoct::rng::gaussian(seed, dffoct::rng::Stream::kScene, 1, i));
  }
  return m;
}

// Synthetic factors whose temporal components are sampled cosines with
// chosen crossing counts. cos(pi*f*(2t+1)/(2n)) crosses zero exactly f
// times for f < n, and distinct frequencies are orthogonal (DCT-II basis).
SvdFactors cosine_factors(const std::vector<std::size_t>& crossings,
                          std::size_t n_frames) {
  const std::size_t k = crossings.size();
  SvdFactors f;
  f.singular_values.resize(static_cast<Eigen::Index>(k));
  f.spatial_vectors =
      Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k),
                                static_cast<Eigen::Index>(k));
  f.temporal_vectors.resize(static_cast<Eigen::Index>(n_frames),
                            static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    f.singular_values(static_cast<Eigen::Index>(i)) =
        static_cast<double>(k - i);
    for (std::size_t t = 0; t < n_frames; ++t) {
      f.temporal_vectors(static_cast<Eigen::Index>(t),
                         static_cast<Eigen::Index>(i)) =
          std::cos(kPi * static_cast<double>(crossings[i]) *
                   (2.0 * static_cast<double>(t) + 1.0) /
                   (2.0 * static_cast<double>(n_frames)));
    }
    f.temporal_vectors.col(static_cast<Eigen::Index>(i)).normalize();
  }
  f.kept_mask.assign(k, 1);
  f.source_width = k;
  f.source_height = 1;
  return f;
}

double rel_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / b.norm();
}

// Population std of the jump series, the quantity the outlier gate scales.
double jump_std(const std::vector<std::size_t>& zcr) {
  std::vector<double> d;
  for (std::size_t i = 0; i + 1 < zcr.size(); ++i) {
    d.push_back(std::abs(static_cast<double>(zcr[i + 1]) -
                         static_cast<double>(zcr[i])));
  }
  double mean = 0.0;
  for (double v : d) {
    mean += v;
  }
  mean /= static_cast<double>(d.size());
  double var = 0.0;
  for (double v : d) {
    var += (v - mean) * (v - mean);
  }
  return std::sqrt(var / static_cast<double>(d.size()));
}

}  // namespace

TEST_CASE("decompose: rank-1 matrix gives one singular value = |a||b|") {
  // M[p][t] = a[p] * b[t] with |a| = sqrt(30), |b| = 3.
  const std::vector<double> a = {1.0, 2.0, 3.0, 4.0};
  const std::vector<double> b = {2.0, 1.0, 2.0};
  std::vector<std::vector<double>> rows(4, std::vector<double>(3));
  for (std::size_t p = 0; p < 4; ++p) {
    for (std::size_t t = 0; t < 3; ++t) {
      rows[p][t] = a[p] * b[t];
    }
  }
  SvdFactors f = dffoct::decompose(matrix_from(rows));
  REQUIRE(f.k() == 3);
  CHECK(f.singular_values(0) ==
        doctest::Approx(std::sqrt(30.0) * 3.0).epsilon(1e-12));
  CHECK(f.singular_values(1) < 1e-9);
  CHECK(f.singular_values(2) < 1e-9);
  // Top spatial vector is a / |a| up to a joint sign.
  const double sign = f.spatial_vectors(0, 0) > 0 ? 1.0 : -1.0;
  for (std::size_t p = 0; p < 4; ++p) {
    CHECK(sign * f.spatial_vectors(static_cast<Eigen::Index>(p), 0) ==
          doctest::Approx(a[p] / std::sqrt(30.0)).epsilon(1e-9));
  }
}

TEST_CASE("decompose: diagonal matrix returns its entries as the spectrum") {
  std::vector<std::vector<double>> rows(4, std::vector<double>(3, 0.0));
  rows[0][0] = 3.0;
  rows[1][1] = 2.0;
  rows[2][2] = 1.0;
  SvdFactors f = dffoct::decompose(matrix_from(rows));
  REQUIRE(f.k() == 3);
  CHECK(f.singular_values(0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.singular_values(1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.singular_values(2) == doctest::Approx(1.0).epsilon(1e-12));
  f.validate();
}

TEST_CASE("decompose + reconstruct: orthonormal factors, round-trip 1e-6") {
  UnfoldedMatrix m = random_matrix(64, 32, 4);
  SvdFactors f = dffoct::decompose(m);
  f.validate();  // ordering and orthonormality
  dffoct::Stack back = dffoct::reconstruct(f);
  const Eigen::MatrixXd orig = m.map().cast<double>();
  const Eigen::MatrixXd rec =
      Eigen::Map<const Eigen::MatrixXf>(back.data.data(), 64, 32)
          .cast<double>();
  CHECK(rel_frobenius(rec, orig) < 1e-6);
}

TEST_CASE("decompose honors a memory budget and names the remedy") {
  UnfoldedMatrix m = random_matrix(64, 32, 4);
  CHECK_NOTHROW(dffoct::decompose(m, 64ull << 20));
  try {
    dffoct::decompose(m, 1000);
    FAIL("expected BudgetError");
  } catch (const dffoct::BudgetError& e) {
    CHECK(std::string(e.what()).find("tile") != std::string::npos);
  }
}

TEST_CASE("zero crossing rate: counting rules") {
  using dffoct::zero_crossing_rate;
  CHECK(zero_crossing_rate({1.0, -1.0, 1.0, -1.0}) == 3);
  CHECK(zero_crossing_rate({1.0, 1.0, 1.0}) == 0);
  CHECK(zero_crossing_rate({-2.0, 5.0}) == 1);
  // A zero inherits the previous sign: no extra crossing through it.
  CHECK(zero_crossing_rate({0.3, -0.2, 0.0, -0.1, 0.4}) == 2);
  CHECK(zero_crossing_rate({1.0, 0.0, 1.0}) == 0);
  CHECK(zero_crossing_rate({1.0, 0.0, -1.0}) == 1);
  // Leading zeros inherit the first nonzero sign.
  CHECK(zero_crossing_rate({0.0, 0.0, 1.0, -1.0}) == 1);
  CHECK(zero_crossing_rate({0.0, 0.0, -3.0, -1.0}) == 0);
  CHECK(zero_crossing_rate({0.0, 0.0, 0.0}) == 0);
  CHECK(zero_crossing_rate({}) == 0);
  CHECK(zero_crossing_rate({5.0}) == 0);
}

TEST_CASE("sampled cosines cross exactly their frequency index") {
  SvdFactors f = cosine_factors({0, 1, 5, 34, 120}, 512);
  for (std::size_t i = 0; i < 5; ++i) {
    std::vector<double> col(512);
    for (std::size_t t = 0; t < 512; ++t) {
      col[t] = f.temporal_vectors(static_cast<Eigen::Index>(t),
                                  static_cast<Eigen::Index>(i));
    }
    const std::size_t expected[5] = {0, 1, 5, 34, 120};
    CHECK(dffoct::zero_crossing_rate(col) == expected[i]);
  }
}

TEST_CASE("detection: a uniform jump ladder has zero spread, nothing "
          "flagged") {
  SvdFactors f = cosine_factors({2, 4, 6, 8, 10, 12}, 256);
  dffoct::ZcrSeries ev;
  const std::set<std::size_t> rejected =
      dffoct::detect_artifact_vectors(f, FilterConfig{}, &ev);
  CHECK(rejected.empty());
  CHECK(ev.threshold_value == 0.0);
  CHECK(ev.zcr == std::vector<std::size_t>{2, 4, 6, 8, 10, 12});
  CHECK(ev.dzcr == std::vector<std::size_t>{2, 2, 2, 2, 2});
}

TEST_CASE("detection: one outlying jump flags the larger-ZCR member") {
  // Smooth ladder 1..15, then a 120-crossing component: the only jump above
  // 3 * std(jumps) is the last one, and its larger member is index 15.
  std::vector<std::size_t> ladder;
  for (std::size_t i = 1; i <= 15; ++i) {
    ladder.push_back(i);
  }
  ladder.push_back(120);
  SvdFactors f = cosine_factors(ladder, 512);

  dffoct::ZcrSeries ev;
  FilterConfig config;
  std::set<std::size_t> rejected =
      dffoct::detect_artifact_vectors(f, config, &ev);
  CHECK(rejected == std::set<std::size_t>{15});
  CHECK(ev.zcr == ladder);
  // Threshold equals multiplier * population std of the jumps.
  CHECK(ev.threshold_value ==
        doctest::Approx(3.0 * jump_std(ladder)).epsilon(1e-9));

  // The jump statistics see the full series, but eligibility is capped.
  config.max_candidate_index = 8;
  CHECK(dffoct::detect_artifact_vectors(f, config).empty());

  // A stricter multiplier raises the gate above the jump.
  config = FilterConfig{};
  config.threshold_multiplier = 5.0;
  CHECK(dffoct::detect_artifact_vectors(f, config).empty());

  // A sloppier multiplier cannot flag below-threshold unit jumps.
  config.threshold_multiplier = 0.2;
  rejected = dffoct::detect_artifact_vectors(f, config);
  CHECK(rejected == std::set<std::size_t>{15});
}

TEST_CASE("detection: an interior spike is flagged from both sides, and "
          "only the spike") {
  // Smooth ladder 1..99 with a 300-crossing component spliced in at index
  // 50. Its rising jump names index 50 (larger member), and its falling
  // jump names index 50 again (the earlier member, since zcr drops), so
  // the smooth neighbors stay untouched.
  std::vector<std::size_t> ladder;
  for (std::size_t i = 1; i <= 50; ++i) {
    ladder.push_back(i);
  }
  ladder.push_back(300);
  for (std::size_t i = 51; i <= 99; ++i) {
    ladder.push_back(i);
  }
  SvdFactors f = cosine_factors(ladder, 1024);
  const std::set<std::size_t> rejected =
      dffoct::detect_artifact_vectors(f, FilterConfig{});
  CHECK(rejected == std::set<std::size_t>{50});
}

TEST_CASE("detection: fewer than three components is undecidable") {
  SvdFactors f = cosine_factors({1, 5}, 64);
  CHECK_THROWS_AS(dffoct::detect_artifact_vectors(f, FilterConfig{}),
                  dffoct::InsufficientDataError);
}

TEST_CASE("filter config validation") {
  FilterConfig c;
  CHECK_NOTHROW(c.validate());
  c.threshold_multiplier = 0.0;
  CHECK_THROWS_AS(c.validate(), dffoct::ConfigError);
  c = FilterConfig{};
  c.tile_width = 1;
  CHECK_THROWS_AS(c.validate(), dffoct::ConfigError);
  c = FilterConfig{};
  c.tile_height = 1;
  CHECK_THROWS_AS(c.validate(), dffoct::ConfigError);
  c = FilterConfig{};
  c.max_candidate_index = 0;
  CHECK_THROWS_AS(c.validate(), dffoct::ConfigError);
}

TEST_CASE("apply_filter: marks kept_mask, rejects out-of-range indices") {
  SvdFactors f = cosine_factors({1, 2, 3, 4}, 64);
  dffoct::apply_filter(f, {1, 3});
  CHECK(f.kept_mask == std::vector<std::uint8_t>{1, 0, 1, 0});
  CHECK_THROWS_AS(dffoct::apply_filter(f, {4}), dffoct::ArgumentError);
}

TEST_CASE("removing components removes exactly their energy (Parseval)") {
  UnfoldedMatrix m = random_matrix(48, 32, 9);
  SvdFactors f = dffoct::decompose(m);
  const std::set<std::size_t> drop = {0, 3, 5};
  dffoct::apply_filter(f, drop);
  dffoct::Stack filtered = dffoct::reconstruct(f);

  double removed = 0.0;
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    const double d = static_cast<double>(m.values[i]) -
                     static_cast<double>(filtered.data[i]);
    removed += d * d;
  }
  double expected = 0.0;
  for (std::size_t i : drop) {
    const double s = f.singular_values(static_cast<Eigen::Index>(i));
    expected += s * s;
  }
  CHECK(removed == doctest::Approx(expected).epsilon(1e-6));

  // Dropping everything reconstructs zeros.
  SvdFactors g = dffoct::decompose(m);
  std::set<std::size_t> all;
  for (std::size_t i = 0; i < g.k(); ++i) {
    all.insert(i);
  }
  dffoct::apply_filter(g, all);
  dffoct::Stack zeros = dffoct::reconstruct(g);
  for (float v : zeros.data) {
    CHECK(v == 0.0f);
  }
}

TEST_CASE("filter_stack on a shaken static+motile scene removes the "
          "artifact subspace") {
  // Static strips under 100 nm / 5 Hz sinusoidal shaking at 150 Hz. The
  // artifact is exactly rank 2 (cos/sin quadratures of the global phase),
  // sitting right below the mean-intensity component, so the detector must
  // flag {1, 2}.
  dffoct::SceneBundle b =
      dffoct::scene_template("fibers", 48, 48, 512, 7, true);
  auto [stack, truth] = dffoct::simulate_stack(b.config, b.scene);

  FilterConfig config;
  config.max_candidate_index = 8;
  dffoct::FilterReport report;
  dffoct::DynamicImage artifact;
  dffoct::Stack filtered =
      dffoct::filter_stack(stack, config, &report, &artifact);

  CHECK(report.rejected_indices == std::vector<std::size_t>{1, 2});
  CHECK(report.zcr.size() == 512);
  CHECK(report.dzcr.size() == 511);
  CHECK(report.singular_values.size() == 512);
  CHECK(report.tiles.size() == 1);
  CHECK(report.wall_time_seconds > 0.0);

  // Fluctuation energy on static pixels collapses by >= 10x; motile pixels
  // keep theirs within 10%.
  dffoct::DynConfig dyn;
  dyn.window = 50;
  dffoct::DynamicImage before = dffoct::dyn_std(stack, dyn);
  dffoct::DynamicImage after = dffoct::dyn_std(filtered, dyn);
  double static_before = 0.0, static_after = 0.0, n_static = 0.0;
  double motile_before = 0.0, motile_after = 0.0, n_motile = 0.0;
  for (std::size_t p = 0; p < truth.label_map.size(); ++p) {
    if (truth.label_map[p] == dffoct::PixelKind::kStaticReflector) {
      static_before += before.values[p];
      static_after += after.values[p];
      n_static += 1.0;
    } else if (truth.label_map[p] == dffoct::PixelKind::kMotile) {
      motile_before += before.values[p];
      motile_after += after.values[p];
      n_motile += 1.0;
    }
  }
  REQUIRE(n_static > 0);
  REQUIRE(n_motile > 0);
  CHECK(static_before / static_after > 10.0);
  CHECK(motile_after / motile_before ==
        doctest::Approx(1.0).epsilon(0.10));

  // The artifact map concentrates on the pixels the rejected components
  // load, which are the bright static ones.
  double art_static = 0.0, art_motile = 0.0;
  for (std::size_t p = 0; p < truth.label_map.size(); ++p) {
    if (truth.label_map[p] == dffoct::PixelKind::kStaticReflector) {
      art_static += artifact.values[p];
    } else if (truth.label_map[p] == dffoct::PixelKind::kMotile) {
      art_motile += artifact.values[p];
    }
  }
  CHECK(art_static / n_static > 3.0 * (art_motile / n_motile));
}

TEST_CASE("filter_stack: manual detector rejects exactly what it is told "
          "and still reports evidence") {
  dffoct::SceneBundle b =
      dffoct::scene_template("cells", 16, 16, 64, 3, false);
  auto [stack, truth] = dffoct::simulate_stack(b.config, b.scene);

  FilterConfig config;
  config.detector = dffoct::Detector::kManual;
  config.manual_indices = {0, 2};
  dffoct::FilterReport report;
  dffoct::filter_stack(stack, config, &report);
  CHECK(report.rejected_indices == std::vector<std::size_t>{0, 2});
  CHECK(report.zcr.size() == 64);  // audit trail still present
  CHECK(report.threshold_value > 0.0);

  config.manual_indices = {64};
  CHECK_THROWS_AS(dffoct::filter_stack(stack, config),
                  dffoct::ArgumentError);
}

TEST_CASE("filter_stack: power-of-two scaling does not change decisions") {
  dffoct::SceneBundle b =
      dffoct::scene_template("cells", 12, 10, 48, 5, false);
  auto [stack, truth] = dffoct::simulate_stack(b.config, b.scene);
  dffoct::Stack scaled = stack;
  for (float& v : scaled.data) {
    v *= 1024.0f;
  }
  FilterConfig config;
  dffoct::FilterReport r1, r2;
  dffoct::Stack f1 = dffoct::filter_stack(stack, config, &r1);
  dffoct::Stack f2 = dffoct::filter_stack(scaled, config, &r2);
  CHECK(r1.rejected_indices == r2.rejected_indices);
  CHECK(r1.zcr == r2.zcr);
  double worst = 0.0;
  for (std::size_t i = 0; i < f1.data.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(f2.data[i]) / 1024.0 -
                                     static_cast<double>(f1.data[i])));
  }
  CHECK(worst < 1e-2);  // absolute, on intensities of order 1600
}

TEST_CASE("tiling: explicit tiles partition the image, remainder absorbed") {
  dffoct::SceneBundle b =
      dffoct::scene_template("cells", 16, 16, 64, 3, false);
  auto [stack, truth] = dffoct::simulate_stack(b.config, b.scene);

  FilterConfig config;
  config.tile_width = 7;
  config.tile_height = 5;
  dffoct::FilterReport report;
  dffoct::filter_stack(stack, config, &report);
  // 16/7 -> 2 columns (7, 9); 16/5 -> 3 rows (5, 5, 6).
  REQUIRE(report.tiles.size() == 6);
  std::vector<std::uint8_t> covered(16 * 16, 0);
  for (const dffoct::TileEvidence& t : report.tiles) {
    CHECK(t.width >= 7);
    CHECK(t.height >= 5);
    for (std::size_t y = t.y0; y < t.y0 + t.height; ++y) {
      for (std::size_t x = t.x0; x < t.x0 + t.width; ++x) {
        REQUIRE(x < 16);
        REQUIRE(y < 16);
        CHECK(covered[y * 16 + x] == 0);
        covered[y * 16 + x] = 1;
      }
    }
    // Economy SVD of a tile has min(pixels, frames) components.
    CHECK(t.zcr.size() == std::min<std::size_t>(t.width * t.height, 64));
  }
  for (std::uint8_t c : covered) {
    CHECK(c == 1);
  }
}

TEST_CASE("tiling: serial and threaded runs are bit-identical") {
  dffoct::SceneBundle b =
      dffoct::scene_template("cells", 16, 16, 64, 3, false);
  auto [stack, truth] = dffoct::simulate_stack(b.config, b.scene);

  FilterConfig serial;
  serial.tile_width = 7;
  serial.tile_height = 5;
  serial.n_workers = 1;
  FilterConfig threaded = serial;
  threaded.n_workers = 2;

  dffoct::FilterReport r1, r2;
  dffoct::DynamicImage a1, a2;
  dffoct::Stack f1 = dffoct::filter_stack(stack, serial, &r1, &a1);
  dffoct::Stack f2 = dffoct::filter_stack(stack, threaded, &r2, &a2);
  CHECK(f1.data == f2.data);
  CHECK(a1.values == a2.values);
  CHECK(r1.rejected_indices == r2.rejected_indices);
  REQUIRE(r1.tiles.size() == r2.tiles.size());
  for (std::size_t i = 0; i < r1.tiles.size(); ++i) {
    CHECK(r1.tiles[i].x0 == r2.tiles[i].x0);
    CHECK(r1.tiles[i].rejected_indices == r2.tiles[i].rejected_indices);
    CHECK(r1.tiles[i].zcr == r2.tiles[i].zcr);
  }
}

TEST_CASE("filter_stack: the memory budget counts workers times worst "
          "tile") {
  dffoct::SceneBundle b =
      dffoct::scene_template("cells", 16, 16, 64, 3, false);
  auto [stack, truth] = dffoct::simulate_stack(b.config, b.scene);
  FilterConfig config;
  config.memory_budget_bytes = 1000;
  try {
    dffoct::filter_stack(stack, config);
    FAIL("expected BudgetError");
  } catch (const dffoct::BudgetError& e) {
    CHECK(std::string(e.what()).find("tile") != std::string::npos);
  }
  // A generous budget passes.
  config.memory_budget_bytes = 256ull << 20;
  CHECK_NOTHROW(dffoct::filter_stack(stack, config));
}

TEST_CASE("filter report json round-trips and rejects missing keys") {
  dffoct::SceneBundle b =
      dffoct::scene_template("cells", 16, 16, 64, 3, false);
  auto [stack, truth] = dffoct::simulate_stack(b.config, b.scene);
  FilterConfig config;
  config.tile_width = 8;
  config.tile_height = 8;
  dffoct::FilterReport report;
  dffoct::filter_stack(stack, config, &report);

  const nlohmann::json j = report.to_json();
  const dffoct::FilterReport back = dffoct::FilterReport::from_json(j);
  CHECK(back.rejected_indices == report.rejected_indices);
  CHECK(back.zcr == report.zcr);
  CHECK(back.dzcr == report.dzcr);
  CHECK(back.threshold_value == report.threshold_value);
  CHECK(back.singular_values == report.singular_values);
  REQUIRE(back.tiles.size() == report.tiles.size());
  CHECK(back.tiles[1].x0 == report.tiles[1].x0);
  CHECK(back.tiles[1].zcr == report.tiles[1].zcr);

  nlohmann::json broken = j;
  broken.erase("zcr");
  CHECK_THROWS_AS(dffoct::FilterReport::from_json(broken),
                  dffoct::ConfigError);
}
