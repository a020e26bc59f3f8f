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

#ifndef DFFOCT_SVD_FILTER_HPP_
#define DFFOCT_SVD_FILTER_HPP_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dffoct/errors.hpp"
#include "dffoct/stack.hpp"

namespace dffoct {

// Artifact-vector selection rule. kZcrOutlier is the automatic detector;
// kManual rejects exactly FilterConfig::manual_indices.
enum class Detector {
  kZcrOutlier,
  kManual,
};

struct FilterConfig {
  Detector detector = Detector::kZcrOutlier;
  // Outlier gate: a zero-crossing-count jump between adjacent components is
  // suspicious when it exceeds threshold_multiplier * std of all jumps.
  double threshold_multiplier = 3.0;
  // Only components with index < max_candidate_index are eligible for
  // rejection (bulk artifacts concentrate in the top of the spectrum).
  // The jump statistics always use the full series.
  std::size_t max_candidate_index = std::numeric_limits<std::size_t>::max();
  // Rejected outright when detector == kManual.
  std::vector<std::size_t> manual_indices;
  // Tile dims in pixels; 0 means the whole image in that direction.
  std::size_t tile_width = 0;
  std::size_t tile_height = 0;
  // Peak-memory cap for the decomposition workspace; 0 means no cap.
  std::size_t memory_budget_bytes = 0;
  // Worker threads for independent tiles; 0 means one per tile, capped at
  // hardware concurrency.
  std::size_t n_workers = 0;

  void validate() const;
};

// Zero-crossing evidence for one decomposition.
struct ZcrSeries {
  std::vector<std::size_t> zcr;     // per temporal component
  std::vector<std::size_t> dzcr;    // |zcr[i+1] - zcr[i]|, size k-1
  double threshold_value = 0.0;     // multiplier * std(dzcr)
};

// Evidence for one tile of a filter run.
struct TileEvidence {
  std::size_t x0 = 0;
  std::size_t y0 = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::size_t> rejected_indices;
  std::vector<std::size_t> zcr;
  std::vector<std::size_t> dzcr;
  double threshold_value = 0.0;
  std::vector<double> singular_values;
};

// Filter run summary. For a single-tile run the top-level fields mirror that
// tile; for a tiled run rejected_indices is the sorted union over tiles and
// the per-component series come from the first tile (see tiles for the rest).
struct FilterReport {
  std::vector<std::size_t> rejected_indices;
  std::vector<std::size_t> zcr;
  std::vector<std::size_t> dzcr;
  double threshold_value = 0.0;
  std::vector<double> singular_values;
  double wall_time_seconds = 0.0;
  std::vector<TileEvidence> tiles;

  nlohmann::json to_json() const;
  static FilterReport from_json(const nlohmann::json& j);
};

// Economy SVD of the unfolded stack, X = U diag(s) V^T with k =
// min(n_pixels, frames) columns. Singular values are non-increasing.
// Throws ComputeError if the backend fails to converge and BudgetError if
// the workspace would exceed memory_budget_bytes.
SvdFactors decompose(const UnfoldedMatrix& matrix,
                     std::size_t memory_budget_bytes = 0);

// Sign changes along a temporal component. Zeros inherit the sign of the
// previous sample; leading zeros inherit the first nonzero sign. An
// all-zero series has zero crossings.
std::size_t zero_crossing_rate(const std::vector<double>& series);

// ZCR outlier detection over the temporal components of factors. Requires
// k >= 3 (two jumps make the smallest population with a spread). Flags the
// larger-ZCR member of every adjacent pair whose jump exceeds the gate; if
// the pair is tied the later component is flagged. When every jump is equal
// (std == 0) nothing is flagged.
std::set<std::size_t> detect_artifact_vectors(const SvdFactors& factors,
                                              const FilterConfig& config,
                                              ZcrSeries* evidence = nullptr);

// Marks the given component indices as dropped in factors.kept_mask.
// Out-of-range indices throw ArgumentError.
void apply_filter(SvdFactors& factors, const std::set<std::size_t>& rejected);

// X' = sum over kept components of s_i * u_i * v_i^T, refolded to a stack.
Stack reconstruct(const SvdFactors& factors);

// Decompose, detect, drop, reconstruct; tiles are processed independently
// when tile dims are set. artifact, when non-null, receives the summed
// absolute spatial weight of the rejected components, refolded per tile.
Stack filter_stack(const Stack& stack, const FilterConfig& config,
                   FilterReport* report = nullptr,
                   DynamicImage* artifact = nullptr);

}  // namespace dffoct

#endif  // DFFOCT_SVD_FILTER_HPP_
