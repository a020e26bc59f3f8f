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

#ifndef DFFOCT_METRICS_HPP_
#define DFFOCT_METRICS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dffoct/io.hpp"
#include "dffoct/simulate.hpp"
#include "dffoct/stack.hpp"

namespace dffoct {

// Per-cell contrast of a dynamic image against the unlabeled background.
// snr[i] = cell_mean[i] / background_mean for cell_ids[i]; ids ascend.
struct SnrReport {
  double background_mean = 0.0;
  std::vector<std::uint32_t> cell_ids;
  std::vector<double> cell_mean;
  std::vector<double> snr;

  nlohmann::json to_json() const;
};

// Per-cell ratio between two reports over the same mask: gain[i] =
// after.snr[i] / before.snr[i]; mean_gain averages the per-cell ratios.
struct SnrGain {
  std::vector<std::uint32_t> cell_ids;
  std::vector<double> gain;
  double mean_gain = 0.0;

  nlohmann::json to_json(const SnrReport& before,
                         const SnrReport& after) const;
};

// Means of a dynamic image over the pixel classes of a simulated scene.
// A class absent from the labels yields an absent mean.
struct ClassEnergy {
  std::optional<double> background;
  std::optional<double> static_reflector;
  std::optional<double> motile;
};

// Cell mean / background mean per mask label. Label 0 is background; every
// other label is one cell. Throws DimensionError on size mismatch and
// ArgumentError when the mask lacks background or cells, or when the
// background mean is zero.
SnrReport snr_per_cell(const DynamicImage& image, const io::MaskImage& mask);

// Throws ArgumentError when the two reports cover different cell sets or
// `before` contains a zero snr.
SnrGain snr_gain(const SnrReport& before, const SnrReport& after);

ClassEnergy artifact_energy(const DynamicImage& image,
                            const std::vector<PixelKind>& labels);

// cell_id,snr_a,snr_b,gain rows; snr_a is `before`, snr_b is `after`.
void write_snr_csv(const std::string& path, const SnrReport& before,
                   const SnrReport& after, const SnrGain& gain);

}  // namespace dffoct

#endif  // DFFOCT_METRICS_HPP_
