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

#include "dffoct/metrics.hpp"

#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

namespace dffoct {

SnrReport snr_per_cell(const DynamicImage& image, const io::MaskImage& mask) {
  image.validate();
  if (image.width != mask.width || image.height != mask.height) {
    throw DimensionError("mask " + std::to_string(mask.width) + "x" +
                         std::to_string(mask.height) +
                         " does not match image " +
                         std::to_string(image.width) + "x" +
                         std::to_string(image.height));
  }
  double bg_sum = 0.0;
  std::size_t bg_count = 0;
  std::map<std::uint32_t, std::pair<double, std::size_t>> cells;
  for (std::size_t p = 0; p < image.values.size(); ++p) {
    const std::uint32_t label = mask.labels[p];
    if (label == 0) {
      bg_sum += image.values[p];
      ++bg_count;
    } else {
      auto& [sum, count] = cells[label];
      sum += image.values[p];
      ++count;
    }
  }
  if (bg_count == 0) {
    throw ArgumentError("mask has no background pixels (label 0)");
  }
  if (cells.empty()) {
    throw ArgumentError("mask has no cell labels");
  }
  SnrReport report;
  report.background_mean = bg_sum / static_cast<double>(bg_count);
  if (report.background_mean == 0.0) {
    throw ArgumentError("background mean is zero, snr is undefined");
  }
  for (const auto& [id, acc] : cells) {
    report.cell_ids.push_back(id);
    report.cell_mean.push_back(acc.first / static_cast<double>(acc.second));
    report.snr.push_back(report.cell_mean.back() / report.background_mean);
  }
  return report;
}

SnrGain snr_gain(const SnrReport& before, const SnrReport& after) {
  if (before.cell_ids != after.cell_ids) {
    throw ArgumentError("snr reports cover different cell sets (" +
                        std::to_string(before.cell_ids.size()) + " vs " +
                        std::to_string(after.cell_ids.size()) + " cells)");
  }
  SnrGain g;
  g.cell_ids = before.cell_ids;
  double sum = 0.0;
  for (std::size_t i = 0; i < before.snr.size(); ++i) {
    if (before.snr[i] == 0.0) {
      throw ArgumentError("cell " + std::to_string(before.cell_ids[i]) +
                          " has zero snr in the reference report");
    }
    g.gain.push_back(after.snr[i] / before.snr[i]);
    sum += g.gain.back();
  }
  g.mean_gain = sum / static_cast<double>(g.gain.size());
  return g;
}

ClassEnergy artifact_energy(const DynamicImage& image,
                            const std::vector<PixelKind>& labels) {
  image.validate();
  if (labels.size() != image.values.size()) {
    throw DimensionError("label map size " + std::to_string(labels.size()) +
                         " does not match image size " +
                         std::to_string(image.values.size()));
  }
  double sums[3] = {0.0, 0.0, 0.0};
  std::size_t counts[3] = {0, 0, 0};
  for (std::size_t p = 0; p < labels.size(); ++p) {
    const auto c = static_cast<std::size_t>(labels[p]);
    sums[c] += image.values[p];
    ++counts[c];
  }
  ClassEnergy e;
  if (counts[0] > 0) {
    e.background = sums[0] / static_cast<double>(counts[0]);
  }
  if (counts[1] > 0) {
    e.static_reflector = sums[1] / static_cast<double>(counts[1]);
  }
  if (counts[2] > 0) {
    e.motile = sums[2] / static_cast<double>(counts[2]);
  }
  return e;
}

nlohmann::json SnrReport::to_json() const {
  nlohmann::json j;
  j["background_mean"] = background_mean;
  j["cell_ids"] = cell_ids;
  j["cell_mean"] = cell_mean;
  j["snr"] = snr;
  return j;
}

nlohmann::json SnrGain::to_json(const SnrReport& before,
                                const SnrReport& after) const {
  nlohmann::json j;
  j["cell_ids"] = cell_ids;
  j["snr_a"] = before.snr;
  j["snr_b"] = after.snr;
  j["gain"] = gain;
  j["mean_gain"] = mean_gain;
  return j;
}

void write_snr_csv(const std::string& path, const SnrReport& before,
                   const SnrReport& after, const SnrGain& gain) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  out << "cell_id,snr_a,snr_b,gain\n";
  out.precision(17);
  for (std::size_t i = 0; i < gain.cell_ids.size(); ++i) {
    out << gain.cell_ids[i] << ',' << before.snr[i] << ',' << after.snr[i]
        << ',' << gain.gain[i] << '\n';
  }
  if (!out) {
    throw IoError("failed writing '" + path + "'");
  }
}

}  // namespace dffoct
