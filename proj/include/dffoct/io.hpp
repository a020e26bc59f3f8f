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

#ifndef DFFOCT_IO_HPP_
#define DFFOCT_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dffoct/stack.hpp"

namespace dffoct {
namespace io {

// .dstk container: one JSON header line terminated by '\n', then the raw
// little-endian payload in stack layout order (x fastest, then y, then t).
// Header fields: magic "DSTK", version 1, width, height, frames, dtype
// ("u16" or "f32"), optional frame_rate_hz and wavelength_nm.
struct StackFileHeader {
  std::string magic = "DSTK";
  int version = 1;
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t frames = 0;
  std::string dtype = "f32";
  std::optional<double> frame_rate_hz;
  std::optional<double> wavelength_nm;

  std::string serialize() const;  // one line, no trailing newline
  static StackFileHeader parse(const std::string& line);
};

// Integer label map: 0 = background, n > 0 = cell id n.
struct MaskImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint32_t> labels;

  std::uint32_t at(std::size_t x, std::size_t y) const {
    return labels[y * width + x];
  }
  // Distinct nonzero labels, ascending.
  std::vector<std::uint32_t> cell_ids() const;
};

enum class ImageFormat { kDstk2d, kPgm16 };

// Writes a stack as .dstk (always dtype f32). Round-trips bit-exactly.
void write_stack(const Stack& stack, const std::filesystem::path& path);

// Reads a .dstk stack. u16 payloads are widened to f32 without scaling.
// Throws ParseError with a distinct code for bad magic, malformed header,
// unknown dtype, dimension overflow, truncated or trailing payload, and
// non-finite f32 samples; IoError when the file cannot be opened.
Stack read_stack(const std::filesystem::path& path);

// Same parser over a seekable stream; context names the source in errors.
Stack read_stack(std::istream& in, const std::string& context);

// dstk-2d is the same container with frames = 1; pgm16 is a binary 16-bit
// PGM (P5, maxval 65535, big-endian samples) min-max scaled to 0..65535,
// with a constant image mapping to all zeros. Quantitative consumers should
// use dstk-2d; pgm16 is a preview format.
void write_image(const DynamicImage& image, const std::filesystem::path& path,
                 ImageFormat format);

// Reads a dstk-2d image (frames must be exactly 1, values finite and
// non-negative).
DynamicImage read_image(const std::filesystem::path& path);

// Reads a label mask from a 16-bit PGM (raw sample values become labels) or
// a dstk-2d of integer values. Non-integer dstk-2d values are a parse error.
MaskImage read_mask(const std::filesystem::path& path);

// Writes a mask as PGM with raw label values (no scaling); labels must fit
// 16 bits. Lets simulated ground truth feed the same ingestion path as
// externally produced masks.
void write_mask(const MaskImage& mask, const std::filesystem::path& path);

// Small JSON file helpers shared by reports and manifests.
void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace io
}  // namespace dffoct

#endif  // DFFOCT_IO_HPP_
