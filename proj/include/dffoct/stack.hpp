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

#ifndef DFFOCT_STACK_HPP_
#define DFFOCT_STACK_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "dffoct/errors.hpp"

namespace dffoct {

// A 3D acquisition cube indexed (x, y, t). Samples are stored x-fastest,
// then y, then t, so sample (x, y, t) sits at data[t*width*height + y*width
// + x]. That layout makes each frame a contiguous 2D image and, read as a
// column-major (n_pixels x frames) matrix, it IS the unfolded matrix: no
// arithmetic or copying is inherent to unfolding.
struct Stack {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t frames = 0;
  std::optional<double> frame_rate_hz;
  std::optional<double> wavelength_nm;
  std::vector<float> data;

  std::size_t n_pixels() const { return width * height; }

  float at(std::size_t x, std::size_t y, std::size_t t) const {
    return data[t * width * height + y * width + x];
  }
  float& at(std::size_t x, std::size_t y, std::size_t t) {
    return data[t * width * height + y * width + x];
  }

  // Throws if any structural invariant is broken: width/height >= 1,
  // frames >= 2, data length = width*height*frames, all samples finite.
  void validate() const;
};

// 2D (pixel, time) view of a stack. Row p is the time series of pixel
// p = y*width + x. Values are column-major, entry (p, t) at
// values[t*n_pixels + p], matching the stack layout byte for byte.
struct UnfoldedMatrix {
  std::size_t n_pixels = 0;
  std::size_t frames = 0;
  std::size_t source_width = 0;
  std::size_t source_height = 0;
  std::optional<double> frame_rate_hz;
  std::optional<double> wavelength_nm;
  std::vector<float> values;

  Eigen::Map<const Eigen::MatrixXf> map() const {
    return Eigen::Map<const Eigen::MatrixXf>(
        values.data(), static_cast<Eigen::Index>(n_pixels),
        static_cast<Eigen::Index>(frames));
  }

  void validate() const;
};

// Per-pixel fluctuation-strength map. Values are non-negative and finite.
struct DynamicImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> values;

  float at(std::size_t x, std::size_t y) const {
    return values[y * width + x];
  }

  void validate() const;
};

// Economy SVD of an unfolded matrix: k = min(n_pixels, frames) components,
// singular values non-increasing, U/V columns orthonormal. kept_mask marks
// which components survive filtering; singular values themselves are never
// erased so reports can show the full spectrum.
struct SvdFactors {
  Eigen::VectorXd singular_values;    // length k, non-increasing
  Eigen::MatrixXd spatial_vectors;    // n_pixels x k, column i = U_i
  Eigen::MatrixXd temporal_vectors;   // frames x k, column i = V_i
  std::vector<std::uint8_t> kept_mask;  // length k, 1 = kept
  std::size_t source_width = 0;
  std::size_t source_height = 0;
  std::optional<double> frame_rate_hz;
  std::optional<double> wavelength_nm;

  std::size_t k() const {
    return static_cast<std::size_t>(singular_values.size());
  }

  // Checks ordering, non-negativity and column orthonormality (relative
  // tolerance 1e-4). Quadratic in k over the temporal side and sampled on
  // the spatial side; meant for tests and debugging, not hot paths.
  void validate() const;
};

// Reshapes a stack into its (pixel, time) matrix. Pure value copy; row p of
// the result is the time series of pixel p = y*width + x.
UnfoldedMatrix unfold(const Stack& stack);

// Exact inverse of unfold. Throws DimensionError when n_pixels does not
// equal source_width * source_height.
Stack fold(const UnfoldedMatrix& matrix);

}  // namespace dffoct

#endif  // DFFOCT_STACK_HPP_
