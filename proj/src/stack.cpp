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

#include "dffoct/stack.hpp"

#include <cmath>
#include <string>

namespace dffoct {

namespace {

void check_finite(const std::vector<float>& v, const char* what) {
  for (float x : v) {
    if (!std::isfinite(x)) {
      throw Error(std::string(what) + " contains a non-finite sample");
    }
  }
}

}  // namespace

void Stack::validate() const {
  if (width < 1 || height < 1) {
    throw DimensionError("stack width and height must be >= 1");
  }
  if (frames < 2) {
    throw DimensionError("stack must have at least 2 frames");
  }
  if (data.size() != width * height * frames) {
    throw DimensionError("stack data length " + std::to_string(data.size()) +
                         " does not match dims " + std::to_string(width) +
                         "x" + std::to_string(height) + "x" +
                         std::to_string(frames));
  }
  check_finite(data, "stack");
}

void UnfoldedMatrix::validate() const {
  if (n_pixels != source_width * source_height) {
    throw DimensionError("unfolded matrix n_pixels " +
                         std::to_string(n_pixels) +
                         " does not match source dims " +
                         std::to_string(source_width) + "x" +
                         std::to_string(source_height));
  }
  if (values.size() != n_pixels * frames) {
    throw DimensionError("unfolded matrix value count mismatch");
  }
  check_finite(values, "unfolded matrix");
}

void DynamicImage::validate() const {
  if (width < 1 || height < 1) {
    throw DimensionError("image width and height must be >= 1");
  }
  if (values.size() != width * height) {
    throw DimensionError("image value count does not match dims");
  }
  for (float x : values) {
    if (!std::isfinite(x) || x < 0.0f) {
      throw Error("dynamic image values must be finite and non-negative");
    }
  }
}

void SvdFactors::validate() const {
  const auto n = singular_values.size();
  if (spatial_vectors.cols() != n || temporal_vectors.cols() != n ||
      kept_mask.size() != static_cast<std::size_t>(n)) {
    throw DimensionError("SVD factor shapes disagree");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (singular_values[i] < 0.0) {
      throw Error("singular values must be non-negative");
    }
    if (i > 0 && singular_values[i] > singular_values[i - 1]) {
      throw Error("singular values must be non-increasing");
    }
  }
  // Orthonormality within relative tolerance 1e-4. The temporal side is
  // small (k x k); the spatial side is checked the same way since k caps
  // the Gram size at frames x frames in practice.
  const double tol = 1e-4;
  Eigen::MatrixXd gt =
      temporal_vectors.transpose() * temporal_vectors -
      Eigen::MatrixXd::Identity(n, n);
  if (gt.cwiseAbs().maxCoeff() > tol) {
    throw Error("temporal eigenvectors are not orthonormal");
  }
  Eigen::MatrixXd gs =
      spatial_vectors.transpose() * spatial_vectors -
      Eigen::MatrixXd::Identity(n, n);
  if (gs.cwiseAbs().maxCoeff() > tol) {
    throw Error("spatial eigenvectors are not orthonormal");
  }
}

UnfoldedMatrix unfold(const Stack& stack) {
  stack.validate();
  UnfoldedMatrix m;
  m.n_pixels = stack.n_pixels();
  m.frames = stack.frames;
  m.source_width = stack.width;
  m.source_height = stack.height;
  m.frame_rate_hz = stack.frame_rate_hz;
  m.wavelength_nm = stack.wavelength_nm;
  // Same byte order in both shapes; see the layout note in stack.hpp.
  m.values = stack.data;
  return m;
}

Stack fold(const UnfoldedMatrix& matrix) {
  if (matrix.n_pixels != matrix.source_width * matrix.source_height) {
    throw DimensionError("cannot fold: n_pixels " +
                         std::to_string(matrix.n_pixels) +
                         " != source dims " +
                         std::to_string(matrix.source_width) + "x" +
                         std::to_string(matrix.source_height));
  }
  if (matrix.values.size() != matrix.n_pixels * matrix.frames) {
    throw DimensionError("cannot fold: value count mismatch");
  }
  Stack s;
  s.width = matrix.source_width;
  s.height = matrix.source_height;
  s.frames = matrix.frames;
  s.frame_rate_hz = matrix.frame_rate_hz;
  s.wavelength_nm = matrix.wavelength_nm;
  s.data = matrix.values;
  return s;
}

}  // namespace dffoct
