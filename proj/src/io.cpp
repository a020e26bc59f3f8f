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

#include "dffoct/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace dffoct {
namespace io {

namespace {

static_assert(std::endian::native == std::endian::little,
              "payload codec assumes a little-endian host");

constexpr std::size_t kMaxHeaderLine = 1 << 16;

using ParseCode = ParseError::Code;

[[noreturn]] void fail(ParseCode code, const std::string& context,
                       const std::string& what) {
  throw ParseError(code, context + ": " + what);
}

std::ifstream open_input(const std::filesystem::path& path,
                         std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) {
    throw IoError("cannot open for reading: " + path.string());
  }
  return in;
}

std::ofstream open_output(const std::filesystem::path& path,
                          std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) {
    throw IoError("cannot open for writing: " + path.string());
  }
  return out;
}

// Multiplies with an overflow check so hostile headers cannot wrap
// allocation sizes.
std::size_t checked_mul(std::size_t a, std::size_t b,
                        const std::string& context) {
  if (b != 0 && a > std::numeric_limits<std::size_t>::max() / b) {
    fail(ParseCode::kDimsOverflow, context, "dimension product overflows");
  }
  return a * b;
}

std::optional<double> optional_number(const nlohmann::json& j,
                                      const char* key,
                                      const std::string& context) {
  if (!j.contains(key) || j.at(key).is_null()) {
    return std::nullopt;
  }
  const auto& v = j.at(key);
  if (!v.is_number()) {
    fail(ParseCode::kBadHeader, context,
         std::string(key) + " must be a number");
  }
  const double d = v.get<double>();
  if (!std::isfinite(d) || d <= 0.0) {
    fail(ParseCode::kBadHeader, context,
         std::string(key) + " must be positive and finite");
  }
  return d;
}

std::size_t dim_field(const nlohmann::json& j, const char* key,
                      const std::string& context) {
  if (!j.contains(key) || !j.at(key).is_number_unsigned()) {
    fail(ParseCode::kBadHeader, context,
         std::string(key) + " must be a non-negative integer");
  }
  const auto v = j.at(key).get<std::uint64_t>();
  if (v > std::numeric_limits<std::size_t>::max()) {
    fail(ParseCode::kDimsOverflow, context, std::string(key) + " too large");
  }
  return static_cast<std::size_t>(v);
}

StackFileHeader parse_header(const std::string& line,
                             const std::string& context) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    fail(ParseCode::kBadMagic, context, "header line is not a dstk header");
  }
  if (!j.is_object() || !j.contains("magic") || !j.at("magic").is_string() ||
      j.at("magic").get<std::string>() != "DSTK") {
    fail(ParseCode::kBadMagic, context, "bad magic");
  }
  StackFileHeader h;
  if (!j.contains("version") || !j.at("version").is_number_integer() ||
      j.at("version").get<int>() != 1) {
    fail(ParseCode::kBadHeader, context, "unsupported header version");
  }
  h.version = 1;
  h.width = dim_field(j, "width", context);
  h.height = dim_field(j, "height", context);
  h.frames = dim_field(j, "frames", context);
  if (!j.contains("dtype") || !j.at("dtype").is_string()) {
    fail(ParseCode::kBadHeader, context, "missing dtype");
  }
  h.dtype = j.at("dtype").get<std::string>();
  if (h.dtype != "u16" && h.dtype != "f32") {
    fail(ParseCode::kUnknownDtype, context, "unknown dtype '" + h.dtype + "'");
  }
  h.frame_rate_hz = optional_number(j, "frame_rate_hz", context);
  h.wavelength_nm = optional_number(j, "wavelength_nm", context);
  return h;
}

// Reads the header line and the exact payload extent, rejecting short or
// oversized files before any allocation is sized from header values.
std::vector<char> read_payload(std::istream& in, const StackFileHeader& h,
                               std::size_t n_samples,
                               const std::string& context) {
  const std::size_t sample_bytes = (h.dtype == "u16") ? 2 : 4;
  const std::size_t needed = checked_mul(n_samples, sample_bytes, context);

  const std::istream::pos_type payload_start = in.tellg();
  in.seekg(0, std::ios::end);
  const std::istream::pos_type end = in.tellg();
  if (payload_start < 0 || end < payload_start) {
    fail(ParseCode::kTruncated, context, "cannot determine payload size");
  }
  const auto available =
      static_cast<std::uint64_t>(end - payload_start);
  if (available < needed) {
    fail(ParseCode::kTruncated, context,
         "payload has " + std::to_string(available) + " bytes, needs " +
             std::to_string(needed));
  }
  if (available > needed) {
    fail(ParseCode::kTrailingData, context,
         "payload has " + std::to_string(available - needed) +
             " trailing bytes");
  }
  in.seekg(payload_start);
  std::vector<char> buf(needed);
  in.read(buf.data(), static_cast<std::streamsize>(needed));
  if (static_cast<std::uint64_t>(in.gcount()) != needed) {
    fail(ParseCode::kTruncated, context, "payload read came up short");
  }
  return buf;
}

std::string read_header_line(std::istream& in, const std::string& context) {
  std::string line;
  line.reserve(256);
  char c;
  while (in.get(c)) {
    if (c == '\n') {
      return line;
    }
    if (line.size() >= kMaxHeaderLine) {
      fail(ParseCode::kBadMagic, context, "header line too long");
    }
    line.push_back(c);
  }
  fail(ParseCode::kBadMagic, context, "missing header line");
}

void write_pgm16(const std::vector<std::uint16_t>& samples, std::size_t width,
                 std::size_t height, const std::filesystem::path& path) {
  auto out = open_output(path, std::ios::binary);
  out << "P5\n" << width << " " << height << "\n65535\n";
  std::vector<char> buf(samples.size() * 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    buf[2 * i] = static_cast<char>(samples[i] >> 8);      // big-endian
    buf[2 * i + 1] = static_cast<char>(samples[i] & 0xff);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

// Reads one whitespace-delimited PGM token, skipping '#' comments.
std::string pgm_token(std::istream& in, const std::string& context) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      while (in.get(c) && c != '\n') {
      }
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) {
        return tok;
      }
      continue;
    }
    tok.push_back(c);
    if (tok.size() > 32) {
      fail(ParseCode::kBadHeader, context, "oversized PGM token");
    }
  }
  if (tok.empty()) {
    fail(ParseCode::kBadHeader, context, "unexpected end of PGM header");
  }
  return tok;
}

std::size_t pgm_number(std::istream& in, const std::string& context) {
  const std::string tok = pgm_token(in, context);
  std::size_t value = 0;
  for (char c : tok) {
    if (c < '0' || c > '9') {
      fail(ParseCode::kBadHeader, context, "non-numeric PGM field");
    }
    value = value * 10 + static_cast<std::size_t>(c - '0');
    if (value > (std::size_t{1} << 32)) {
      fail(ParseCode::kDimsOverflow, context, "PGM field too large");
    }
  }
  return value;
}

MaskImage read_mask_pgm(std::istream& in, const std::string& context) {
  const std::string magic = pgm_token(in, context);
  if (magic != "P5") {
    fail(ParseCode::kBadMagic, context, "not a binary PGM");
  }
  MaskImage m;
  m.width = pgm_number(in, context);
  m.height = pgm_number(in, context);
  const std::size_t maxval = pgm_number(in, context);
  if (m.width < 1 || m.height < 1) {
    fail(ParseCode::kBadDims, context, "PGM dims must be >= 1");
  }
  if (maxval < 1 || maxval > 65535) {
    fail(ParseCode::kBadHeader, context, "PGM maxval out of range");
  }
  const std::size_t sample_bytes = maxval < 256 ? 1 : 2;
  const std::size_t n = checked_mul(m.width, m.height, context);
  const std::size_t needed = checked_mul(n, sample_bytes, context);
  std::vector<char> buf(needed);
  in.read(buf.data(), static_cast<std::streamsize>(needed));
  if (static_cast<std::size_t>(in.gcount()) != needed) {
    fail(ParseCode::kTruncated, context, "PGM payload truncated");
  }
  m.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (sample_bytes == 1) {
      m.labels[i] = static_cast<std::uint8_t>(buf[i]);
    } else {
      m.labels[i] =
          (static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[2 * i]))
           << 8) |
          static_cast<std::uint8_t>(buf[2 * i + 1]);
    }
  }
  return m;
}

// Loads a dstk container with frames == 1 as a flat float image.
struct FlatImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> values;
};

FlatImage read_dstk_2d(std::istream& in, const std::string& context) {
  const std::string line = read_header_line(in, context);
  const StackFileHeader h = parse_header(line, context);
  if (h.frames != 1) {
    fail(ParseCode::kBadDims, context,
         "expected a 2D container (frames = 1), got frames = " +
             std::to_string(h.frames));
  }
  if (h.width < 1 || h.height < 1) {
    fail(ParseCode::kBadDims, context, "dims must be >= 1");
  }
  const std::size_t n = checked_mul(h.width, h.height, context);
  const std::vector<char> buf = read_payload(in, h, n, context);
  FlatImage img;
  img.width = h.width;
  img.height = h.height;
  img.values.resize(n);
  if (h.dtype == "u16") {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint16_t v;
      std::memcpy(&v, buf.data() + 2 * i, 2);
      img.values[i] = static_cast<float>(v);
    }
  } else {
    std::memcpy(img.values.data(), buf.data(), n * 4);
    for (float v : img.values) {
      if (!std::isfinite(v)) {
        fail(ParseCode::kNonFinite, context, "non-finite sample");
      }
    }
  }
  return img;
}

}  // namespace

std::string StackFileHeader::serialize() const {
  nlohmann::json j;
  j["magic"] = magic;
  j["version"] = version;
  j["width"] = width;
  j["height"] = height;
  j["frames"] = frames;
  j["dtype"] = dtype;
  if (frame_rate_hz) {
    j["frame_rate_hz"] = *frame_rate_hz;
  }
  if (wavelength_nm) {
    j["wavelength_nm"] = *wavelength_nm;
  }
  return j.dump();
}

StackFileHeader StackFileHeader::parse(const std::string& line) {
  return parse_header(line, "header");
}

std::vector<std::uint32_t> MaskImage::cell_ids() const {
  std::vector<std::uint32_t> ids(labels.begin(), labels.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (!ids.empty() && ids.front() == 0) {
    ids.erase(ids.begin());
  }
  return ids;
}

void write_stack(const Stack& stack, const std::filesystem::path& path) {
  stack.validate();
  StackFileHeader h;
  h.width = stack.width;
  h.height = stack.height;
  h.frames = stack.frames;
  h.dtype = "f32";
  h.frame_rate_hz = stack.frame_rate_hz;
  h.wavelength_nm = stack.wavelength_nm;
  auto out = open_output(path, std::ios::binary);
  out << h.serialize() << '\n';
  out.write(reinterpret_cast<const char*>(stack.data.data()),
            static_cast<std::streamsize>(stack.data.size() * 4));
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

Stack read_stack(std::istream& in, const std::string& context) {
  const std::string line = read_header_line(in, context);
  const StackFileHeader h = parse_header(line, context);
  if (h.width < 1 || h.height < 1) {
    fail(ParseCode::kBadDims, context, "width and height must be >= 1");
  }
  if (h.frames < 2) {
    fail(ParseCode::kBadDims, context, "a stack needs at least 2 frames");
  }
  const std::size_t n =
      checked_mul(checked_mul(h.width, h.height, context), h.frames, context);
  const std::vector<char> buf = read_payload(in, h, n, context);

  Stack s;
  s.width = h.width;
  s.height = h.height;
  s.frames = h.frames;
  s.frame_rate_hz = h.frame_rate_hz;
  s.wavelength_nm = h.wavelength_nm;
  s.data.resize(n);
  if (h.dtype == "u16") {
    // Camera-native integers widen exactly; no normalization on ingest.
    for (std::size_t i = 0; i < n; ++i) {
      std::uint16_t v;
      std::memcpy(&v, buf.data() + 2 * i, 2);
      s.data[i] = static_cast<float>(v);
    }
  } else {
    std::memcpy(s.data.data(), buf.data(), n * 4);
    for (float v : s.data) {
      if (!std::isfinite(v)) {
        fail(ParseCode::kNonFinite, context, "non-finite sample");
      }
    }
  }
  return s;
}

Stack read_stack(const std::filesystem::path& path) {
  auto in = open_input(path, std::ios::binary);
  return read_stack(in, path.string());
}

void write_image(const DynamicImage& image, const std::filesystem::path& path,
                 ImageFormat format) {
  image.validate();
  if (format == ImageFormat::kDstk2d) {
    StackFileHeader h;
    h.width = image.width;
    h.height = image.height;
    h.frames = 1;
    h.dtype = "f32";
    auto out = open_output(path, std::ios::binary);
    out << h.serialize() << '\n';
    out.write(reinterpret_cast<const char*>(image.values.data()),
              static_cast<std::streamsize>(image.values.size() * 4));
    if (!out) {
      throw IoError("write failed: " + path.string());
    }
    return;
  }
  // pgm16 preview: min-max scale to the full 16-bit range; a constant image
  // has no contrast and maps to zeros.
  float lo = image.values.empty() ? 0.0f : image.values[0];
  float hi = lo;
  for (float v : image.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<std::uint16_t> samples(image.values.size(), 0);
  if (hi > lo) {
    const double scale = 65535.0 / (static_cast<double>(hi) - lo);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double scaled =
          (static_cast<double>(image.values[i]) - lo) * scale;
      samples[i] = static_cast<std::uint16_t>(std::lround(scaled));
    }
  }
  write_pgm16(samples, image.width, image.height, path);
}

DynamicImage read_image(const std::filesystem::path& path) {
  auto in = open_input(path, std::ios::binary);
  const std::string context = path.string();
  FlatImage flat = read_dstk_2d(in, context);
  DynamicImage img;
  img.width = flat.width;
  img.height = flat.height;
  img.values = std::move(flat.values);
  for (float v : img.values) {
    if (v < 0.0f) {
      fail(ParseCode::kNonFinite, context,
           "dynamic image values must be non-negative");
    }
  }
  return img;
}

MaskImage read_mask(const std::filesystem::path& path) {
  auto in = open_input(path, std::ios::binary);
  const std::string context = path.string();
  const int first = in.peek();
  if (first == 'P') {
    return read_mask_pgm(in, context);
  }
  const FlatImage flat = read_dstk_2d(in, context);
  MaskImage m;
  m.width = flat.width;
  m.height = flat.height;
  m.labels.resize(flat.values.size());
  for (std::size_t i = 0; i < flat.values.size(); ++i) {
    const float v = flat.values[i];
    if (v < 0.0f || v != std::floor(v) ||
        v > static_cast<float>(std::numeric_limits<std::uint32_t>::max())) {
      fail(ParseCode::kNonInteger, context,
           "mask values must be non-negative integers, got " +
               std::to_string(v));
    }
    m.labels[i] = static_cast<std::uint32_t>(v);
  }
  return m;
}

void write_mask(const MaskImage& mask, const std::filesystem::path& path) {
  if (mask.labels.size() != mask.width * mask.height) {
    throw DimensionError("mask label count does not match dims");
  }
  std::vector<std::uint16_t> samples(mask.labels.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (mask.labels[i] > 65535) {
      throw ArgumentError("mask label " + std::to_string(mask.labels[i]) +
                          " does not fit 16-bit PGM");
    }
    samples[i] = static_cast<std::uint16_t>(mask.labels[i]);
  }
  write_pgm16(samples, mask.width, mask.height, path);
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  auto out = open_output(path, std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

nlohmann::json read_json(const std::filesystem::path& path) {
  auto in = open_input(path, std::ios::binary);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseError::Code::kBadHeader,
                     path.string() + ": " + e.what());
  }
}

}  // namespace io
}  // namespace dffoct
