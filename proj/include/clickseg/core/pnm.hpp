// Copyright 2026 The ClickSeg Authors
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

// Binary PPM (P6) images and PGM (P5) masks / probability maps, maxval 255.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "clickseg/core/raster.hpp"

namespace clickseg {

namespace detail {

struct PnmHeader {
  char kind = 0;  // '5' or '6'
  int width = 0;
  int height = 0;
  std::size_t payload_offset = 0;
};

inline PnmHeader parse_pnm_header(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) fail("pnm: bad magic");
  PnmHeader h;
  h.kind = bytes[1];
  std::size_t pos = 2;
  const auto next_int = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) fail("pnm: malformed header");
    long value = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      value = value * 10 + (bytes[pos] - '0');
      if (value > 1'000'000) fail("pnm: header value out of range");
      ++pos;
    }
    return static_cast<int>(value);
  };
  h.width = next_int();
  h.height = next_int();
  const int maxval = next_int();
  if (h.width < 1 || h.height < 1) fail("pnm: invalid dimensions " + std::to_string(h.width) + "x" + std::to_string(h.height));
  if (maxval != 255) fail("pnm: only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) fail("pnm: malformed header");
  h.payload_offset = pos + 1;
  const std::size_t channels = h.kind == '6' ? 3 : 1;
  const std::size_t need = static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height) * channels;
  if (bytes.size() - h.payload_offset < need) fail("pnm: truncated payload");
  return h;
}

inline std::string pnm_header(char kind, Dims d) {
  return std::string("P") + kind + "\n" + std::to_string(d.width) + " " + std::to_string(d.height) + "\n255\n";
}

}  // namespace detail

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::not_found, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::internal, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::internal, "write failed: " + path.string());
}

inline Image decode_ppm(std::string_view bytes) {
  const auto h = detail::parse_pnm_header(bytes);
  if (h.kind != '6') fail("ppm: expected P6");
  Image img(h.width, h.height);
  const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data() + h.payload_offset);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = Rgb{p[3 * i], p[3 * i + 1], p[3 * i + 2]};
  return img;
}

inline std::string encode_ppm(const Image& img) {
  std::string out = detail::pnm_header('6', img.dims());
  out.reserve(out.size() + img.size() * 3);
  for (const Rgb& c : img) {
    out.push_back(static_cast<char>(c.r));
    out.push_back(static_cast<char>(c.g));
    out.push_back(static_cast<char>(c.b));
  }
  return out;
}

/// Raw 8-bit gray values.
inline Raster<std::uint8_t> decode_pgm(std::string_view bytes) {
  const auto h = detail::parse_pnm_header(bytes);
  if (h.kind != '5') fail("pgm: expected P5");
  Raster<std::uint8_t> r(h.width, h.height);
  std::copy_n(reinterpret_cast<const std::uint8_t*>(bytes.data() + h.payload_offset), r.size(), r.begin());
  return r;
}

inline std::string encode_pgm(const Raster<std::uint8_t>& gray) {
  std::string out = detail::pnm_header('5', gray.dims());
  out.append(reinterpret_cast<const char*>(gray.data().data()), gray.size());
  return out;
}

/// Gray >= 128 reads as foreground.
inline BinaryMask decode_mask(std::string_view bytes) {
  BinaryMask m = decode_pgm(bytes);
  for (auto& v : m) v = v >= 128 ? 1 : 0;
  return m;
}

/// Foreground 255, background 0.
inline std::string encode_mask(const BinaryMask& m) {
  Raster<std::uint8_t> gray(m.dims());
  for (std::size_t i = 0; i < m.size(); ++i) gray[i] = m[i] ? 255 : 0;
  return encode_pgm(gray);
}

inline ProbabilityMap decode_probability(std::string_view bytes) {
  const auto gray = decode_pgm(bytes);
  ProbabilityMap p(gray.dims());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = gray[i] / 255.0;
  return p;
}

inline std::string encode_probability(const ProbabilityMap& p) {
  Raster<std::uint8_t> gray(p.dims());
  for (std::size_t i = 0; i < p.size(); ++i)
    gray[i] = static_cast<std::uint8_t>(std::lround(std::clamp(p[i], 0.0, 1.0) * 255.0));
  return encode_pgm(gray);
}

/// Debug view of a guidance channel: [-1, 1] maps affinely onto [0, 255].
inline std::string encode_guidance(const GuidanceMap& g) {
  Raster<std::uint8_t> gray(g.dims());
  for (std::size_t i = 0; i < g.size(); ++i)
    gray[i] = static_cast<std::uint8_t>(std::lround((std::clamp(g[i], -1.0, 1.0) + 1.0) * 127.5));
  return encode_pgm(gray);
}

inline Image read_image(const std::filesystem::path& p) { return decode_ppm(read_file(p)); }
inline void write_image(const std::filesystem::path& p, const Image& img) { write_file(p, encode_ppm(img)); }
inline BinaryMask read_mask(const std::filesystem::path& p) { return decode_mask(read_file(p)); }
inline void write_mask(const std::filesystem::path& p, const BinaryMask& m) { write_file(p, encode_mask(m)); }
inline ProbabilityMap read_probability(const std::filesystem::path& p) { return decode_probability(read_file(p)); }
inline void write_probability(const std::filesystem::path& p, const ProbabilityMap& m) {
  write_file(p, encode_probability(m));
}

}  // namespace clickseg
