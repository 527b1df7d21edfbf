// Copyright 2026 The dronedet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dronedet/ppm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dronedet {
namespace {

bool is_pnm_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

// Skips whitespace and '#' comments, then reads one decimal token.
long read_header_int(const std::string& bytes, std::size_t& pos, const char* what) {
  for (;;) {
    while (pos < bytes.size() && is_pnm_space(bytes[pos])) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  if (pos >= bytes.size() || bytes[pos] < '0' || bytes[pos] > '9') {
    throw std::runtime_error(std::string("pnm: missing ") + what + " in header");
  }
  long value = 0;
  while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
    value = value * 10 + (bytes[pos] - '0');
    if (value > 1000000000L) throw std::runtime_error(std::string("pnm: absurd ") + what);
    ++pos;
  }
  return value;
}

}  // namespace

Image decode_pnm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') {
    throw std::runtime_error("pnm: not a portable pixmap");
  }
  int channels = 0;
  if (bytes[1] == '6') {
    channels = 3;
  } else if (bytes[1] == '5') {
    channels = 1;
  } else {
    throw std::runtime_error(std::string("pnm: unsupported magic number 'P") + bytes[1] +
                             "' (only binary P5/P6)");
  }

  std::size_t pos = 2;
  const long width = read_header_int(bytes, pos, "width");
  const long height = read_header_int(bytes, pos, "height");
  const long maxval = read_header_int(bytes, pos, "maxval");
  if (width < 1 || height < 1) throw std::runtime_error("pnm: non-positive dimensions");
  if (maxval < 1 || maxval > 255) {
    throw std::runtime_error("pnm: only 8-bit data supported (maxval <= 255)");
  }
  if (pos >= bytes.size() || !is_pnm_space(bytes[pos])) {
    throw std::runtime_error("pnm: missing whitespace after maxval");
  }
  ++pos;  // exactly one whitespace byte separates header and payload

  const std::size_t expected = static_cast<std::size_t>(width) *
                               static_cast<std::size_t>(height) *
                               static_cast<std::size_t>(channels);
  if (bytes.size() - pos < expected) {
    throw std::runtime_error("pnm: unexpected end of pixel data");
  }
  Image img(static_cast<int>(height), static_cast<int>(width), channels);
  for (std::size_t i = 0; i < expected; ++i) {
    img.data()[i] = static_cast<double>(static_cast<unsigned char>(bytes[pos + i]));
  }
  return img;
}

Image read_pnm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("pnm: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return decode_pnm(buf.str());
}

std::string encode_pnm(const Image& img) {
  if (img.empty()) throw std::invalid_argument("pnm: empty image");
  const char* magic;
  if (img.channels() == 3) {
    magic = "P6";
  } else if (img.channels() == 1) {
    magic = "P5";
  } else {
    throw std::invalid_argument("pnm: only 1- or 3-channel images supported");
  }
  std::string out = std::string(magic) + "\n" + std::to_string(img.width()) + " " +
                    std::to_string(img.height()) + "\n255\n";
  out.reserve(out.size() + img.data().size());
  for (double v : img.data()) {
    const long q = std::lround(v);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::clamp(q, 0L, 255L))));
  }
  return out;
}

void write_pnm(const std::string& path, const Image& img) {
  const std::string bytes = encode_pnm(img);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("pnm: cannot open '" + path + "' for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("pnm: write failed for '" + path + "'");
}

}  // namespace dronedet
