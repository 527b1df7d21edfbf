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

#include "dronedet/archive.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dronedet {
namespace {

constexpr char kMagic[6] = {'D', 'D', 'A', 'R', '\x01', '\n'};

void write_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(os, bits);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("archive: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("archive: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& is) {
  const std::uint64_t bits = read_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void Archive::put(const std::string& name, Tensor t) {
  if (name.empty()) throw std::invalid_argument("archive: empty entry name");
  for (auto& entry : entries_) {
    if (entry.first == name) {
      entry.second = std::move(t);
      return;
    }
  }
  entries_.emplace_back(name, std::move(t));
}

const Tensor& Archive::get(const std::string& name) const {
  for (const auto& entry : entries_) {
    if (entry.first == name) return entry.second;
  }
  throw std::runtime_error("archive: no entry named '" + name + "'");
}

bool Archive::contains(const std::string& name) const {
  for (const auto& entry : entries_) {
    if (entry.first == name) return true;
  }
  return false;
}

std::vector<std::string> Archive::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& entry : entries_) out.push_back(entry.first);
  return out;
}

void Archive::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("archive: cannot open '" + path + "' for writing");
  os.write(kMagic, sizeof(kMagic));
  write_u32(os, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, tensor] : entries_) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) write_u64(os, d);
    for (double v : tensor.data()) write_f64(os, v);
  }
  if (!os) throw std::runtime_error("archive: write failed for '" + path + "'");
}

Archive Archive::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("archive: cannot open '" + path + "'");
  char magic[sizeof(kMagic)];
  is.read(magic, sizeof(kMagic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("archive: bad magic in '" + path + "'");
  }
  Archive archive;
  const std::uint32_t count = read_u32(is);
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint32_t name_len = read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw std::runtime_error("archive: truncated file");
    const std::uint32_t rank = read_u32(is);
    std::vector<std::size_t> shape(rank);
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint64_t dim = read_u64(is);
      if (dim == 0) throw std::runtime_error("archive: zero dimension");
      shape[d] = static_cast<std::size_t>(dim);
      total *= shape[d];
    }
    std::vector<double> data(total);
    for (std::size_t i = 0; i < total; ++i) data[i] = read_f64(is);
    if (archive.contains(name)) {
      throw std::runtime_error("archive: duplicate entry '" + name + "'");
    }
    archive.put(name, Tensor::from_data(std::move(shape), std::move(data)));
  }
  return archive;
}

}  // namespace dronedet
