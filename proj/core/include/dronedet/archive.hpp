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

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dronedet/tensor.hpp"

namespace dronedet {

/// Flat named-array container with a fixed binary layout:
///
///   magic "DDAR\x01\n" (6 bytes), entry count u32, then per entry:
///   name length u32, name bytes, rank u32, dims as u64 each, payload as
///   float64 values. All integers and floats little-endian.
///
/// Entries keep insertion order; put() on an existing name replaces the
/// tensor in place.
class Archive {
 public:
  void put(const std::string& name, Tensor t);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;
  std::size_t size() const { return entries_.size(); }

  void save(const std::string& path) const;
  static Archive load(const std::string& path);

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

}  // namespace dronedet
