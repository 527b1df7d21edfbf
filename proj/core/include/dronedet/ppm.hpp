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

#include "dronedet/image.hpp"

namespace dronedet {

/// Binary portable pixmaps only: P6 (8-bit RGB) and P5 (8-bit gray). These
/// round-trip bit-exactly, which is why compressed formats are out of scope;
/// convert with e.g. `magick in.jpg out.ppm` first.
Image decode_pnm(const std::string& bytes);
Image read_pnm(const std::string& path);

/// Encodes 3-channel images as P6 and 1-channel as P5, maxval 255. Values
/// are rounded to nearest and clamped to [0, 255].
std::string encode_pnm(const Image& img);
void write_pnm(const std::string& path, const Image& img);

}  // namespace dronedet
