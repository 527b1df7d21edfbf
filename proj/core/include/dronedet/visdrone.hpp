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

#include <array>
#include <map>
#include <string>
#include <vector>

#include "dronedet/geometry.hpp"

namespace dronedet {

/// One line of a VisDrone annotation file:
/// bbox_left,bbox_top,bbox_width,bbox_height,score,category,truncation,occlusion
/// The score field is a ground-truth validity flag (0 marks entries that are
/// not evaluation targets), not a confidence.
struct VisDroneRecord {
  int bbox_left = 0;
  int bbox_top = 0;
  int bbox_width = 0;
  int bbox_height = 0;
  int score = 0;       // {0, 1}
  int category = 0;    // [0, 11]
  int truncation = 0;  // [0, 2]
  int occlusion = 0;   // [0, 2]

  BBox box() const {
    return BBox(bbox_left, bbox_top, bbox_left + bbox_width, bbox_top + bbox_height);
  }
  /// Category 0 marks ignored regions.
  bool ignored() const { return category == 0; }
  /// Object classes scored by the benchmark (ids 1..10). Category 11
  /// ("others") exists in the data but is never evaluated.
  bool evaluated() const { return category >= 1 && category <= 10; }

  bool operator==(const VisDroneRecord&) const = default;
};

inline constexpr int kVisDroneNumClasses = 10;  // evaluated ids 1..10

/// Name for any category id in [0, 11]. Id 6 is "truck" (the benchmark's
/// original tables spell it "trunk").
const std::string& visdrone_category_name(int category);

/// Throws std::runtime_error with a 1-based line number on malformed input.
/// Tolerates CRLF line ends and the trailing comma many VisDrone files carry.
std::vector<VisDroneRecord> parse_visdrone(const std::string& text);

std::string serialize_visdrone(const std::vector<VisDroneRecord>& records);

struct AnnotatedImage {
  std::string image_id;
  ImageSize size;
  std::vector<VisDroneRecord> records;
};

struct DatasetStats {
  int min_px = 3;
  int ref_long_side = 1536;
  std::array<long long, 12> category_counts{};  // indexed by category id
  long long total_records = 0;   // every annotation line
  long long object_labels = 0;   // categories 1..10
  long long tiny_labels = 0;     // object labels under the tiny rule
  std::map<std::string, std::array<long long, 12>> per_image_counts;
};

/// Counts labels per category and per image, plus how many object labels
/// would fall under min_px once each image's long side is scaled to
/// ref_long_side (strict <, matching mask_tiny_labels).
DatasetStats dataset_stats(const std::vector<AnnotatedImage>& images,
                           int min_px = 3, int ref_long_side = 1536);

}  // namespace dronedet
