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

#include <map>
#include <string>
#include <vector>

#include "dronedet/geometry.hpp"

namespace dronedet {

struct DetectionRecord {
  std::string image_id;
  int class_id = 0;
  double score = 0.0;  // [0, 1]
  BBox box;

  bool operator==(const DetectionRecord&) const = default;
};

inline constexpr int kDetectionSchemaVersion = 1;

/// Detections travel as line-delimited JSON: a header object
/// {"format":"dronedet-detections","version":1} on the first line, then one
/// object per detection. A header may carry a "view" object (scale, hflip,
/// source width/height) tagging every record in the file with the TTA view
/// it was produced in. Doubles are emitted with shortest round-trip
/// precision, so scores survive read-after-write exactly.
struct DetectionFile {
  std::vector<DetectionRecord> records;
  bool has_view = false;
  ViewTransform view;
};

std::string write_detections(const std::vector<DetectionRecord>& records,
                             const ViewTransform* view = nullptr);
DetectionFile read_detections(const std::string& text);

void save_detections(const std::string& path,
                     const std::vector<DetectionRecord>& records,
                     const ViewTransform* view = nullptr);
DetectionFile load_detections(const std::string& path);

ScoredBox to_scored_box(const DetectionRecord& record);
DetectionRecord to_detection_record(const ScoredBox& box, const std::string& image_id);

/// Groups records by image id (map order = lexicographic image id).
std::map<std::string, std::vector<ScoredBox>> group_by_image(
    const std::vector<DetectionRecord>& records);

}  // namespace dronedet
