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

#include "dronedet/visdrone.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <stdexcept>

namespace dronedet {
namespace {

const std::array<std::string, 12> kCategoryNames = {
    "ignored-regions", "pedestrian", "people",   "bicycle",
    "car",             "van",        "truck",    "tricycle",
    "awning-tricycle", "bus",        "motor",    "others"};

[[noreturn]] void fail_line(std::size_t line_no, const std::string& why) {
  throw std::runtime_error("visdrone: line " + std::to_string(line_no) + ": " + why);
}

int parse_int_field(const std::string& field, std::size_t line_no, const char* name) {
  int value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    fail_line(line_no, std::string("field '") + name + "' is not an integer: '" + field + "'");
  }
  return value;
}

}  // namespace

const std::string& visdrone_category_name(int category) {
  if (category < 0 || category > 11) {
    throw std::invalid_argument("visdrone_category_name: category outside [0, 11]");
  }
  return kCategoryNames[static_cast<std::size_t>(category)];
}

std::vector<VisDroneRecord> parse_visdrone(const std::string& text) {
  static const char* kFieldNames[8] = {"bbox_left", "bbox_top",  "bbox_width",
                                       "bbox_height", "score",   "category",
                                       "truncation",  "occlusion"};
  std::vector<VisDroneRecord> records;
  std::istringstream stream(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string> fields;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    // Many VisDrone files end each line with a comma; drop the empty tail.
    if (fields.size() == 9 && fields.back().empty()) fields.pop_back();
    if (fields.size() != 8) {
      fail_line(line_no, "expected 8 comma-separated fields, got " +
                             std::to_string(fields.size()));
    }

    int v[8];
    for (int i = 0; i < 8; ++i) v[i] = parse_int_field(fields[i], line_no, kFieldNames[i]);
    VisDroneRecord rec{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
    if (rec.bbox_left < 0 || rec.bbox_top < 0 || rec.bbox_width < 0 || rec.bbox_height < 0) {
      fail_line(line_no, "negative box field");
    }
    if (rec.score != 0 && rec.score != 1) fail_line(line_no, "score flag must be 0 or 1");
    if (rec.category < 0 || rec.category > 11) {
      fail_line(line_no, "category " + std::to_string(rec.category) + " outside [0, 11]");
    }
    if (rec.truncation < 0 || rec.truncation > 2) fail_line(line_no, "truncation outside [0, 2]");
    if (rec.occlusion < 0 || rec.occlusion > 2) fail_line(line_no, "occlusion outside [0, 2]");
    records.push_back(rec);
  }
  return records;
}

std::string serialize_visdrone(const std::vector<VisDroneRecord>& records) {
  std::string out;
  for (const VisDroneRecord& r : records) {
    out += std::to_string(r.bbox_left) + ',' + std::to_string(r.bbox_top) + ',' +
           std::to_string(r.bbox_width) + ',' + std::to_string(r.bbox_height) + ',' +
           std::to_string(r.score) + ',' + std::to_string(r.category) + ',' +
           std::to_string(r.truncation) + ',' + std::to_string(r.occlusion) + '\n';
  }
  return out;
}

DatasetStats dataset_stats(const std::vector<AnnotatedImage>& images,
                           int min_px, int ref_long_side) {
  if (min_px < 1 || ref_long_side < 1) {
    throw std::invalid_argument("dataset_stats: min_px and ref_long_side must be positive");
  }
  DatasetStats stats;
  stats.min_px = min_px;
  stats.ref_long_side = ref_long_side;
  for (const AnnotatedImage& img : images) {
    const double scale =
        static_cast<double>(ref_long_side) / static_cast<double>(img.size.long_side());
    auto& image_counts = stats.per_image_counts[img.image_id];
    for (const VisDroneRecord& rec : img.records) {
      ++stats.total_records;
      ++stats.category_counts[static_cast<std::size_t>(rec.category)];
      ++image_counts[static_cast<std::size_t>(rec.category)];
      if (!rec.evaluated()) continue;
      ++stats.object_labels;
      const double scaled_long =
          std::max(rec.bbox_width, rec.bbox_height) * scale;
      if (scaled_long < static_cast<double>(min_px)) ++stats.tiny_labels;
    }
  }
  return stats;
}

}  // namespace dronedet
