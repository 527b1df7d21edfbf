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

#include "dronedet/detection_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dronedet {
namespace {

using nlohmann::json;

[[noreturn]] void fail_line(std::size_t line_no, const std::string& why) {
  throw std::runtime_error("detections: line " + std::to_string(line_no) + ": " + why);
}

json view_to_json(const ViewTransform& view) {
  return json{{"scale", view.scale},
              {"hflip", view.hflip},
              {"source_width", view.source.width},
              {"source_height", view.source.height}};
}

ViewTransform view_from_json(const json& j) {
  return ViewTransform(j.at("scale").get<double>(), j.at("hflip").get<bool>(),
                       ImageSize(j.at("source_width").get<int>(),
                                 j.at("source_height").get<int>()));
}

}  // namespace

std::string write_detections(const std::vector<DetectionRecord>& records,
                             const ViewTransform* view) {
  json header{{"format", "dronedet-detections"}, {"version", kDetectionSchemaVersion}};
  if (view != nullptr) header["view"] = view_to_json(*view);
  std::string out = header.dump();
  out += '\n';
  for (const DetectionRecord& r : records) {
    if (!(r.score >= 0.0 && r.score <= 1.0)) {
      throw std::invalid_argument("write_detections: score outside [0, 1]");
    }
    const json obj{{"image_id", r.image_id},
                   {"class_id", r.class_id},
                   {"score", r.score},
                   {"box", {r.box.x1, r.box.y1, r.box.x2, r.box.y2}}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

DetectionFile read_detections(const std::string& text) {
  DetectionFile result;
  std::istringstream stream(text);
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(stream, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      fail_line(line_no, std::string("invalid JSON: ") + e.what());
    }

    if (!saw_header) {
      if (!obj.is_object() || obj.value("format", "") != "dronedet-detections") {
        fail_line(line_no, "missing dronedet-detections header");
      }
      if (obj.value("version", -1) != kDetectionSchemaVersion) {
        fail_line(line_no, "unsupported schema version");
      }
      if (obj.contains("view")) {
        try {
          result.view = view_from_json(obj.at("view"));
          result.has_view = true;
        } catch (const std::exception& e) {
          fail_line(line_no, std::string("bad view header: ") + e.what());
        }
      }
      saw_header = true;
      continue;
    }

    try {
      DetectionRecord rec;
      rec.image_id = obj.at("image_id").get<std::string>();
      rec.class_id = obj.at("class_id").get<int>();
      rec.score = obj.at("score").get<double>();
      const auto& b = obj.at("box");
      if (!b.is_array() || b.size() != 4) throw std::runtime_error("box must have 4 numbers");
      rec.box = BBox(b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                     b[3].get<double>());
      if (!(rec.score >= 0.0 && rec.score <= 1.0)) {
        throw std::runtime_error("score outside [0, 1]");
      }
      result.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      fail_line(line_no, e.what());
    }
  }
  // A file with no non-blank lines is an empty detection set; any non-header
  // first line already failed above.
  return result;
}

void save_detections(const std::string& path,
                     const std::vector<DetectionRecord>& records,
                     const ViewTransform* view) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("detections: cannot open '" + path + "' for writing");
  const std::string text = write_detections(records, view);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw std::runtime_error("detections: write failed for '" + path + "'");
}

DetectionFile load_detections(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("detections: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return read_detections(buf.str());
}

ScoredBox to_scored_box(const DetectionRecord& record) {
  return ScoredBox{record.box, record.score, record.class_id};
}

DetectionRecord to_detection_record(const ScoredBox& box, const std::string& image_id) {
  DetectionRecord rec;
  rec.image_id = image_id;
  rec.class_id = box.class_id;
  rec.score = box.score;
  rec.box = box.box;
  return rec;
}

std::map<std::string, std::vector<ScoredBox>> group_by_image(
    const std::vector<DetectionRecord>& records) {
  std::map<std::string, std::vector<ScoredBox>> grouped;
  for (const DetectionRecord& r : records) grouped[r.image_id].push_back(to_scored_box(r));
  return grouped;
}

}  // namespace dronedet
