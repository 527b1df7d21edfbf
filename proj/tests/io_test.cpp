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

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "dronedet/archive.hpp"
#include "dronedet/detection_io.hpp"
#include "dronedet/ppm.hpp"
#include "dronedet/rng.hpp"
#include "dronedet/visdrone.hpp"

using namespace dronedet;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

VisDroneRecord random_record(Rng& rng) {
  VisDroneRecord r;
  r.bbox_left = rng.uniform_int(2000);
  r.bbox_top = rng.uniform_int(1500);
  r.bbox_width = 1 + rng.uniform_int(300);
  r.bbox_height = 1 + rng.uniform_int(300);
  r.score = rng.uniform_int(2);
  r.category = rng.uniform_int(12);
  r.truncation = rng.uniform_int(3);
  r.occlusion = rng.uniform_int(3);
  return r;
}

}  // namespace

TEST_CASE("visdrone parses an annotation line into a record") {
  std::vector<VisDroneRecord> recs = parse_visdrone("100,100,50,80,1,4,0,0\n");
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].box().x1 == 100.0);
  CHECK(recs[0].box().y1 == 100.0);
  CHECK(recs[0].box().x2 == 150.0);
  CHECK(recs[0].box().y2 == 180.0);
  CHECK(recs[0].category == 4);
  CHECK(recs[0].score == 1);
  CHECK(recs[0].evaluated());
  CHECK_FALSE(recs[0].ignored());
}

TEST_CASE("visdrone tolerates CRLF, blank lines, and trailing commas") {
  std::vector<VisDroneRecord> recs =
      parse_visdrone("10,10,5,5,1,4,0,0,\r\n\n20,20,8,8,0,0,1,2\r\n");
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].category == 4);
  CHECK(recs[1].ignored());
  CHECK(recs[1].truncation == 1);
}

TEST_CASE("visdrone reports the failing line") {
  CHECK_THROWS_WITH_AS(parse_visdrone("1,2,3\n"),
                       doctest::Contains("line 1"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_visdrone("10,10,5,5,1,4,0,0\n10,10,5,5,1,99,0,0\n"),
                       doctest::Contains("line 2"), std::runtime_error);
  CHECK_THROWS_AS(parse_visdrone("10,10,5,5,7,4,0,0\n"), std::runtime_error);
  CHECK_THROWS_AS(parse_visdrone("10,10,5,5,1,4,0,x\n"), std::runtime_error);
  CHECK_THROWS_AS(parse_visdrone("-1,10,5,5,1,4,0,0\n"), std::runtime_error);
}

TEST_CASE("visdrone serialize then parse is the identity") {
  Rng rng(21);
  std::vector<VisDroneRecord> recs;
  for (int i = 0; i < 500; ++i) recs.push_back(random_record(rng));
  std::vector<VisDroneRecord> back = parse_visdrone(serialize_visdrone(recs));
  CHECK(back == recs);
}

TEST_CASE("visdrone category names match the benchmark") {
  CHECK(visdrone_category_name(0) == "ignored-regions");
  CHECK(visdrone_category_name(1) == "pedestrian");
  CHECK(visdrone_category_name(4) == "car");
  CHECK(visdrone_category_name(6) == "truck");
  CHECK(visdrone_category_name(10) == "motor");
  CHECK(visdrone_category_name(11) == "others");
  CHECK_THROWS_AS(visdrone_category_name(12), std::invalid_argument);
}

TEST_CASE("dataset stats count categories and tiny labels") {
  AnnotatedImage img;
  img.image_id = "0000001";
  img.size = ImageSize(1536, 768);  // long side already at the reference
  // Five cars, two of them under 3 px on the long side; one ignored region;
  // one "others".
  img.records = {
      {10, 10, 100, 50, 1, 4, 0, 0},
      {200, 10, 2, 2, 1, 4, 0, 0},
      {300, 10, 2, 1, 1, 4, 0, 0},
      {400, 10, 40, 40, 1, 4, 0, 0},
      {500, 10, 3, 3, 1, 4, 0, 0},  // exactly 3 px: not tiny
      {600, 10, 50, 50, 0, 0, 0, 0},
      {700, 10, 5, 5, 1, 11, 0, 0},
  };
  DatasetStats stats = dataset_stats({img});
  CHECK(stats.total_records == 7);
  CHECK(stats.category_counts[4] == 5);
  CHECK(stats.category_counts[0] == 1);
  CHECK(stats.category_counts[11] == 1);
  CHECK(stats.object_labels == 5);
  CHECK(stats.tiny_labels == 2);
  CHECK(stats.per_image_counts.at("0000001")[4] == 5);
}

TEST_CASE("dataset stats scale the tiny rule by the image long side") {
  AnnotatedImage big;
  big.image_id = "big";
  big.size = ImageSize(3072, 1536);  // halved when normalized to 1536
  big.records = {
      {10, 10, 4, 4, 1, 1, 0, 0},  // 2 px after scaling: tiny
      {50, 10, 6, 6, 1, 1, 0, 0},  // exactly 3 px: kept
      {90, 10, 2, 7, 1, 1, 0, 0},  // long side 3.5 px: kept
  };
  DatasetStats stats = dataset_stats({big});
  CHECK(stats.object_labels == 3);
  CHECK(stats.tiny_labels == 1);
}

TEST_CASE("detection records survive a JSONL round trip") {
  Rng rng(31);
  std::vector<DetectionRecord> records;
  for (int i = 0; i < 100; ++i) {
    DetectionRecord r;
    r.image_id = "img_" + std::to_string(rng.uniform_int(10));
    r.class_id = rng.uniform_int(10);
    r.score = rng.uniform();
    double x = rng.uniform(0.0, 1000.0), y = rng.uniform(0.0, 1000.0);
    r.box = BBox(x, y, x + rng.uniform(0.5, 300.0), y + rng.uniform(0.5, 300.0));
    records.push_back(r);
  }
  records[0].score = 0.123456789;
  records[1].score = 1e-9;
  DetectionFile parsed = read_detections(write_detections(records));
  CHECK(parsed.records == records);
  CHECK_FALSE(parsed.has_view);
}

TEST_CASE("detection files can carry their TTA view") {
  ViewTransform view(1.3, true, ImageSize(1360, 765));
  std::vector<DetectionRecord> records = {
      {"img_0", 3, 0.75, BBox(10, 20, 30, 40)},
  };
  DetectionFile parsed = read_detections(write_detections(records, &view));
  REQUIRE(parsed.has_view);
  CHECK(parsed.view.scale == 1.3);
  CHECK(parsed.view.hflip);
  CHECK(parsed.view.source.width == 1360);
  CHECK(parsed.view.source.height == 765);
  CHECK(parsed.records == records);
}

TEST_CASE("detection reader requires the header and valid records") {
  CHECK_THROWS_WITH_AS(read_detections("{\"image_id\":\"a\"}\n"),
                       doctest::Contains("line 1"), std::runtime_error);
  std::string good = write_detections({{"a", 0, 0.5, BBox(0, 0, 1, 1)}});
  CHECK_THROWS_WITH_AS(read_detections(good + "not json\n"),
                       doctest::Contains("line 3"), std::runtime_error);
  std::string bad_version =
      "{\"format\":\"dronedet-detections\",\"version\":99}\n";
  CHECK_THROWS_AS(read_detections(bad_version), std::runtime_error);
  std::string bad_score =
      write_detections({}) + "{\"image_id\":\"a\",\"class_id\":0,\"score\":1.5,"
      "\"box\":[0,0,1,1]}\n";
  CHECK_THROWS_AS(read_detections(bad_score), std::runtime_error);
  CHECK(read_detections("").records.empty());
}

TEST_CASE("detection writer validates scores") {
  CHECK_THROWS_AS(write_detections({{"a", 0, 1.5, BBox(0, 0, 1, 1)}}),
                  std::invalid_argument);
}

TEST_CASE("detection file save and load helpers") {
  std::string path = temp_path("dronedet_io_dets.jsonl");
  std::vector<DetectionRecord> records = {
      {"x", 1, 0.25, BBox(1, 2, 3, 4)},
      {"y", 2, 0.75, BBox(5, 6, 7, 8)},
  };
  save_detections(path, records);
  CHECK(load_detections(path).records == records);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_detections(path), std::runtime_error);
}

TEST_CASE("grouping detections by image preserves boxes") {
  std::vector<DetectionRecord> records = {
      {"b", 1, 0.5, BBox(0, 0, 1, 1)},
      {"a", 2, 0.75, BBox(2, 2, 3, 3)},
      {"b", 3, 0.25, BBox(4, 4, 5, 5)},
  };
  std::map<std::string, std::vector<ScoredBox>> grouped = group_by_image(records);
  REQUIRE(grouped.size() == 2);
  REQUIRE(grouped["b"].size() == 2);
  CHECK(grouped["a"][0].class_id == 2);
  CHECK(grouped["b"][1].score == 0.25);
  ScoredBox sb = to_scored_box(records[0]);
  CHECK(sb.class_id == 1);
  DetectionRecord back = to_detection_record(sb, "b");
  CHECK(back == records[0]);
}

TEST_CASE("ppm encodes the binary P6 layout") {
  Image img(2, 2, 3);
  double vals[2][2][3] = {{{0, 1, 2}, {3, 4, 5}}, {{6, 7, 8}, {9, 10, 255}}};
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) {
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = vals[y][x][c];
    }
  }
  std::string bytes = encode_pnm(img);
  std::string expected = std::string("P6\n2 2\n255\n") +
                         std::string("\x00\x01\x02\x03\x04\x05\x06\x07\x08\x09\x0a\xff", 12);
  CHECK(bytes == expected);
  Image back = decode_pnm(bytes);
  CHECK(back.data() == img.data());
}

TEST_CASE("ppm rounds and clamps on encode") {
  Image img(1, 1, 3);
  img.at(0, 0, 0) = -5.0;
  img.at(0, 0, 1) = 300.0;
  img.at(0, 0, 2) = 127.5;
  Image back = decode_pnm(encode_pnm(img));
  CHECK(back.at(0, 0, 0) == 0.0);
  CHECK(back.at(0, 0, 1) == 255.0);
  CHECK(back.at(0, 0, 2) == 128.0);  // ties round away from zero
}

TEST_CASE("ppm round trip is bit exact for integral images") {
  Rng rng(41);
  Image img(13, 17, 3);
  for (double& v : img.data()) v = static_cast<double>(rng.uniform_int(256));
  Image back = decode_pnm(encode_pnm(img));
  CHECK(back.data() == img.data());
  CHECK(back.height() == 13);
  CHECK(back.width() == 17);
}

TEST_CASE("pgm gray images take the P5 path") {
  Rng rng(42);
  Image img(5, 9, 1);
  for (double& v : img.data()) v = static_cast<double>(rng.uniform_int(256));
  std::string bytes = encode_pnm(img);
  CHECK(bytes.substr(0, 2) == "P5");
  Image back = decode_pnm(bytes);
  CHECK(back.channels() == 1);
  CHECK(back.data() == img.data());
}

TEST_CASE("pnm header comments and whitespace are skipped") {
  std::string bytes = std::string("P6 # a comment\n# another\n 2\t1 # sizes\n255\n") +
                      std::string(6, 'A');
  Image img = decode_pnm(bytes);
  CHECK(img.width() == 2);
  CHECK(img.height() == 1);
  CHECK(img.at(0, 0, 0) == 65.0);
}

TEST_CASE("pnm rejects other formats and truncated data") {
  CHECK_THROWS_WITH_AS(decode_pnm("P3\n1 1\n255\n1 2 3\n"),
                       doctest::Contains("P3"), std::runtime_error);
  CHECK_THROWS_WITH_AS(decode_pnm("P6\n2 2\n255\nabc"),
                       doctest::Contains("end of pixel data"), std::runtime_error);
  CHECK_THROWS_AS(decode_pnm("nonsense"), std::runtime_error);
  CHECK_THROWS_AS(decode_pnm("P6\n0 2\n255\n"), std::runtime_error);
  CHECK_THROWS_AS(decode_pnm("P6\n1 1\n70000\n..."), std::runtime_error);
  Image two_channel(2, 2, 2);
  CHECK_THROWS_AS(encode_pnm(two_channel), std::invalid_argument);
}

TEST_CASE("pnm file helpers write and read on disk") {
  std::string path = temp_path("dronedet_io_img.ppm");
  Rng rng(43);
  Image img(6, 4, 3);
  for (double& v : img.data()) v = static_cast<double>(rng.uniform_int(256));
  write_pnm(path, img);
  Image back = read_pnm(path);
  CHECK(back.data() == img.data());
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_pnm(path), std::runtime_error);
}

TEST_CASE("archive stores named tensors losslessly") {
  Rng rng(51);
  Archive ar;
  Tensor a(std::vector<std::size_t>{3, 4});
  for (double& v : a.data()) v = rng.normal() * 1e8;
  Tensor b(std::vector<std::size_t>{2, 2, 2});
  for (double& v : b.data()) v = rng.normal() * 1e-8;
  Tensor c(std::vector<std::size_t>{5});
  for (double& v : c.data()) v = rng.normal();
  ar.put("weights", a);
  ar.put("bias", b);
  ar.put("stats", c);

  std::string path = temp_path("dronedet_io_archive.bin");
  ar.save(path);
  Archive back = Archive::load(path);
  REQUIRE(back.size() == 3);
  CHECK(back.names() == std::vector<std::string>{"weights", "bias", "stats"});
  CHECK(back.get("weights").data() == a.data());
  CHECK(back.get("weights").shape() == a.shape());
  CHECK(back.get("bias").data() == b.data());
  CHECK(back.get("stats").data() == c.data());
  std::remove(path.c_str());
}

TEST_CASE("archive put replaces entries in place") {
  Archive ar;
  Tensor a(std::vector<std::size_t>{2});
  a.data() = {1.0, 2.0};
  ar.put("x", a);
  Tensor b(std::vector<std::size_t>{3});
  b.data() = {4.0, 5.0, 6.0};
  ar.put("y", b);
  ar.put("x", b);
  CHECK(ar.size() == 2);
  CHECK(ar.names() == std::vector<std::string>{"x", "y"});
  CHECK(ar.get("x").data() == b.data());
  CHECK(ar.contains("y"));
  CHECK_FALSE(ar.contains("z"));
  CHECK_THROWS_AS(ar.get("z"), std::runtime_error);
}

TEST_CASE("archive rejects corrupt files") {
  std::string path = temp_path("dronedet_io_archive_bad.bin");
  Archive ar;
  Tensor t(std::vector<std::size_t>{4});
  t.data() = {1, 2, 3, 4};
  ar.put("t", t);
  ar.save(path);

  std::ifstream is(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  is.close();

  std::ofstream truncated(path, std::ios::binary | std::ios::trunc);
  truncated.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 5));
  truncated.close();
  CHECK_THROWS_WITH_AS(Archive::load(path), doctest::Contains("truncated"),
                       std::runtime_error);

  std::ofstream garbage(path, std::ios::binary | std::ios::trunc);
  garbage << "NOTANARCHIVE";
  garbage.close();
  CHECK_THROWS_WITH_AS(Archive::load(path), doctest::Contains("magic"), std::runtime_error);
  std::remove(path.c_str());
}
