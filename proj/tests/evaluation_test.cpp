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

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dronedet/evaluation.hpp"
#include "dronedet/rng.hpp"
#include "reference.hpp"

using namespace dronedet;

namespace {

std::vector<ScoredBox> random_dets(Rng& rng, int max_boxes, int num_classes) {
  int n = rng.uniform_int(max_boxes + 1);
  std::vector<ScoredBox> dets;
  for (int i = 0; i < n; ++i) {
    double x = rng.uniform(0.0, 50.0);
    double y = rng.uniform(0.0, 50.0);
    dets.push_back({BBox(x, y, x + rng.uniform(2.0, 30.0), y + rng.uniform(2.0, 30.0)),
                    rng.uniform(), rng.uniform_int(num_classes)});
  }
  return dets;
}

std::vector<GroundTruthBox> random_gts(Rng& rng, int max_boxes, int num_classes,
                                       bool allow_ignore) {
  int n = rng.uniform_int(max_boxes + 1);
  std::vector<GroundTruthBox> gts;
  for (int i = 0; i < n; ++i) {
    double x = rng.uniform(0.0, 50.0);
    double y = rng.uniform(0.0, 50.0);
    bool ignore = allow_ignore && rng.uniform() < 0.2;
    gts.push_back({BBox(x, y, x + rng.uniform(2.0, 30.0), y + rng.uniform(2.0, 30.0)),
                   rng.uniform_int(num_classes), ignore});
  }
  return gts;
}

}  // namespace

TEST_CASE("matching pairs a detection with its ground truth") {
  std::vector<ScoredBox> dets = {{BBox(0, 0, 10, 10), 0.9, 0}};
  std::vector<GroundTruthBox> gts = {{BBox(1, 1, 11, 11), 0, false}};
  MatchResult mr = match_detections(dets, gts, 0.5);
  REQUIRE(mr.detections.size() == 1);
  CHECK(mr.detections[0].tp);
  CHECK(mr.detections[0].gt_index == 0);
  CHECK(mr.gt_match[0] == 0);
}

TEST_CASE("matching gives the ground truth to the higher-scoring detection") {
  std::vector<ScoredBox> dets = {
      {BBox(0, 0, 10, 10), 0.7, 0},
      {BBox(0, 0, 10, 10), 0.9, 0},
  };
  std::vector<GroundTruthBox> gts = {{BBox(0, 0, 10, 10), 0, false}};
  MatchResult mr = match_detections(dets, gts, 0.5);
  REQUIRE(mr.detections.size() == 2);
  CHECK(mr.detections[0].det_index == 1);
  CHECK(mr.detections[0].tp);
  CHECK_FALSE(mr.detections[1].tp);
  CHECK(mr.gt_match[0] == 1);
}

TEST_CASE("matching prefers the highest-IoU ground truth") {
  std::vector<ScoredBox> dets = {{BBox(0, 0, 10, 10), 0.9, 0}};
  std::vector<GroundTruthBox> gts = {
      {BBox(0, 4, 10, 14), 0, false},   // IoU 3/7
      {BBox(0, 1, 10, 11), 0, false},   // IoU 9/11
  };
  MatchResult mr = match_detections(dets, gts, 0.3);
  CHECK(mr.detections[0].gt_index == 1);
}

TEST_CASE("matching requires the class to agree") {
  std::vector<ScoredBox> dets = {{BBox(0, 0, 10, 10), 0.9, 1}};
  std::vector<GroundTruthBox> gts = {{BBox(0, 0, 10, 10), 0, false}};
  MatchResult mr = match_detections(dets, gts, 0.5);
  CHECK_FALSE(mr.detections[0].tp);
}

TEST_CASE("detection overlapping only an ignored region is neither TP nor FP") {
  std::vector<ScoredBox> dets = {{BBox(0, 0, 10, 10), 0.9, 0}};
  std::vector<GroundTruthBox> gts = {{BBox(0, 0, 10, 10), 0, true}};
  MatchResult mr = match_detections(dets, gts, 0.5);
  REQUIRE(mr.detections.size() == 1);
  CHECK_FALSE(mr.detections[0].tp);
  CHECK(mr.detections[0].ignored);
  CHECK(mr.gt_match[0] == -1);
}

TEST_CASE("average precision of a perfect detector is one") {
  CHECK(average_precision({{0.9, true}}, 1) == 1.0);
  CHECK(average_precision({{0.9, true}, {0.8, true}}, 2) == 1.0);
}

TEST_CASE("average precision with no true positive is zero") {
  CHECK(average_precision({{0.9, false}}, 1) == 0.0);
  CHECK(average_precision({}, 3) == 0.0);
}

TEST_CASE("average precision of FP-above-TP on one ground truth is one half") {
  CHECK(average_precision({{0.9, false}, {0.8, true}}, 1) == 0.5);
}

TEST_CASE("average precision is NaN without ground truth") {
  CHECK(std::isnan(average_precision({{0.9, true}}, 0)));
}

TEST_CASE("average precision stays within the unit interval") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    int n = rng.uniform_int(20);
    std::vector<ScoredFlag> flags;
    long long tp = 0;
    for (int i = 0; i < n; ++i) {
      bool hit = rng.uniform() < 0.5;
      tp += hit ? 1 : 0;
      flags.push_back({rng.uniform(), hit});
    }
    long long num_gt = tp + rng.uniform_int(5);
    if (num_gt == 0) continue;
    double ap = average_precision(flags, num_gt);
    CHECK(ap >= 0.0);
    CHECK(ap <= 1.0);
  }
}

TEST_CASE("evaluate scores a perfect detector at mAP 1") {
  std::map<std::string, std::vector<GroundTruthBox>> gts;
  gts["a"] = {{BBox(0, 0, 10, 10), 0, false}, {BBox(30, 30, 50, 50), 1, false}};
  gts["b"] = {{BBox(5, 5, 25, 25), 0, false}};
  std::map<std::string, std::vector<ScoredBox>> dets;
  for (const auto& [id, boxes] : gts) {
    for (const GroundTruthBox& g : boxes) dets[id].push_back({g.box, 0.9, g.class_id});
  }
  EvalReport rep = evaluate(dets, gts);
  CHECK(rep.map == 1.0);
  CHECK(rep.ap50 == 1.0);
  CHECK(rep.num_gt == 3);
  REQUIRE(rep.class_ids.size() == 2);
  CHECK(rep.ap50_per_class[0] == 1.0);
}

TEST_CASE("evaluate with no detections gives zero mAP") {
  std::map<std::string, std::vector<GroundTruthBox>> gts;
  gts["a"] = {{BBox(0, 0, 10, 10), 0, false}};
  EvalReport rep = evaluate({}, gts);
  CHECK(rep.map == 0.0);
  CHECK(rep.num_detections == 0);
}

TEST_CASE("evaluate throws on an empty image set") {
  CHECK_THROWS_AS(evaluate({}, {}), std::runtime_error);
}

TEST_CASE("classes without ground truth are excluded from the means") {
  std::map<std::string, std::vector<GroundTruthBox>> gts;
  gts["a"] = {{BBox(0, 0, 10, 10), 0, false}};
  std::map<std::string, std::vector<ScoredBox>> dets;
  dets["a"] = {{BBox(0, 0, 10, 10), 0.9, 0}, {BBox(20, 20, 30, 30), 0.8, 5}};
  EvalReport rep = evaluate(dets, gts);
  REQUIRE(rep.class_ids.size() == 1);
  CHECK(rep.class_ids[0] == 0);
  CHECK(rep.map == 1.0);
}

TEST_CASE("per-image detection cap keeps only the top-scored boxes") {
  std::map<std::string, std::vector<GroundTruthBox>> gts;
  gts["a"] = {{BBox(0, 0, 10, 10), 0, false}, {BBox(30, 30, 40, 40), 0, false}};
  std::map<std::string, std::vector<ScoredBox>> dets;
  dets["a"] = {{BBox(30, 30, 40, 40), 0.8, 0}, {BBox(0, 0, 10, 10), 0.9, 0}};
  EvalConfig cfg;
  cfg.max_dets_per_image = 1;
  EvalReport rep = evaluate(dets, gts, cfg);
  CHECK(rep.num_detections == 1);
  // Only the 0.9 box survives: recall tops out at 1/2, precision 1 up there.
  CHECK(rep.map == doctest::Approx(51.0 / 101.0).epsilon(1e-12));
}

TEST_CASE("evaluate matches the exhaustive reference on random micro-instances") {
  Rng rng(2024);
  EvalConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    std::map<std::string, std::vector<ScoredBox>> dets;
    std::map<std::string, std::vector<GroundTruthBox>> gts;
    int images = 1 + rng.uniform_int(2);
    bool any_gt = false;
    for (int i = 0; i < images; ++i) {
      std::string id = "img" + std::to_string(i);
      dets[id] = random_dets(rng, 5, 2);
      gts[id] = random_gts(rng, 5, 2, trial % 2 == 0);
      for (const GroundTruthBox& g : gts[id]) any_gt = any_gt || !g.ignore;
    }
    if (!any_gt) continue;
    EvalReport rep = evaluate(dets, gts, cfg);
    refimpl::RefEval ref =
        refimpl::ref_evaluate(dets, gts, cfg.thresholds, cfg.max_dets_per_image);
    REQUIRE(rep.class_ids == ref.class_ids);
    CHECK(rep.map == ref.map);
    CHECK(rep.ap50 == ref.ap50);
    for (std::size_t c = 0; c < ref.class_ids.size(); ++c) {
      for (std::size_t t = 0; t < cfg.thresholds.size(); ++t) {
        CHECK(rep.ap[c][t] == ref.ap[c][t]);
      }
    }
  }
}

TEST_CASE("evaluate result does not depend on map insertion order") {
  std::map<std::string, std::vector<ScoredBox>> dets1, dets2;
  std::map<std::string, std::vector<GroundTruthBox>> gts1, gts2;
  // Tied scores across images exercise the pooling tie-break.
  dets1["a"] = {{BBox(0, 0, 10, 10), 0.5, 0}};
  dets1["b"] = {{BBox(0, 0, 10, 10), 0.5, 0}, {BBox(40, 40, 50, 50), 0.5, 0}};
  gts1["a"] = {{BBox(0, 0, 10, 10), 0, false}};
  gts1["b"] = {{BBox(0, 0, 10, 10), 0, false}};
  gts2["b"] = gts1["b"];
  gts2["a"] = gts1["a"];
  dets2["b"] = dets1["b"];
  dets2["a"] = dets1["a"];
  EvalReport r1 = evaluate(dets1, gts1);
  EvalReport r2 = evaluate(dets2, gts2);
  CHECK(r1.map == r2.map);
  CHECK(r1.ap50 == r2.ap50);
}

TEST_CASE("confusion matrix counts a correct detection on the diagonal") {
  std::vector<ScoredBox> dets = {{BBox(0, 0, 10, 10), 0.9, 0}};
  std::vector<GroundTruthBox> gts = {{BBox(0, 0, 10, 10), 0, false}};
  ConfusionMatrix cm = confusion_matrix(dets, gts, 2);
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(cm.background(), 0) == 0);
  CHECK(cm.at(0, cm.background()) == 0);
}

TEST_CASE("confusion matrix records cross-class confusions") {
  std::vector<ScoredBox> dets = {{BBox(0, 0, 10, 10), 0.9, 1}};
  std::vector<GroundTruthBox> gts = {{BBox(0, 0, 10, 10), 0, false}};
  ConfusionMatrix cm = confusion_matrix(dets, gts, 2);
  CHECK(cm.at(1, 0) == 1);
}

TEST_CASE("confusion matrix sends unmatched boxes to the background row and column") {
  std::vector<ScoredBox> dets = {{BBox(50, 50, 60, 60), 0.9, 1}};
  std::vector<GroundTruthBox> gts = {{BBox(0, 0, 10, 10), 0, false}};
  ConfusionMatrix cm = confusion_matrix(dets, gts, 2);
  CHECK(cm.at(1, cm.background()) == 1);   // spurious detection
  CHECK(cm.at(cm.background(), 0) == 1);   // missed GT
}

TEST_CASE("confusion matrix drops detections below the confidence threshold") {
  std::vector<ScoredBox> dets = {{BBox(0, 0, 10, 10), 0.2, 0}};
  std::vector<GroundTruthBox> gts = {{BBox(0, 0, 10, 10), 0, false}};
  ConfusionMatrix cm = confusion_matrix(dets, gts, 2);
  CHECK(cm.at(0, 0) == 0);
  CHECK(cm.at(cm.background(), 0) == 1);
}

TEST_CASE("confusion matrix ignores detections absorbed by ignore regions") {
  std::vector<ScoredBox> dets = {{BBox(0, 0, 10, 10), 0.9, 0}};
  std::vector<GroundTruthBox> gts = {{BBox(0, 0, 10, 10), 0, true}};
  ConfusionMatrix cm = confusion_matrix(dets, gts, 2);
  for (long long c : cm.counts) CHECK(c == 0);
}

TEST_CASE("confusion matrix pairs greedily by IoU across classes") {
  // The class-1 detection overlaps the class-0 GT more than the class-0
  // detection does, so it wins the pairing and both mistakes are recorded.
  std::vector<ScoredBox> dets = {
      {BBox(0, 0, 10, 10), 0.9, 1},
      {BBox(0, 3, 10, 13), 0.9, 0},
  };
  std::vector<GroundTruthBox> gts = {{BBox(0, 0, 10, 10), 0, false}};
  ConfusionMatrix cm = confusion_matrix(dets, gts, 2);
  CHECK(cm.at(1, 0) == 1);
  CHECK(cm.at(0, cm.background()) == 1);
}

TEST_CASE("confusion matrix marginals reconcile with the inputs") {
  Rng rng(1234);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ScoredBox> dets = random_dets(rng, 10, 3);
    std::vector<GroundTruthBox> gts = random_gts(rng, 10, 3, false);
    ConfusionMatrix cm = confusion_matrix(dets, gts, 3);
    std::vector<long long> gt_per_class(3, 0);
    for (const GroundTruthBox& g : gts) ++gt_per_class[g.class_id];
    std::vector<long long> det_per_class(3, 0);
    for (const ScoredBox& d : dets) {
      if (d.score >= 0.25) ++det_per_class[d.class_id];
    }
    for (int c = 0; c < 3; ++c) {
      long long col = 0, row = 0;
      for (int p = 0; p <= 3; ++p) col += cm.at(p, c);
      for (int t = 0; t <= 3; ++t) row += cm.at(c, t);
      CHECK(col == gt_per_class[c]);
      CHECK(row == det_per_class[c]);
    }
  }
}

TEST_CASE("confusion matrices merge by summing counts") {
  std::vector<GroundTruthBox> gts = {{BBox(0, 0, 10, 10), 0, false}};
  std::vector<ScoredBox> dets = {{BBox(0, 0, 10, 10), 0.9, 0}};
  ConfusionMatrix a = confusion_matrix(dets, gts, 2);
  ConfusionMatrix b = confusion_matrix(dets, gts, 2);
  a.merge(b);
  CHECK(a.at(0, 0) == 2);
  ConfusionMatrix c(3);
  CHECK_THROWS_AS(a.merge(c), std::invalid_argument);
}

TEST_CASE("per-image confusion matrices sum to the dataset matrix") {
  Rng rng(77);
  std::map<std::string, std::vector<ScoredBox>> dets;
  std::map<std::string, std::vector<GroundTruthBox>> gts;
  ConfusionMatrix expected(3);
  for (int i = 0; i < 5; ++i) {
    std::string id = "img" + std::to_string(i);
    dets[id] = random_dets(rng, 8, 3);
    gts[id] = random_gts(rng, 8, 3, true);
    expected.merge(confusion_matrix(dets[id], gts[id], 3));
  }
  ConfusionMatrix whole = confusion_matrix(dets, gts, 3);
  CHECK(whole.counts == expected.counts);
}

TEST_CASE("confusion matrix validates classes and dimensions") {
  CHECK_THROWS_AS(ConfusionMatrix(0), std::invalid_argument);
  std::vector<ScoredBox> dets = {{BBox(0, 0, 1, 1), 0.9, 5}};
  CHECK_THROWS_AS(confusion_matrix(dets, {}, 2), std::invalid_argument);
}
