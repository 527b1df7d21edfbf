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

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dronedet/fusion.hpp"
#include "dronedet/rng.hpp"
#include "reference.hpp"

using namespace dronedet;

namespace {

std::vector<ScoredBox> random_dets(Rng& rng, int max_boxes, int num_classes) {
  int n = rng.uniform_int(max_boxes + 1);
  std::vector<ScoredBox> dets;
  dets.reserve(n);
  for (int i = 0; i < n; ++i) {
    double x = rng.uniform(0.0, 80.0);
    double y = rng.uniform(0.0, 80.0);
    double w = rng.uniform(1.0, 40.0);
    double h = rng.uniform(1.0, 40.0);
    dets.push_back({BBox(x, y, x + w, y + h), rng.uniform(), rng.uniform_int(num_classes)});
  }
  return dets;
}

bool same_box(const ScoredBox& a, const ScoredBox& b) {
  return a.box.x1 == b.box.x1 && a.box.y1 == b.box.y1 && a.box.x2 == b.box.x2 &&
         a.box.y2 == b.box.y2 && a.score == b.score && a.class_id == b.class_id;
}

}  // namespace

TEST_CASE("nms keeps only the best of two identical boxes") {
  std::vector<ScoredBox> dets = {
      {BBox(0, 0, 10, 10), 0.9, 0},
      {BBox(0, 0, 10, 10), 0.8, 0},
  };
  FusionConfig cfg;
  cfg.iou_threshold = 0.5;
  std::vector<ScoredBox> out = nms(dets, cfg);
  REQUIRE(out.size() == 1);
  CHECK(out[0].score == 0.9);
}

TEST_CASE("nms keeps overlapping boxes of different classes") {
  std::vector<ScoredBox> dets = {
      {BBox(0, 0, 10, 10), 0.9, 0},
      {BBox(0, 0, 10, 10), 0.8, 1},
  };
  FusionConfig cfg;
  CHECK(nms(dets, cfg).size() == 2);
  cfg.class_agnostic = true;
  CHECK(nms(dets, cfg).size() == 1);
}

TEST_CASE("nms suppression is strict: iou exactly at threshold survives") {
  // Boxes (0,0,10,10) and (0,5,10,15) have IoU 50/150 = 1/3.
  std::vector<ScoredBox> dets = {
      {BBox(0, 0, 10, 10), 0.9, 0},
      {BBox(0, 5, 10, 15), 0.8, 0},
  };
  FusionConfig cfg;
  cfg.iou_threshold = 1.0 / 3.0;
  CHECK(nms(dets, cfg).size() == 2);
  cfg.iou_threshold = 0.33;
  CHECK(nms(dets, cfg).size() == 1);
}

TEST_CASE("nms equal scores break ties toward the earlier input box") {
  std::vector<ScoredBox> dets = {
      {BBox(0, 0, 10, 10), 0.8, 0},
      {BBox(1, 0, 11, 10), 0.8, 0},
  };
  FusionConfig cfg;
  std::vector<ScoredBox> out = nms(dets, cfg);
  REQUIRE(out.size() == 1);
  CHECK(out[0].box.x1 == 0.0);
}

TEST_CASE("nms matches the quadratic reference and is idempotent") {
  Rng rng(101);
  FusionConfig cfg;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<ScoredBox> dets = random_dets(rng, 20, 3);
    cfg.class_agnostic = (trial % 2 == 0);
    std::vector<ScoredBox> mine = nms(dets, cfg);
    std::vector<ScoredBox> ref = refimpl::ref_nms(dets, cfg.iou_threshold, cfg.class_agnostic);
    REQUIRE(mine.size() == ref.size());
    for (std::size_t i = 0; i < mine.size(); ++i) CHECK(same_box(mine[i], ref[i]));

    std::vector<ScoredBox> again = nms(mine, cfg);
    REQUIRE(again.size() == mine.size());
    for (std::size_t i = 0; i < mine.size(); ++i) CHECK(same_box(again[i], mine[i]));

    for (std::size_t i = 1; i < mine.size(); ++i) CHECK(mine[i - 1].score >= mine[i].score);
    for (const ScoredBox& kept : mine) {
      CHECK(std::any_of(dets.begin(), dets.end(),
                        [&](const ScoredBox& d) { return same_box(d, kept); }));
    }
  }
}

TEST_CASE("nms rejects scores outside the unit interval") {
  FusionConfig cfg;
  CHECK_THROWS_AS(nms({{BBox(0, 0, 1, 1), 1.5, 0}}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(nms({{BBox(0, 0, 1, 1), -0.1, 0}}, cfg), std::invalid_argument);
}

TEST_CASE("fusion config validation") {
  FusionConfig cfg;
  cfg.iou_threshold = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = FusionConfig{};
  cfg.softnms_sigma = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = FusionConfig{};
  cfg.score_threshold = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("soft-nms linear decay follows the closed form") {
  // IoU of (0,0,10,10) and (0,4,10,14) is 60/140 = 3/7 ~ 0.4286; with the
  // 0.3 threshold the second score becomes 0.8 * (1 - 3/7).
  std::vector<ScoredBox> dets = {
      {BBox(0, 0, 10, 10), 0.9, 0},
      {BBox(0, 4, 10, 14), 0.8, 0},
  };
  FusionConfig cfg;
  cfg.iou_threshold = 0.3;
  cfg.softnms_mode = SoftNmsMode::Linear;
  std::vector<ScoredBox> out = soft_nms(dets, cfg);
  REQUIRE(out.size() == 2);
  CHECK(out[0].score == 0.9);
  CHECK(std::abs(out[1].score - 0.8 * (1.0 - 3.0 / 7.0)) < 1e-12);
}

TEST_CASE("soft-nms linear with iou 0.6 rescores to 0.32") {
  // Boxes chosen so IoU is exactly 0.6: (0,0,10,10) vs (0,2.5,10,12.5)
  // overlap 75, union 125.
  std::vector<ScoredBox> dets = {
      {BBox(0, 0, 10, 10), 0.9, 0},
      {BBox(0, 2.5, 10, 12.5), 0.8, 0},
  };
  FusionConfig cfg;
  cfg.iou_threshold = 0.5;
  cfg.softnms_mode = SoftNmsMode::Linear;
  std::vector<ScoredBox> out = soft_nms(dets, cfg);
  REQUIRE(out.size() == 2);
  CHECK(std::abs(out[1].score - 0.32) < 1e-12);
}

TEST_CASE("soft-nms gaussian decay applies at every overlap") {
  std::vector<ScoredBox> dets = {
      {BBox(0, 0, 10, 10), 0.9, 0},
      {BBox(0, 2.5, 10, 12.5), 0.8, 0},
  };
  FusionConfig cfg;
  cfg.softnms_mode = SoftNmsMode::Gaussian;
  cfg.softnms_sigma = 0.5;
  std::vector<ScoredBox> out = soft_nms(dets, cfg);
  REQUIRE(out.size() == 2);
  CHECK(std::abs(out[1].score - 0.8 * std::exp(-0.72)) < 1e-12);
}

TEST_CASE("soft-nms linear leaves sub-threshold overlaps alone") {
  std::vector<ScoredBox> dets = {
      {BBox(0, 0, 10, 10), 0.9, 0},
      {BBox(50, 50, 60, 60), 0.8, 0},
  };
  FusionConfig cfg;
  cfg.softnms_mode = SoftNmsMode::Linear;
  std::vector<ScoredBox> out = soft_nms(dets, cfg);
  REQUIRE(out.size() == 2);
  CHECK(out[1].score == 0.8);
}

TEST_CASE("soft-nms with zero score threshold returns every box") {
  Rng rng(7);
  FusionConfig cfg;
  cfg.score_threshold = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ScoredBox> dets = random_dets(rng, 12, 2);
    cfg.softnms_mode = (trial % 2 == 0) ? SoftNmsMode::Linear : SoftNmsMode::Gaussian;
    CHECK(soft_nms(dets, cfg).size() == dets.size());
  }
}

TEST_CASE("soft-nms matches the quadratic reference") {
  Rng rng(55);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ScoredBox> dets = random_dets(rng, 12, 2);
    FusionConfig cfg;
    cfg.softnms_mode = (trial % 2 == 0) ? SoftNmsMode::Linear : SoftNmsMode::Gaussian;
    cfg.score_threshold = 0.1;
    refimpl::RefSoftNmsParams params;
    params.iou_thr = cfg.iou_threshold;
    params.sigma = cfg.softnms_sigma;
    params.score_thr = cfg.score_threshold;
    params.gaussian = cfg.softnms_mode == SoftNmsMode::Gaussian;
    std::vector<ScoredBox> mine = soft_nms(dets, cfg);
    std::vector<ScoredBox> ref = refimpl::ref_soft_nms(dets, params);
    REQUIRE(mine.size() == ref.size());
    for (std::size_t i = 0; i < mine.size(); ++i) {
      CHECK(mine[i].class_id == ref[i].class_id);
      CHECK(std::abs(mine[i].score - ref[i].score) < 1e-12);
      CHECK(mine[i].box.x1 == ref[i].box.x1);
    }
  }
}

TEST_CASE("wbf fuses two boxes into the confidence-weighted mean") {
  ModelPrediction pred;
  pred.detections = {
      {BBox(0, 0, 10, 10), 0.9, 0},
      {BBox(2, 2, 12, 12), 0.6, 0},
  };
  FusionConfig cfg;
  cfg.iou_threshold = 0.4;
  std::vector<ScoredBox> out = wbf({pred}, cfg);
  REQUIRE(out.size() == 1);
  CHECK(std::abs(out[0].box.x1 - 0.8) < 1e-12);
  CHECK(std::abs(out[0].box.y1 - 0.8) < 1e-12);
  CHECK(std::abs(out[0].box.x2 - 10.8) < 1e-12);
  CHECK(std::abs(out[0].box.y2 - 10.8) < 1e-12);
  CHECK(std::abs(out[0].score - 0.75) < 1e-12);
}

TEST_CASE("wbf keeps separate clusters for disjoint boxes and classes") {
  ModelPrediction pred;
  pred.detections = {
      {BBox(0, 0, 10, 10), 0.9, 0},
      {BBox(0, 0, 10, 10), 0.8, 1},
      {BBox(50, 50, 60, 60), 0.7, 0},
  };
  FusionConfig cfg;
  CHECK(wbf({pred}, cfg).size() == 3);
  cfg.class_agnostic = true;
  CHECK(wbf({pred}, cfg).size() == 2);
}

TEST_CASE("wbf fused coordinates stay inside the member envelope") {
  Rng rng(303);
  FusionConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ModelPrediction> preds(1 + rng.uniform_int(3));
    double lo = 1e9, hi = -1e9;
    bool any = false;
    for (ModelPrediction& p : preds) {
      p.weight = 1.0;
      p.detections = random_dets(rng, 6, 2);
      for (const ScoredBox& d : p.detections) {
        lo = std::min(lo, d.box.x1);
        hi = std::max(hi, d.box.x2);
        any = true;
      }
    }
    std::vector<ScoredBox> out = wbf(preds, cfg);
    if (!any) CHECK(out.empty());
    for (const ScoredBox& f : out) {
      CHECK(f.box.x1 >= lo - 1e-9);
      CHECK(f.box.x2 <= hi + 1e-9);
      CHECK(f.score <= 1.0);
      CHECK(f.score >= 0.0);
    }
    for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i - 1].score >= out[i].score);
  }
}

TEST_CASE("wbf matches the brute-force reference") {
  Rng rng(404);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ModelPrediction> preds(1 + rng.uniform_int(3));
    for (ModelPrediction& p : preds) {
      p.weight = 0.5 + rng.uniform();
      p.detections = random_dets(rng, 6, 2);
    }
    FusionConfig cfg;
    cfg.wbf_conf_rescale = (trial % 3 == 0);
    std::vector<ScoredBox> mine = wbf(preds, cfg);
    std::vector<ScoredBox> ref = refimpl::ref_wbf(preds, cfg.iou_threshold, cfg.score_threshold,
                                                  cfg.class_agnostic, cfg.wbf_conf_rescale);
    REQUIRE(mine.size() == ref.size());
    for (std::size_t i = 0; i < mine.size(); ++i) {
      CHECK(mine[i].class_id == ref[i].class_id);
      CHECK(std::abs(mine[i].score - ref[i].score) < 1e-9);
      CHECK(std::abs(mine[i].box.x1 - ref[i].box.x1) < 1e-9);
      CHECK(std::abs(mine[i].box.y1 - ref[i].box.y1) < 1e-9);
      CHECK(std::abs(mine[i].box.x2 - ref[i].box.x2) < 1e-9);
      CHECK(std::abs(mine[i].box.y2 - ref[i].box.y2) < 1e-9);
    }
  }
}

TEST_CASE("wbf confidence rescale multiplies by min(T,N)/T") {
  ModelPrediction a, b, c;
  a.detections = {{BBox(0, 0, 10, 10), 0.9, 0}};
  b.detections = {{BBox(0, 0, 10, 10), 0.6, 0}};
  c.detections = {};
  FusionConfig cfg;
  std::vector<ScoredBox> plain = wbf({a, b, c}, cfg);
  cfg.wbf_conf_rescale = true;
  std::vector<ScoredBox> rescaled = wbf({a, b, c}, cfg);
  REQUIRE(plain.size() == 1);
  REQUIRE(rescaled.size() == 1);
  CHECK(std::abs(rescaled[0].score - plain[0].score * 2.0 / 3.0) < 1e-12);
}

TEST_CASE("wbf rejects non-positive model weights") {
  ModelPrediction p;
  p.weight = 0.0;
  p.detections = {{BBox(0, 0, 1, 1), 0.5, 0}};
  FusionConfig cfg;
  CHECK_THROWS_AS(wbf({p}, cfg), std::invalid_argument);
}

TEST_CASE("wbf drops detections below the score threshold") {
  ModelPrediction p;
  p.detections = {
      {BBox(0, 0, 10, 10), 0.9, 0},
      {BBox(0, 0, 10, 10), 0.05, 0},
  };
  FusionConfig cfg;
  cfg.score_threshold = 0.1;
  std::vector<ScoredBox> out = wbf({p}, cfg);
  REQUIRE(out.size() == 1);
  CHECK(out[0].score == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("tta plan emits six views, scales descending, both flips per scale") {
  TtaPlan plan = tta_views(ImageSize(640, 480));
  REQUIRE(plan.views.size() == 6);
  CHECK(plan.views[0].scale == 1.3);
  CHECK(plan.views[2].scale == 1.3 * 0.83);
  CHECK(plan.views[4].scale == 1.3 * 0.67);
  for (int i = 0; i < 6; i += 2) {
    CHECK_FALSE(plan.views[i].hflip);
    CHECK(plan.views[i + 1].hflip);
    CHECK(plan.views[i].scale == plan.views[i + 1].scale);
    CHECK(plan.views[i].source.width == 640);
    CHECK(plan.views[i].source.height == 480);
  }
}

TEST_CASE("tta plan accepts custom scales and rejects empty ones") {
  TtaPlan plan = tta_views(ImageSize(100, 100), {2.0});
  CHECK(plan.views.size() == 2);
  CHECK_THROWS_AS(tta_views(ImageSize(100, 100), {}), std::invalid_argument);
}

TEST_CASE("tta fuse maps view detections back and deduplicates") {
  ImageSize src(640, 480);
  std::vector<ScoredBox> truth = {
      {BBox(100, 100, 180, 160), 0.9, 0},
      {BBox(400, 300, 470, 380), 0.8, 1},
  };
  TtaPlan plan = tta_views(src);
  std::vector<std::pair<ViewTransform, std::vector<ScoredBox>>> per_view;
  for (const ViewTransform& v : plan.views) {
    per_view.emplace_back(v, transform_boxes(truth, v, TransformDirection::Forward));
  }
  FusionConfig cfg;
  std::vector<ScoredBox> fused = tta_fuse(per_view, cfg);
  std::vector<ScoredBox> single = nms(truth, cfg);
  REQUIRE(fused.size() == single.size());
  for (std::size_t i = 0; i < fused.size(); ++i) {
    CHECK(fused[i].class_id == single[i].class_id);
    CHECK(fused[i].score == single[i].score);
    CHECK(std::abs(fused[i].box.x1 - single[i].box.x1) < 1e-6);
    CHECK(std::abs(fused[i].box.y1 - single[i].box.y1) < 1e-6);
    CHECK(std::abs(fused[i].box.x2 - single[i].box.x2) < 1e-6);
    CHECK(std::abs(fused[i].box.y2 - single[i].box.y2) < 1e-6);
  }
}

TEST_CASE("tta fuse clips to the source frame and validates sources") {
  ImageSize src(100, 100);
  ViewTransform identity(1.0, false, src);
  std::vector<std::pair<ViewTransform, std::vector<ScoredBox>>> per_view = {
      {identity, {{BBox(-10, -10, 50, 50), 0.9, 0}}},
  };
  FusionConfig cfg;
  std::vector<ScoredBox> out = tta_fuse(per_view, cfg);
  REQUIRE(out.size() == 1);
  CHECK(out[0].box.x1 == 0.0);
  CHECK(out[0].box.y1 == 0.0);

  per_view.emplace_back(ViewTransform(1.0, false, ImageSize(64, 64)),
                        std::vector<ScoredBox>{});
  CHECK_THROWS_AS(tta_fuse(per_view, cfg), std::invalid_argument);
  CHECK(tta_fuse({}, cfg).empty());
}

TEST_CASE("ensemble fuse of a single model is wbf") {
  ModelPrediction p;
  p.detections = {
      {BBox(0, 0, 10, 10), 0.9, 0},
      {BBox(2, 2, 12, 12), 0.6, 0},
  };
  FusionConfig cfg;
  cfg.iou_threshold = 0.4;
  std::vector<ScoredBox> a = ensemble_fuse({p}, cfg);
  std::vector<ScoredBox> b = wbf({p}, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(same_box(a[i], b[i]));
}

TEST_CASE("class weights follow the inverse-frequency power rule") {
  std::vector<double> w = class_weights({400, 100}, 0.5);
  REQUIRE(w.size() == 2);
  CHECK(std::abs(w[0] - 2.0 / 3.0) < 1e-12);
  CHECK(std::abs(w[1] - 4.0 / 3.0) < 1e-12);
}

TEST_CASE("class weights have unit mean and respect count order") {
  Rng rng(606);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<long long> counts(2 + rng.uniform_int(9));
    for (long long& c : counts) c = rng.uniform_int(1000);
    bool all_zero = true;
    for (long long c : counts) all_zero = all_zero && c == 0;
    if (all_zero) counts[0] = 1;
    std::vector<double> w = class_weights(counts, rng.uniform(0.0, 2.0));
    double mean = 0.0;
    for (double v : w) mean += v;
    mean /= static_cast<double>(w.size());
    CHECK(std::abs(mean - 1.0) < 1e-12);
    for (std::size_t i = 0; i < counts.size(); ++i) {
      for (std::size_t j = 0; j < counts.size(); ++j) {
        if (counts[i] > 0 && counts[j] > 0 && counts[i] < counts[j]) {
          CHECK(w[i] >= w[j] - 1e-12);
        }
      }
    }
  }
}

TEST_CASE("class weights give unseen classes the largest weight") {
  std::vector<double> w = class_weights({100, 0, 25}, 1.0);
  CHECK(w[1] == w[2]);
  CHECK(w[1] > w[0]);
}

TEST_CASE("class weights with exponent zero are uniform") {
  std::vector<double> w = class_weights({5, 50, 500}, 0.0);
  for (double v : w) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("class weights reject bad inputs") {
  CHECK_THROWS_AS(class_weights({0, 0}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(class_weights({-1, 5}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(class_weights({1, 5}, -0.5), std::invalid_argument);
}
