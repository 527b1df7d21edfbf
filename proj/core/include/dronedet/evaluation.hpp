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

struct GroundTruthBox {
  BBox box;
  int class_id = 0;
  // Ignored-region flag: these boxes never count as FN, and a detection whose
  // only qualifying overlap is with an ignored box is neither TP nor FP.
  bool ignore = false;
};

/// Outcome of one detection at one IoU threshold.
struct DetectionMatch {
  int det_index = -1;  // index into the input detection list
  int class_id = 0;
  double score = 0.0;
  bool tp = false;
  bool ignored = false;  // excluded from both TP and FP counts
  int gt_index = -1;     // matched GT, or -1
};

struct MatchResult {
  // One entry per detection, in descending score order (ties by input index).
  std::vector<DetectionMatch> detections;
  // Per GT: index of the matching detection, or -1. Always -1 for ignored GTs.
  std::vector<int> gt_match;
};

/// Greedy matching at a single IoU threshold: detections are visited in
/// descending score order and each takes the highest-IoU unmatched
/// non-ignored GT of its class with IoU >= iou_thr (ties by smaller GT
/// index). A detection whose only qualifying overlap is an ignored box is
/// flagged `ignored` instead of FP.
MatchResult match_detections(const std::vector<ScoredBox>& dets,
                             const std::vector<GroundTruthBox>& gts,
                             double iou_thr);

struct ScoredFlag {
  double score = 0.0;
  bool tp = false;
};

/// 101-point interpolated average precision for one class at one threshold.
/// `flags` holds every counted detection (ignored ones excluded) and is
/// stable-sorted by descending score before the PR sweep, so tie order is the
/// caller's order. Returns NaN when num_gt == 0 (undefined AP).
double average_precision(std::vector<ScoredFlag> flags, long long num_gt);

struct EvalConfig {
  std::vector<double> thresholds;   // defaults to 0.5:0.05:0.95
  int max_dets_per_image = 500;     // score cap applied before matching
  EvalConfig();
};

struct EvalReport {
  std::vector<double> thresholds;
  std::vector<int> class_ids;               // classes with >= 1 non-ignored GT
  std::vector<std::vector<double>> ap;      // ap[class][threshold]
  std::vector<double> ap50_per_class;       // AP at IoU 0.5, per class
  double map = 0.0;                         // mean over classes and thresholds
  double ap50 = 0.0;                        // mean over classes at IoU 0.5
  long long num_detections = 0;
  long long num_gt = 0;                     // non-ignored
};

/// COCO-style evaluation over the IoU threshold range. Classes without any
/// non-ignored GT are excluded from the means. Scores tie-break on
/// (image id, per-image rank) so the report is invariant to image order.
/// Throws std::runtime_error("empty evaluation set") when there are no images.
EvalReport evaluate(const std::map<std::string, std::vector<ScoredBox>>& dets_by_image,
                    const std::map<std::string, std::vector<GroundTruthBox>>& gts_by_image,
                    const EvalConfig& cfg = EvalConfig());

/// (K+1) x (K+1) counts; row = predicted class, column = true class, index K
/// is background (row K: missed GTs, column K: spurious detections).
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<long long> counts;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int k);

  int background() const { return num_classes; }
  long long& at(int pred, int tru) {
    return counts[static_cast<std::size_t>(pred) * (num_classes + 1) + tru];
  }
  long long at(int pred, int tru) const {
    return counts[static_cast<std::size_t>(pred) * (num_classes + 1) + tru];
  }
  void merge(const ConfusionMatrix& other);
};

/// Confusion matrix with class-agnostic greedy IoU matching: qualifying
/// (detection, GT) pairs are accepted in descending IoU order. Detections
/// below conf_thr are dropped first; ignored GTs neither match nor count.
ConfusionMatrix confusion_matrix(const std::vector<ScoredBox>& dets,
                                 const std::vector<GroundTruthBox>& gts,
                                 int num_classes,
                                 double iou_thr = 0.45,
                                 double conf_thr = 0.25);

ConfusionMatrix confusion_matrix(
    const std::map<std::string, std::vector<ScoredBox>>& dets_by_image,
    const std::map<std::string, std::vector<GroundTruthBox>>& gts_by_image,
    int num_classes,
    double iou_thr = 0.45,
    double conf_thr = 0.25);

}  // namespace dronedet
