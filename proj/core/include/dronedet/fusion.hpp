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

#include "dronedet/geometry.hpp"

namespace dronedet {

enum class SoftNmsMode { Linear, Gaussian };

struct FusionConfig {
  double iou_threshold = 0.5;  // in (0,1)
  // Discard floor. Soft-NMS drops boxes whose decayed score falls below it;
  // WBF skips input boxes below it. Plain NMS ignores it.
  double score_threshold = 0.001;
  SoftNmsMode softnms_mode = SoftNmsMode::Gaussian;
  double softnms_sigma = 0.5;
  // min(T,N)/T confidence rescale after WBF clustering. Off by default.
  bool wbf_conf_rescale = false;
  // When set, fusion ignores class ids; otherwise boxes only ever interact
  // with boxes of the same class.
  bool class_agnostic = false;

  void validate() const;  // throws std::invalid_argument
};

/// One model's detections for a single image, with its ensemble weight.
struct ModelPrediction {
  std::string model_id;
  double weight = 1.0;  // > 0
  std::vector<ScoredBox> detections;
};

/// The 6-view multi-scale testing plan: 3 scales x {unflipped, flipped}.
struct TtaPlan {
  std::vector<ViewTransform> views;
};

/// Default absolute TTA scales: a 1.3x enlargement, then 0.83x and 0.67x of
/// that enlarged image, i.e. {1.3, 1.3*0.83, 1.3*0.67}.
std::vector<double> default_tta_scales();

/// Greedy hard NMS. Boxes are taken in descending score order (ties broken by
/// smaller input index); a remaining box is suppressed when its IoU with an
/// already kept box of the same class (any class when class_agnostic) is
/// strictly above iou_threshold. Scores are never altered; the output is a
/// subset of the input sorted by descending score.
std::vector<ScoredBox> nms(const std::vector<ScoredBox>& dets, const FusionConfig& cfg);

/// Soft-NMS. Iteratively selects the current max-score box, then decays the
/// scores of its remaining neighbours: linear mode multiplies by (1 - iou)
/// when iou > iou_threshold; gaussian mode multiplies by exp(-iou^2 / sigma)
/// for every neighbour. Boxes are only removed when their score drops below
/// score_threshold. Output is in selection order with the decayed scores.
std::vector<ScoredBox> soft_nms(const std::vector<ScoredBox>& dets, const FusionConfig& cfg);

/// Weighted boxes fusion. All detections are pooled with score * model
/// weight and processed in descending weighted score. Each box joins the
/// first existing cluster (creation order) of the same class whose current
/// fused box has IoU > iou_threshold, else it starts a new cluster. A
/// cluster's fused coordinates are the confidence-weighted mean of its
/// members; its confidence is the mean member confidence, optionally
/// rescaled by min(T,N)/T and clamped to [0,1].
std::vector<ScoredBox> wbf(const std::vector<ModelPrediction>& preds, const FusionConfig& cfg);

/// The 6-view plan over `scales` (default default_tta_scales()), each scale
/// paired with hflip in {false, true}, scales in the given order.
TtaPlan tta_views(ImageSize size);
TtaPlan tta_views(ImageSize size, const std::vector<double>& scales);

/// Fuses per-view detections: maps every list back to the original frame,
/// concatenates, clips to the source image, and applies NMS. All views must
/// share the same source size.
std::vector<ScoredBox> tta_fuse(
    const std::vector<std::pair<ViewTransform, std::vector<ScoredBox>>>& per_view,
    const FusionConfig& cfg);

/// Cross-model fusion of already tta-fused predictions; delegates to WBF.
std::vector<ScoredBox> ensemble_fuse(const std::vector<ModelPrediction>& models,
                                     const FusionConfig& cfg);

/// Per-category training weights from label counts: w_c = (N_max / N_c)^exponent,
/// zero-count classes take the largest computed weight, and the result is
/// normalized to mean 1. More labels => lower weight.
std::vector<double> class_weights(const std::vector<long long>& label_counts,
                                  double exponent = 0.5);

}  // namespace dronedet
