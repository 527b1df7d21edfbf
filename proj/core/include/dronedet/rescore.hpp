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

#include <cstdint>
#include <string>
#include <vector>

#include "dronedet/augmentation.hpp"
#include "dronedet/geometry.hpp"
#include "dronedet/image.hpp"

namespace dronedet {

inline constexpr int kPatchSize = 64;

struct Patch {
  Image image;  // kPatchSize x kPatchSize x 3
  int class_id = 0;
};

enum class ScoreCombine { Keep, Multiply };

struct RescorePolicy {
  bool replace_label = true;
  double min_classifier_conf = 0.5;
  ScoreCombine score_combine = ScoreCombine::Keep;

  void validate() const;
};

/// Clips the box to the image, then bilinearly resamples the crop to
/// kPatchSize squared. Boxes that clip to zero area are rejected.
Patch crop_resize_patch(const Image& image, const BBox& box, int class_id = 0);

/// One patch per non-ignored label, class id preserved.
std::vector<Patch> build_patch_dataset(const std::vector<Sample>& samples);

struct ClassifierTrainConfig {
  int epochs = 80;
  double lr = 0.5;
  int hidden_dim = 128;  // 0 trains a single linear layer (convex case)
  std::uint64_t seed = 1;
};

/// Patch classifier: flattened 64x64x3 patch, one hidden ReLU layer, softmax
/// over the class ids seen at training time. Features are scaled to [0,1]
/// and centered by the training-set feature mean. Trained full-batch.
class PatchClassifier {
 public:
  static PatchClassifier train(const std::vector<Patch>& patches,
                               const ClassifierTrainConfig& cfg);

  /// Probability vector aligned with class_ids().
  std::vector<double> predict(const Patch& patch) const;

  /// (class id, top probability) of the argmax.
  std::pair<int, double> classify(const Patch& patch) const;

  const std::vector<int>& class_ids() const { return class_ids_; }
  int num_classes() const { return static_cast<int>(class_ids_.size()); }
  double final_train_accuracy() const { return train_accuracy_; }
  const std::vector<double>& epoch_losses() const { return epoch_losses_; }

  void save(const std::string& path) const;
  static PatchClassifier load(const std::string& path);

 private:
  std::vector<int> class_ids_;        // sorted
  std::vector<double> feature_mean_;  // [D]
  int hidden_dim_ = 0;
  std::vector<double> w1_, b1_;  // [hidden, D], [hidden]
  std::vector<double> w2_, b2_;  // [K, hidden] (or [K, D] when hidden = 0), [K]
  double train_accuracy_ = 0.0;
  std::vector<double> epoch_losses_;

  std::vector<double> logits(const std::vector<double>& features) const;
};

PatchClassifier train_tiny_classifier(const std::vector<Patch>& patches, int epochs,
                                      double lr, int hidden_dim = 128,
                                      std::uint64_t seed = 1);

/// Re-labels (and optionally re-scores) detections with the classifier.
/// Boxes and detection count never change; detections whose box clips to
/// zero area pass through untouched.
std::vector<ScoredBox> rescore_detections(const std::vector<ScoredBox>& dets,
                                          const Image& image,
                                          const PatchClassifier& clf,
                                          const RescorePolicy& policy);

}  // namespace dronedet
