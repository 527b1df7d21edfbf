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

#include "dronedet/rescore.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "dronedet/archive.hpp"
#include "dronedet/rng.hpp"
#include "dronedet/tensor.hpp"

namespace dronedet {
namespace {

constexpr int kFeatureDim = kPatchSize * kPatchSize * 3;

std::vector<double> patch_features(const Patch& patch, const std::vector<double>& mean) {
  std::vector<double> f(kFeatureDim);
  const std::vector<double>& px = patch.image.data();
  for (int i = 0; i < kFeatureDim; ++i) f[i] = px[i] / 255.0 - mean[i];
  return f;
}

void softmax_rows(std::vector<double>& logits, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = logits.data() + i * cols;
    const double m = *std::max_element(row, row + cols);
    double denom = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - m);
      denom += row[j];
    }
    for (std::size_t j = 0; j < cols; ++j) row[j] /= denom;
  }
}

void check_patch(const Patch& patch, const char* what) {
  if (patch.image.height() != kPatchSize || patch.image.width() != kPatchSize ||
      patch.image.channels() != 3) {
    throw std::invalid_argument(std::string(what) + ": patch must be 64x64x3");
  }
}

}  // namespace

void RescorePolicy::validate() const {
  if (!(min_classifier_conf >= 0.0 && min_classifier_conf <= 1.0)) {
    throw std::invalid_argument("RescorePolicy: min_classifier_conf outside [0, 1]");
  }
}

Patch crop_resize_patch(const Image& image, const BBox& box, int class_id) {
  if (image.empty() || image.channels() != 3) {
    throw std::invalid_argument("crop_resize_patch: image must be H x W x 3");
  }
  BBox clipped = box;
  if (!clip_box(clipped, ImageSize(image.width(), image.height()))) {
    throw std::invalid_argument("crop_resize_patch: box clips to zero area");
  }
  Patch patch;
  patch.class_id = class_id;
  patch.image = Image(kPatchSize, kPatchSize, 3);
  const double sx = clipped.width() / kPatchSize;
  const double sy = clipped.height() / kPatchSize;
  for (int y = 0; y < kPatchSize; ++y) {
    const double srcy = clipped.y1 + (y + 0.5) * sy - 0.5;
    for (int x = 0; x < kPatchSize; ++x) {
      const double srcx = clipped.x1 + (x + 0.5) * sx - 0.5;
      for (int c = 0; c < 3; ++c) {
        patch.image.at(y, x, c) = image.sample_bilinear(srcx, srcy, c);
      }
    }
  }
  return patch;
}

std::vector<Patch> build_patch_dataset(const std::vector<Sample>& samples) {
  std::vector<Patch> patches;
  for (const Sample& s : samples) {
    for (const Label& lbl : s.labels) {
      if (lbl.ignore) continue;
      if (lbl.box.area() <= 0.0) continue;
      patches.push_back(crop_resize_patch(s.image, lbl.box, lbl.class_id));
    }
  }
  return patches;
}

PatchClassifier PatchClassifier::train(const std::vector<Patch>& patches,
                                       const ClassifierTrainConfig& cfg) {
  if (cfg.epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) {
    throw std::invalid_argument("train: lr must be finite and >= 0");
  }
  if (cfg.hidden_dim < 0) throw std::invalid_argument("train: hidden_dim must be >= 0");
  if (patches.empty()) throw std::invalid_argument("train: no patches");
  for (const Patch& p : patches) check_patch(p, "train");

  PatchClassifier clf;
  for (const Patch& p : patches) clf.class_ids_.push_back(p.class_id);
  std::sort(clf.class_ids_.begin(), clf.class_ids_.end());
  clf.class_ids_.erase(std::unique(clf.class_ids_.begin(), clf.class_ids_.end()),
                       clf.class_ids_.end());
  if (clf.class_ids_.size() < 2) {
    throw std::invalid_argument("train: at least 2 classes required");
  }
  const std::size_t n = patches.size();
  const std::size_t k = clf.class_ids_.size();
  const std::size_t d = kFeatureDim;
  const std::size_t hid = static_cast<std::size_t>(cfg.hidden_dim);

  clf.feature_mean_.assign(d, 0.0);
  for (const Patch& p : patches) {
    const std::vector<double>& px = p.image.data();
    for (std::size_t i = 0; i < d; ++i) clf.feature_mean_[i] += px[i] / 255.0;
  }
  for (double& m : clf.feature_mean_) m /= static_cast<double>(n);

  std::vector<double> x(n * d);
  std::vector<std::size_t> y(n);
  std::map<int, std::size_t> class_index;
  for (std::size_t c = 0; c < k; ++c) class_index[clf.class_ids_[c]] = c;
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> f = patch_features(patches[i], clf.feature_mean_);
    std::copy(f.begin(), f.end(), x.begin() + static_cast<std::ptrdiff_t>(i * d));
    y[i] = class_index.at(patches[i].class_id);
  }

  Rng rng(cfg.seed);
  clf.hidden_dim_ = cfg.hidden_dim;
  const double init1 = 1.0 / std::sqrt(static_cast<double>(d));
  if (hid > 0) {
    clf.w1_.resize(hid * d);
    clf.b1_.assign(hid, 0.0);
    clf.w2_.resize(k * hid);
    clf.b2_.assign(k, 0.0);
    for (double& v : clf.w1_) v = init1 * rng.normal();
    const double init2 = 1.0 / std::sqrt(static_cast<double>(hid));
    for (double& v : clf.w2_) v = init2 * rng.normal();
  } else {
    clf.w2_.resize(k * d);
    clf.b2_.assign(k, 0.0);
    for (double& v : clf.w2_) v = init1 * rng.normal();
  }

  std::vector<double> z1, h1, dz1, probs(n * k), dlogits(n * k);
  std::vector<double> dw1, db1, dw2(clf.w2_.size()), db2(k);
  if (hid > 0) {
    z1.resize(n * hid);
    h1.resize(n * hid);
    dz1.resize(n * hid);
    dw1.resize(hid * d);
    db1.resize(hid);
  }

  auto forward = [&](std::vector<double>& out_logits) {
    if (hid > 0) {
      matmul_bt(x.data(), clf.w1_.data(), z1.data(), n, d, hid);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t q = 0; q < hid; ++q) {
          const double v = z1[i * hid + q] + clf.b1_[q];
          z1[i * hid + q] = v;
          h1[i * hid + q] = v > 0.0 ? v : 0.0;
        }
      }
      matmul_bt(h1.data(), clf.w2_.data(), out_logits.data(), n, hid, k);
    } else {
      matmul_bt(x.data(), clf.w2_.data(), out_logits.data(), n, d, k);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) out_logits[i * k + j] += clf.b2_[j];
    }
  };

  clf.epoch_losses_.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    forward(probs);
    softmax_rows(probs, n, k);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      loss -= std::log(std::max(probs[i * k + y[i]], 1e-300));
    }
    clf.epoch_losses_.push_back(loss / static_cast<double>(n));

    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        dlogits[i * k + j] =
            (probs[i * k + j] - (y[i] == j ? 1.0 : 0.0)) / static_cast<double>(n);
      }
    }
    std::fill(db2.begin(), db2.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) db2[j] += dlogits[i * k + j];
    }
    if (hid > 0) {
      matmul_at(dlogits.data(), h1.data(), dw2.data(), k, n, hid);
      matmul(dlogits.data(), clf.w2_.data(), dz1.data(), n, k, hid);
      for (std::size_t i = 0; i < n * hid; ++i) {
        if (z1[i] <= 0.0) dz1[i] = 0.0;
      }
      std::fill(db1.begin(), db1.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t q = 0; q < hid; ++q) db1[q] += dz1[i * hid + q];
      }
      matmul_at(dz1.data(), x.data(), dw1.data(), hid, n, d);
      for (std::size_t i = 0; i < clf.w1_.size(); ++i) clf.w1_[i] -= cfg.lr * dw1[i];
      for (std::size_t i = 0; i < hid; ++i) clf.b1_[i] -= cfg.lr * db1[i];
    } else {
      matmul_at(dlogits.data(), x.data(), dw2.data(), k, n, d);
    }
    for (std::size_t i = 0; i < clf.w2_.size(); ++i) clf.w2_[i] -= cfg.lr * dw2[i];
    for (std::size_t i = 0; i < k; ++i) clf.b2_[i] -= cfg.lr * db2[i];
  }

  forward(probs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = probs.data() + i * k;
    const std::size_t arg =
        static_cast<std::size_t>(std::max_element(row, row + k) - row);
    if (arg == y[i]) ++correct;
  }
  clf.train_accuracy_ = static_cast<double>(correct) / static_cast<double>(n);
  return clf;
}

std::vector<double> PatchClassifier::logits(const std::vector<double>& features) const {
  const std::size_t k = class_ids_.size();
  const std::size_t d = features.size();
  std::vector<double> out(k);
  if (hidden_dim_ > 0) {
    const std::size_t hid = static_cast<std::size_t>(hidden_dim_);
    std::vector<double> h(hid);
    for (std::size_t q = 0; q < hid; ++q) {
      double s = 0.0;
      const double* row = w1_.data() + q * d;
      for (std::size_t i = 0; i < d; ++i) s += row[i] * features[i];
      s += b1_[q];
      h[q] = s > 0.0 ? s : 0.0;
    }
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      const double* row = w2_.data() + j * hid;
      for (std::size_t q = 0; q < hid; ++q) s += row[q] * h[q];
      out[j] = s + b2_[j];
    }
  } else {
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      const double* row = w2_.data() + j * d;
      for (std::size_t i = 0; i < d; ++i) s += row[i] * features[i];
      out[j] = s + b2_[j];
    }
  }
  return out;
}

std::vector<double> PatchClassifier::predict(const Patch& patch) const {
  check_patch(patch, "predict");
  if (class_ids_.empty()) throw std::runtime_error("predict: classifier is untrained");
  std::vector<double> out = logits(patch_features(patch, feature_mean_));
  softmax_rows(out, 1, out.size());
  return out;
}

std::pair<int, double> PatchClassifier::classify(const Patch& patch) const {
  const std::vector<double> probs = predict(patch);
  const std::size_t arg = static_cast<std::size_t>(
      std::max_element(probs.begin(), probs.end()) - probs.begin());
  return {class_ids_[arg], probs[arg]};
}

void PatchClassifier::save(const std::string& path) const {
  if (class_ids_.empty()) throw std::runtime_error("save: classifier is untrained");
  Archive ar;
  std::vector<double> ids(class_ids_.begin(), class_ids_.end());
  ar.put("classes", Tensor::from_data({ids.size()}, ids));
  ar.put("feature_mean", Tensor::from_data({feature_mean_.size()}, feature_mean_));
  ar.put("hidden_dim", Tensor::from_data({1}, {static_cast<double>(hidden_dim_)}));
  ar.put("train_accuracy", Tensor::from_data({1}, {train_accuracy_}));
  const std::size_t k = class_ids_.size();
  if (hidden_dim_ > 0) {
    const std::size_t hid = static_cast<std::size_t>(hidden_dim_);
    ar.put("w1", Tensor::from_data({hid, static_cast<std::size_t>(kFeatureDim)}, w1_));
    ar.put("b1", Tensor::from_data({hid}, b1_));
    ar.put("w2", Tensor::from_data({k, hid}, w2_));
  } else {
    ar.put("w2", Tensor::from_data({k, static_cast<std::size_t>(kFeatureDim)}, w2_));
  }
  ar.put("b2", Tensor::from_data({k}, b2_));
  ar.save(path);
}

PatchClassifier PatchClassifier::load(const std::string& path) {
  const Archive ar = Archive::load(path);
  PatchClassifier clf;
  for (double v : ar.get("classes").data()) clf.class_ids_.push_back(static_cast<int>(v));
  clf.feature_mean_ = ar.get("feature_mean").data();
  if (clf.feature_mean_.size() != static_cast<std::size_t>(kFeatureDim)) {
    throw std::runtime_error("load: unexpected feature dimension");
  }
  clf.hidden_dim_ = static_cast<int>(ar.get("hidden_dim")[0]);
  clf.train_accuracy_ = ar.get("train_accuracy")[0];
  if (clf.hidden_dim_ > 0) {
    clf.w1_ = ar.get("w1").data();
    clf.b1_ = ar.get("b1").data();
  }
  clf.w2_ = ar.get("w2").data();
  clf.b2_ = ar.get("b2").data();
  const std::size_t k = clf.class_ids_.size();
  const std::size_t hid = static_cast<std::size_t>(std::max(clf.hidden_dim_, 0));
  const std::size_t expect_w2 = hid > 0 ? k * hid : k * kFeatureDim;
  if (k < 2 || clf.w2_.size() != expect_w2 || clf.b2_.size() != k ||
      (hid > 0 && (clf.w1_.size() != hid * kFeatureDim || clf.b1_.size() != hid))) {
    throw std::runtime_error("load: inconsistent classifier archive");
  }
  return clf;
}

PatchClassifier train_tiny_classifier(const std::vector<Patch>& patches, int epochs,
                                      double lr, int hidden_dim, std::uint64_t seed) {
  ClassifierTrainConfig cfg;
  cfg.epochs = epochs;
  cfg.lr = lr;
  cfg.hidden_dim = hidden_dim;
  cfg.seed = seed;
  return PatchClassifier::train(patches, cfg);
}

std::vector<ScoredBox> rescore_detections(const std::vector<ScoredBox>& dets,
                                          const Image& image,
                                          const PatchClassifier& clf,
                                          const RescorePolicy& policy) {
  policy.validate();
  std::vector<ScoredBox> out;
  out.reserve(dets.size());
  for (const ScoredBox& det : dets) {
    ScoredBox updated = det;
    BBox clipped = det.box;
    if (clip_box(clipped, ImageSize(image.width(), image.height()))) {
      const Patch patch = crop_resize_patch(image, clipped);
      const auto [cls, prob] = clf.classify(patch);
      if (policy.replace_label && prob >= policy.min_classifier_conf) {
        updated.class_id = cls;
      }
      if (policy.score_combine == ScoreCombine::Multiply) {
        updated.score = det.score * prob;
      }
    }
    out.push_back(updated);
  }
  return out;
}

}  // namespace dronedet
