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

#include "dronedet/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dronedet {

namespace {

void check_scores(const std::vector<ScoredBox>& dets, const char* op) {
  for (const ScoredBox& d : dets) {
    if (!(d.score >= 0.0 && d.score <= 1.0)) {
      throw std::invalid_argument(std::string(op) + ": score outside [0,1]");
    }
  }
}

// Indices of `dets` sorted by descending score, ties broken by smaller index.
std::vector<int> descending_score_order(const std::vector<ScoredBox>& dets) {
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dets[a].score > dets[b].score; });
  return order;
}

}  // namespace

void FusionConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw std::invalid_argument("FusionConfig: iou_threshold must be in (0,1)");
  }
  if (!(score_threshold >= 0.0 && score_threshold < 1.0)) {
    throw std::invalid_argument("FusionConfig: score_threshold must be in [0,1)");
  }
  if (!(softnms_sigma > 0.0)) {
    throw std::invalid_argument("FusionConfig: softnms_sigma must be > 0");
  }
}

std::vector<ScoredBox> nms(const std::vector<ScoredBox>& dets, const FusionConfig& cfg) {
  cfg.validate();
  check_scores(dets, "nms");
  std::vector<int> order = descending_score_order(dets);
  std::vector<ScoredBox> kept;
  kept.reserve(dets.size());
  for (int idx : order) {
    const ScoredBox& cand = dets[idx];
    bool suppressed = false;
    for (const ScoredBox& k : kept) {
      if (!cfg.class_agnostic && k.class_id != cand.class_id) continue;
      if (iou(k.box, cand.box) > cfg.iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

std::vector<ScoredBox> soft_nms(const std::vector<ScoredBox>& dets, const FusionConfig& cfg) {
  cfg.validate();
  check_scores(dets, "soft_nms");
  std::vector<ScoredBox> pool = dets;
  std::vector<bool> alive(pool.size(), true);
  std::vector<ScoredBox> out;
  out.reserve(pool.size());
  for (;;) {
    int best = -1;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!alive[i]) continue;
      if (best < 0 || pool[i].score > pool[best].score) best = static_cast<int>(i);
    }
    if (best < 0) break;
    alive[best] = false;
    out.push_back(pool[best]);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!alive[i]) continue;
      if (!cfg.class_agnostic && pool[i].class_id != pool[best].class_id) continue;
      double ov = iou(pool[best].box, pool[i].box);
      if (cfg.softnms_mode == SoftNmsMode::Linear) {
        if (ov > cfg.iou_threshold) pool[i].score *= (1.0 - ov);
      } else {
        pool[i].score *= std::exp(-(ov * ov) / cfg.softnms_sigma);
      }
      if (pool[i].score < cfg.score_threshold) alive[i] = false;
    }
  }
  return out;
}

std::vector<ScoredBox> wbf(const std::vector<ModelPrediction>& preds, const FusionConfig& cfg) {
  cfg.validate();
  struct Entry {
    BBox box;
    double score;  // raw score * model weight
    int class_id;
  };
  std::vector<Entry> pool;
  for (const ModelPrediction& p : preds) {
    if (!(p.weight > 0.0)) {
      throw std::invalid_argument("wbf: model weight must be > 0");
    }
    check_scores(p.detections, "wbf");
    for (const ScoredBox& d : p.detections) {
      if (d.score < cfg.score_threshold) continue;
      pool.push_back({d.box, d.score * p.weight, d.class_id});
    }
  }
  std::vector<int> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return pool[a].score > pool[b].score; });

  struct Cluster {
    BBox fused;       // running confidence-weighted mean of member coordinates
    double conf_sum = 0.0;
    double sx1 = 0.0, sy1 = 0.0, sx2 = 0.0, sy2 = 0.0;  // score-weighted coord sums
    int size = 0;
    int class_id = 0;
  };
  std::vector<Cluster> clusters;
  for (int idx : order) {
    const Entry& e = pool[idx];
    int target = -1;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (!cfg.class_agnostic && clusters[c].class_id != e.class_id) continue;
      if (iou(clusters[c].fused, e.box) > cfg.iou_threshold) {
        target = static_cast<int>(c);
        break;
      }
    }
    if (target < 0) {
      clusters.push_back({});
      target = static_cast<int>(clusters.size()) - 1;
      clusters[target].class_id = e.class_id;
    }
    Cluster& cl = clusters[target];
    cl.conf_sum += e.score;
    cl.sx1 += e.score * e.box.x1;
    cl.sy1 += e.score * e.box.y1;
    cl.sx2 += e.score * e.box.x2;
    cl.sy2 += e.score * e.box.y2;
    cl.size += 1;
    cl.fused = BBox(cl.sx1 / cl.conf_sum, cl.sy1 / cl.conf_sum,
                    cl.sx2 / cl.conf_sum, cl.sy2 / cl.conf_sum);
  }

  int num_models = static_cast<int>(preds.size());
  std::vector<ScoredBox> out;
  out.reserve(clusters.size());
  for (const Cluster& cl : clusters) {
    double conf = cl.conf_sum / cl.size;
    if (cfg.wbf_conf_rescale && num_models > 0) {
      conf *= static_cast<double>(std::min(num_models, cl.size)) / num_models;
    }
    out.push_back({cl.fused, std::min(conf, 1.0), cl.class_id});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ScoredBox& a, const ScoredBox& b) { return a.score > b.score; });
  return out;
}

std::vector<double> default_tta_scales() {
  return {1.3, 1.3 * 0.83, 1.3 * 0.67};
}

TtaPlan tta_views(ImageSize size) { return tta_views(size, default_tta_scales()); }

TtaPlan tta_views(ImageSize size, const std::vector<double>& scales) {
  if (size.width < 1 || size.height < 1) {
    throw std::invalid_argument("tta_views: invalid image size");
  }
  if (scales.empty()) {
    throw std::invalid_argument("tta_views: at least one scale required");
  }
  TtaPlan plan;
  plan.views.reserve(scales.size() * 2);
  for (double s : scales) {
    plan.views.emplace_back(s, false, size);
    plan.views.emplace_back(s, true, size);
  }
  return plan;
}

std::vector<ScoredBox> tta_fuse(
    const std::vector<std::pair<ViewTransform, std::vector<ScoredBox>>>& per_view,
    const FusionConfig& cfg) {
  if (per_view.empty()) return {};
  ImageSize src = per_view.front().first.source;
  std::vector<ScoredBox> merged;
  for (const auto& [view, dets] : per_view) {
    if (view.source.width != src.width || view.source.height != src.height) {
      throw std::invalid_argument("tta_fuse: mismatched source sizes across views");
    }
    std::vector<ScoredBox> mapped = transform_boxes(dets, view, TransformDirection::Inverse);
    merged.insert(merged.end(), mapped.begin(), mapped.end());
  }
  merged = clip_boxes(merged, src);
  return nms(merged, cfg);
}

std::vector<ScoredBox> ensemble_fuse(const std::vector<ModelPrediction>& models,
                                     const FusionConfig& cfg) {
  return wbf(models, cfg);
}

std::vector<double> class_weights(const std::vector<long long>& label_counts, double exponent) {
  if (!(exponent >= 0.0)) {
    throw std::invalid_argument("class_weights: exponent must be >= 0");
  }
  long long n_max = 0;
  for (long long c : label_counts) {
    if (c < 0) throw std::invalid_argument("class_weights: negative count");
    n_max = std::max(n_max, c);
  }
  if (n_max == 0) {
    throw std::invalid_argument("class_weights: all counts are zero");
  }
  std::vector<double> w(label_counts.size(), 0.0);
  double w_max = 0.0;
  for (std::size_t i = 0; i < label_counts.size(); ++i) {
    if (label_counts[i] > 0) {
      w[i] = std::pow(static_cast<double>(n_max) / label_counts[i], exponent);
      w_max = std::max(w_max, w[i]);
    }
  }
  for (std::size_t i = 0; i < label_counts.size(); ++i) {
    if (label_counts[i] == 0) w[i] = w_max;
  }
  double mean = std::accumulate(w.begin(), w.end(), 0.0) / w.size();
  for (double& v : w) v /= mean;
  return w;
}

}  // namespace dronedet
