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

#include "dronedet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace dronedet {

namespace {

std::vector<int> descending_score_order(const std::vector<ScoredBox>& dets) {
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dets[a].score > dets[b].score; });
  return order;
}

}  // namespace

MatchResult match_detections(const std::vector<ScoredBox>& dets,
                             const std::vector<GroundTruthBox>& gts,
                             double iou_thr) {
  MatchResult result;
  result.gt_match.assign(gts.size(), -1);
  std::vector<int> order = descending_score_order(dets);
  result.detections.reserve(dets.size());
  for (int di : order) {
    const ScoredBox& d = dets[di];
    DetectionMatch m;
    m.det_index = di;
    m.class_id = d.class_id;
    m.score = d.score;
    int best_gt = -1;
    double best_iou = -1.0;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      const GroundTruthBox& g = gts[gi];
      if (g.ignore || g.class_id != d.class_id || result.gt_match[gi] >= 0) continue;
      double ov = iou(d.box, g.box);
      if (ov >= iou_thr && ov > best_iou) {
        best_iou = ov;
        best_gt = static_cast<int>(gi);
      }
    }
    if (best_gt >= 0) {
      m.tp = true;
      m.gt_index = best_gt;
      result.gt_match[best_gt] = di;
    } else {
      for (std::size_t gi = 0; gi < gts.size(); ++gi) {
        if (!gts[gi].ignore) continue;
        if (iou(d.box, gts[gi].box) >= iou_thr) {
          m.ignored = true;
          break;
        }
      }
    }
    result.detections.push_back(m);
  }
  return result;
}

double average_precision(std::vector<ScoredFlag> flags, long long num_gt) {
  if (num_gt <= 0) return std::numeric_limits<double>::quiet_NaN();
  std::stable_sort(flags.begin(), flags.end(),
                   [](const ScoredFlag& a, const ScoredFlag& b) { return a.score > b.score; });
  std::size_t n = flags.size();
  std::vector<long long> tp_cum(n);
  std::vector<double> precision(n);
  long long tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (flags[i].tp) ++tp;
    tp_cum[i] = tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  // Precision envelope: max precision at this rank or any later one.
  std::vector<double> envelope(n);
  double run = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    run = std::max(run, precision[i]);
    envelope[i] = run;
  }
  double sum = 0.0;
  std::size_t cursor = 0;
  for (int r = 0; r <= 100; ++r) {
    // First rank whose recall reaches r/100, compared exactly in integers:
    // tp_cum[i] / num_gt >= r / 100  <=>  100 * tp_cum[i] >= r * num_gt.
    while (cursor < n && 100 * tp_cum[cursor] < static_cast<long long>(r) * num_gt) ++cursor;
    if (cursor < n) sum += envelope[cursor];
  }
  return sum / 101.0;
}

EvalConfig::EvalConfig() {
  for (int i = 0; i < 10; ++i) thresholds.push_back(0.5 + 0.05 * i);
}

EvalReport evaluate(const std::map<std::string, std::vector<ScoredBox>>& dets_by_image,
                    const std::map<std::string, std::vector<GroundTruthBox>>& gts_by_image,
                    const EvalConfig& cfg) {
  std::set<std::string> image_ids;
  for (const auto& [id, _] : dets_by_image) image_ids.insert(id);
  for (const auto& [id, _] : gts_by_image) image_ids.insert(id);
  if (image_ids.empty()) throw std::runtime_error("empty evaluation set");
  if (cfg.thresholds.empty()) throw std::invalid_argument("evaluate: no IoU thresholds");

  static const std::vector<ScoredBox> kNoDets;
  static const std::vector<GroundTruthBox> kNoGts;

  EvalReport report;
  report.thresholds = cfg.thresholds;

  // Classes that own at least one non-ignored GT, plus per-class GT counts.
  std::map<int, long long> gt_counts;
  for (const auto& [id, gts] : gts_by_image) {
    for (const GroundTruthBox& g : gts) {
      if (!g.ignore) ++gt_counts[g.class_id];
    }
  }
  for (const auto& [cls, cnt] : gt_counts) {
    report.class_ids.push_back(cls);
    report.num_gt += cnt;
  }

  // Detections capped per image by descending score.
  std::map<std::string, std::vector<ScoredBox>> capped;
  for (const auto& [id, dets] : dets_by_image) {
    std::vector<int> order = descending_score_order(dets);
    std::size_t keep = std::min<std::size_t>(order.size(),
                                             static_cast<std::size_t>(cfg.max_dets_per_image));
    std::vector<ScoredBox> kept;
    kept.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) kept.push_back(dets[order[i]]);
    report.num_detections += static_cast<long long>(kept.size());
    capped.emplace(id, std::move(kept));
  }

  struct PooledFlag {
    double score;
    bool tp;
    const std::string* image_id;
    int rank;  // position in the image's sorted match list
  };

  std::size_t nthr = cfg.thresholds.size();
  report.ap.assign(report.class_ids.size(), std::vector<double>(nthr, 0.0));
  report.ap50_per_class.assign(report.class_ids.size(),
                               std::numeric_limits<double>::quiet_NaN());

  int ap50_index = -1;
  for (std::size_t t = 0; t < nthr; ++t) {
    if (std::abs(cfg.thresholds[t] - 0.5) < 1e-9) ap50_index = static_cast<int>(t);
  }

  for (std::size_t t = 0; t < nthr; ++t) {
    // class id -> pooled flags at this threshold
    std::map<int, std::vector<PooledFlag>> pooled;
    for (const std::string& id : image_ids) {
      auto dit = capped.find(id);
      auto git = gts_by_image.find(id);
      const std::vector<ScoredBox>& dets = dit == capped.end() ? kNoDets : dit->second;
      const std::vector<GroundTruthBox>& gts =
          git == gts_by_image.end() ? kNoGts : git->second;
      MatchResult mr = match_detections(dets, gts, cfg.thresholds[t]);
      for (std::size_t rank = 0; rank < mr.detections.size(); ++rank) {
        const DetectionMatch& m = mr.detections[rank];
        if (m.ignored) continue;
        pooled[m.class_id].push_back({m.score, m.tp, &id, static_cast<int>(rank)});
      }
    }
    for (std::size_t c = 0; c < report.class_ids.size(); ++c) {
      int cls = report.class_ids[c];
      std::vector<PooledFlag> flags;
      if (auto it = pooled.find(cls); it != pooled.end()) flags = std::move(it->second);
      // Deterministic under image reordering: score desc, then image id,
      // then per-image rank.
      std::sort(flags.begin(), flags.end(), [](const PooledFlag& a, const PooledFlag& b) {
        if (a.score != b.score) return a.score > b.score;
        if (*a.image_id != *b.image_id) return *a.image_id < *b.image_id;
        return a.rank < b.rank;
      });
      std::vector<ScoredFlag> sf;
      sf.reserve(flags.size());
      for (const PooledFlag& f : flags) sf.push_back({f.score, f.tp});
      report.ap[c][t] = average_precision(std::move(sf), gt_counts[cls]);
    }
  }

  double sum = 0.0;
  std::size_t cells = 0;
  for (std::size_t c = 0; c < report.class_ids.size(); ++c) {
    for (std::size_t t = 0; t < nthr; ++t) {
      sum += report.ap[c][t];
      ++cells;
    }
    if (ap50_index >= 0) report.ap50_per_class[c] = report.ap[c][ap50_index];
  }
  report.map = cells == 0 ? 0.0 : sum / static_cast<double>(cells);
  if (ap50_index >= 0 && !report.class_ids.empty()) {
    double s50 = 0.0;
    for (std::size_t c = 0; c < report.class_ids.size(); ++c) s50 += report.ap[c][ap50_index];
    report.ap50 = s50 / static_cast<double>(report.class_ids.size());
  } else {
    report.ap50 = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

ConfusionMatrix::ConfusionMatrix(int k) : num_classes(k) {
  if (k < 1) throw std::invalid_argument("ConfusionMatrix: need at least one class");
  counts.assign(static_cast<std::size_t>(k + 1) * (k + 1), 0);
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.num_classes != num_classes) {
    throw std::invalid_argument("ConfusionMatrix::merge: class count mismatch");
  }
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

ConfusionMatrix confusion_matrix(const std::vector<ScoredBox>& dets,
                                 const std::vector<GroundTruthBox>& gts,
                                 int num_classes,
                                 double iou_thr,
                                 double conf_thr) {
  ConfusionMatrix cm(num_classes);
  std::vector<const ScoredBox*> kept;
  for (const ScoredBox& d : dets) {
    if (d.score < conf_thr) continue;
    if (d.class_id < 0 || d.class_id >= num_classes) {
      throw std::invalid_argument("confusion_matrix: detection class out of range");
    }
    kept.push_back(&d);
  }
  struct Pair {
    double ov;
    int di;
    int gi;
  };
  std::vector<Pair> pairs;
  for (std::size_t di = 0; di < kept.size(); ++di) {
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (gts[gi].ignore) continue;
      if (gts[gi].class_id < 0 || gts[gi].class_id >= num_classes) {
        throw std::invalid_argument("confusion_matrix: GT class out of range");
      }
      double ov = iou(kept[di]->box, gts[gi].box);
      if (ov >= iou_thr) pairs.push_back({ov, static_cast<int>(di), static_cast<int>(gi)});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.ov != b.ov) return a.ov > b.ov;
    if (a.di != b.di) return a.di < b.di;
    return a.gi < b.gi;
  });
  std::vector<bool> det_used(kept.size(), false);
  std::vector<bool> gt_used(gts.size(), false);
  for (const Pair& p : pairs) {
    if (det_used[p.di] || gt_used[p.gi]) continue;
    det_used[p.di] = true;
    gt_used[p.gi] = true;
    ++cm.at(kept[p.di]->class_id, gts[p.gi].class_id);
  }
  for (std::size_t gi = 0; gi < gts.size(); ++gi) {
    if (!gts[gi].ignore && !gt_used[gi]) ++cm.at(cm.background(), gts[gi].class_id);
  }
  for (std::size_t di = 0; di < kept.size(); ++di) {
    if (det_used[di]) continue;
    bool in_ignore = false;
    for (const GroundTruthBox& g : gts) {
      if (g.ignore && iou(kept[di]->box, g.box) >= iou_thr) {
        in_ignore = true;
        break;
      }
    }
    if (!in_ignore) ++cm.at(kept[di]->class_id, cm.background());
  }
  return cm;
}

ConfusionMatrix confusion_matrix(
    const std::map<std::string, std::vector<ScoredBox>>& dets_by_image,
    const std::map<std::string, std::vector<GroundTruthBox>>& gts_by_image,
    int num_classes,
    double iou_thr,
    double conf_thr) {
  static const std::vector<ScoredBox> kNoDets;
  static const std::vector<GroundTruthBox> kNoGts;
  std::set<std::string> image_ids;
  for (const auto& [id, _] : dets_by_image) image_ids.insert(id);
  for (const auto& [id, _] : gts_by_image) image_ids.insert(id);
  ConfusionMatrix total(num_classes);
  for (const std::string& id : image_ids) {
    auto dit = dets_by_image.find(id);
    auto git = gts_by_image.find(id);
    total.merge(confusion_matrix(dit == dets_by_image.end() ? kNoDets : dit->second,
                                 git == gts_by_image.end() ? kNoGts : git->second,
                                 num_classes, iou_thr, conf_thr));
  }
  return total;
}

}  // namespace dronedet
