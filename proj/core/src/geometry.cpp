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

#include "dronedet/geometry.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace dronedet {

BBox::BBox(double ax1, double ay1, double ax2, double ay2)
    : x1(ax1), y1(ay1), x2(ax2), y2(ay2) {
  if (x1 > x2) std::swap(x1, x2);
  if (y1 > y2) std::swap(y1, y2);
}

ImageSize::ImageSize(int w, int h) : width(w), height(h) {
  if (w < 1 || h < 1) {
    throw std::invalid_argument("ImageSize: width and height must be >= 1");
  }
}

ViewTransform::ViewTransform(double scale_, bool hflip_, ImageSize source_)
    : scale(scale_), hflip(hflip_), source(source_) {
  if (!(scale > 0.0)) {
    throw std::invalid_argument("ViewTransform: scale must be > 0");
  }
}

BBox ViewTransform::apply(const BBox& b, TransformDirection dir) const {
  if (dir == TransformDirection::Forward) {
    double x1 = b.x1 * scale;
    double x2 = b.x2 * scale;
    double y1 = b.y1 * scale;
    double y2 = b.y2 * scale;
    if (hflip) {
      double w = view_width();
      // Mirror swaps the x endpoints.
      double nx1 = w - x2;
      double nx2 = w - x1;
      x1 = nx1;
      x2 = nx2;
    }
    return BBox(x1, y1, x2, y2);
  }
  double x1 = b.x1;
  double x2 = b.x2;
  if (hflip) {
    double w = view_width();
    double nx1 = w - x2;
    double nx2 = w - x1;
    x1 = nx1;
    x2 = nx2;
  }
  return BBox(x1 / scale, b.y1 / scale, x2 / scale, b.y2 / scale);
}

double iou(const BBox& a, const BBox& b) {
  double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  double inter = (ix > 0.0 && iy > 0.0) ? ix * iy : 0.0;
  double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

std::vector<ScoredBox> transform_boxes(const std::vector<ScoredBox>& boxes,
                                       const ViewTransform& view,
                                       TransformDirection dir) {
  std::vector<ScoredBox> out;
  out.reserve(boxes.size());
  for (const ScoredBox& sb : boxes) {
    out.push_back({view.apply(sb.box, dir), sb.score, sb.class_id});
  }
  return out;
}

bool clip_box(BBox& b, ImageSize size) {
  double w = static_cast<double>(size.width);
  double h = static_cast<double>(size.height);
  b.x1 = std::clamp(b.x1, 0.0, w);
  b.x2 = std::clamp(b.x2, 0.0, w);
  b.y1 = std::clamp(b.y1, 0.0, h);
  b.y2 = std::clamp(b.y2, 0.0, h);
  return b.area() > 0.0;
}

std::vector<ScoredBox> clip_boxes(const std::vector<ScoredBox>& boxes, ImageSize size) {
  std::vector<ScoredBox> out;
  out.reserve(boxes.size());
  for (ScoredBox sb : boxes) {
    if (clip_box(sb.box, size)) out.push_back(sb);
  }
  return out;
}

}  // namespace dronedet
