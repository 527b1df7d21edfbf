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

#include <vector>

namespace dronedet {

/// Axis-aligned box in pixel coordinates, corner convention.
/// Construction swaps corners if needed so that x1 <= x2 and y1 <= y2.
/// Coordinates stay continuous; rounding happens only at rasterization time.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  BBox() = default;
  BBox(double ax1, double ay1, double ax2, double ay2);

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }

  bool operator==(const BBox&) const = default;
};

struct ScoredBox {
  BBox box;
  double score = 0.0;  // confidence in [0,1]
  int class_id = 0;
};

struct ImageSize {
  int width = 0;
  int height = 0;

  ImageSize() = default;
  ImageSize(int w, int h);  // throws std::invalid_argument unless both >= 1

  int long_side() const { return width > height ? width : height; }
};

enum class TransformDirection { Forward, Inverse };

/// Invertible scale + horizontal-flip mapping between original-image
/// coordinates and a TTA-view frame. The view frame has continuous extent
/// (source.width * scale, source.height * scale); no pixel rounding here.
struct ViewTransform {
  double scale = 1.0;
  bool hflip = false;
  ImageSize source;

  ViewTransform() = default;
  ViewTransform(double scale, bool hflip, ImageSize source);  // scale > 0

  double view_width() const { return source.width * scale; }
  double view_height() const { return source.height * scale; }

  BBox apply(const BBox& b, TransformDirection dir) const;
};

/// Intersection over union. Zero-area union yields 0.
double iou(const BBox& a, const BBox& b);

/// Maps boxes between the source frame and the view frame. Scores and
/// classes are untouched.
std::vector<ScoredBox> transform_boxes(const std::vector<ScoredBox>& boxes,
                                       const ViewTransform& view,
                                       TransformDirection dir);

/// Clamps each box into [0,W]x[0,H] and drops boxes whose clipped area is 0.
std::vector<ScoredBox> clip_boxes(const std::vector<ScoredBox>& boxes, ImageSize size);

/// Single-box clamp; returns false when the clipped box has zero area.
bool clip_box(BBox& b, ImageSize size);

}  // namespace dronedet
