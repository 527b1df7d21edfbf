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

#include "dronedet/geometry.hpp"
#include "dronedet/image.hpp"
#include "dronedet/rng.hpp"

namespace dronedet {

/// Canvas and mask fill value, the letterbox gray of the YOLO family.
inline constexpr double kFillGray = 114.0;

struct Label {
  int class_id = 0;
  BBox box;
  double weight = 1.0;
  bool ignore = false;
};

struct Sample {
  Image image;  // H x W x 3, values in [0,255]
  std::vector<Label> labels;
};

struct HsvGains {
  double h = 0.015;
  double s = 0.7;
  double v = 0.4;
};

struct AffineRanges {
  double degrees = 0.0;
  double translate = 0.1;  // fraction of width/height
  double scale_min = 0.5;
  double scale_max = 1.5;
  double shear = 0.0;  // degrees
};

struct AugmentConfig {
  ImageSize mosaic_output{1280, 1280};
  double mosaic_center_jitter = 0.25;  // fraction of canvas size, in [0, 0.5)
  double mixup_beta = 32.0;            // lambda ~ Beta(beta, beta)
  HsvGains hsv;
  AffineRanges affine;
  double min_box_survival = 0.3;  // retained-area fraction in (0, 1]

  void validate() const;
};

/// Row-major 2x3 affine map: x' = m[0]x + m[1]y + m[2], y' = m[3]x + m[4]y + m[5].
struct AffineParams {
  double m[6] = {1.0, 0.0, 0.0, 0.0, 1.0, 0.0};
};

/// Stitches exactly 4 samples around a jittered center point. Each input is
/// scaled up just enough to cover its quadrant (aspect preserved, bilinear)
/// and anchored at the mosaic center, so the overflow is cropped away on the
/// outer edges. Labels are scaled, offset, clipped to their quadrant, and
/// dropped when the retained area fraction falls below min_box_survival.
/// Consumes two rng draws (center x, center y).
Sample mosaic(const std::vector<Sample>& samples, const AugmentConfig& cfg, Rng& rng);

/// image = lambda * a + (1 - lambda) * b in float64. Labels are the union of
/// both lists with weights multiplied by lambda / (1 - lambda); labels whose
/// resulting weight is 0 are dropped.
Sample mixup(const Sample& a, const Sample& b, double lambda);

/// Multiplies H, S, V per image by (1 + gain * u), u uniform in [-1, 1]
/// (three rng draws, in H, S, V order), clamps, converts back. Labels pass
/// through untouched.
Sample hsv_distort(const Sample& s, const HsvGains& gains, Rng& rng);

/// Rotation * scale, then shear, composed about the image center, plus a
/// translation. Draw order: degrees, scale, shear x, shear y, translate x,
/// translate y.
AffineParams sample_affine(const AffineRanges& ranges, ImageSize size, Rng& rng);

AffineParams compose_affine(double degrees, double scale, double shear_x_deg,
                            double shear_y_deg, double translate_x_px,
                            double translate_y_px, ImageSize size);

/// Warps the image with the inverse map (nearest-neighbor, gray fill) onto a
/// same-sized canvas. Each label box maps through its 4 corners to an
/// axis-aligned envelope, is clipped, and is dropped when the clipped area
/// falls below min_box_survival of the unclipped envelope.
Sample apply_affine(const Sample& s, const AffineParams& params, double min_box_survival);

Sample geometric_distort(const Sample& s, const AugmentConfig& cfg, Rng& rng);

/// Removes labels whose longer side would be under min_px pixels (strict)
/// once the image's long side is rescaled to ref_long_side, and paints their
/// image region uniform gray. Idempotent.
Sample mask_tiny_labels(const Sample& s, int min_px = 3, int ref_long_side = 1536);

}  // namespace dronedet
