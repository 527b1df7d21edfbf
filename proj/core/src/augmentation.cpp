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

#include "dronedet/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dronedet {
namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

void check_rgb(const Image& img, const char* what) {
  if (img.empty() || img.channels() != 3) {
    throw std::invalid_argument(std::string(what) + ": image must be H x W x 3");
  }
}

void paint_rect(Image& img, int x0, int y0, int x1, int y1, double value) {
  x0 = std::max(0, x0);
  y0 = std::max(0, y0);
  x1 = std::min(img.width(), x1);
  y1 = std::min(img.height(), y1);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      for (int c = 0; c < img.channels(); ++c) img.at(y, x, c) = value;
    }
  }
}

struct QuadrantPlacement {
  int qx0, qy0, qx1, qy1;  // canvas rect
  double offset_x, offset_y;  // top-left of the scaled source in canvas coords
  double scale;
};

// Scales the source up until it covers the quadrant and pins the corner that
// touches the mosaic center, so cropping happens on the outer edges only.
QuadrantPlacement place_in_quadrant(int qx0, int qy0, int qx1, int qy1,
                                    int src_w, int src_h, bool anchor_right,
                                    bool anchor_bottom) {
  QuadrantPlacement p;
  p.qx0 = qx0;
  p.qy0 = qy0;
  p.qx1 = qx1;
  p.qy1 = qy1;
  const double qw = qx1 - qx0, qh = qy1 - qy0;
  p.scale = std::max(qw / src_w, qh / src_h);
  const double sw = p.scale * src_w, sh = p.scale * src_h;
  p.offset_x = anchor_right ? qx1 - sw : qx0;
  p.offset_y = anchor_bottom ? qy1 - sh : qy0;
  return p;
}

}  // namespace

void AugmentConfig::validate() const {
  if (mosaic_output.width < 2 || mosaic_output.height < 2) {
    throw std::invalid_argument("AugmentConfig: mosaic_output must be at least 2x2");
  }
  if (!(mosaic_center_jitter >= 0.0 && mosaic_center_jitter < 0.5)) {
    throw std::invalid_argument("AugmentConfig: mosaic_center_jitter outside [0, 0.5)");
  }
  if (!(mixup_beta > 0.0)) throw std::invalid_argument("AugmentConfig: mixup_beta must be positive");
  if (hsv.h < 0.0 || hsv.s < 0.0 || hsv.v < 0.0) {
    throw std::invalid_argument("AugmentConfig: hsv gains must be non-negative");
  }
  if (affine.degrees < 0.0 || affine.translate < 0.0 || affine.shear < 0.0 ||
      !(affine.scale_min > 0.0) || affine.scale_max < affine.scale_min) {
    throw std::invalid_argument("AugmentConfig: bad affine ranges");
  }
  if (!(min_box_survival > 0.0 && min_box_survival <= 1.0)) {
    throw std::invalid_argument("AugmentConfig: min_box_survival outside (0, 1]");
  }
}

Sample mosaic(const std::vector<Sample>& samples, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  if (samples.size() != 4) throw std::invalid_argument("mosaic: exactly 4 samples required");
  for (const Sample& s : samples) check_rgb(s.image, "mosaic");

  const int out_w = cfg.mosaic_output.width, out_h = cfg.mosaic_output.height;
  const double jx = 2.0 * rng.uniform() - 1.0;
  const double jy = 2.0 * rng.uniform() - 1.0;
  int cx = static_cast<int>(std::lround((0.5 + cfg.mosaic_center_jitter * jx) * out_w));
  int cy = static_cast<int>(std::lround((0.5 + cfg.mosaic_center_jitter * jy) * out_h));
  cx = std::clamp(cx, 1, out_w - 1);
  cy = std::clamp(cy, 1, out_h - 1);

  Sample out;
  out.image = Image(out_h, out_w, 3, kFillGray);

  const QuadrantPlacement quads[4] = {
      place_in_quadrant(0, 0, cx, cy, samples[0].image.width(), samples[0].image.height(), true, true),
      place_in_quadrant(cx, 0, out_w, cy, samples[1].image.width(), samples[1].image.height(), false, true),
      place_in_quadrant(0, cy, cx, out_h, samples[2].image.width(), samples[2].image.height(), true, false),
      place_in_quadrant(cx, cy, out_w, out_h, samples[3].image.width(), samples[3].image.height(), false, false),
  };

  for (int q = 0; q < 4; ++q) {
    const QuadrantPlacement& p = quads[q];
    const Image& src = samples[q].image;
    for (int y = p.qy0; y < p.qy1; ++y) {
      const double sy = (y + 0.5 - p.offset_y) / p.scale - 0.5;
      for (int x = p.qx0; x < p.qx1; ++x) {
        const double sx = (x + 0.5 - p.offset_x) / p.scale - 0.5;
        for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = src.sample_bilinear(sx, sy, c);
      }
    }
    for (const Label& lbl : samples[q].labels) {
      const double area = lbl.box.area();
      if (area <= 0.0) continue;
      BBox moved(p.offset_x + p.scale * lbl.box.x1, p.offset_y + p.scale * lbl.box.y1,
                 p.offset_x + p.scale * lbl.box.x2, p.offset_y + p.scale * lbl.box.y2);
      // Intersect before constructing: BBox's corner normalization would turn
      // an empty intersection into a spurious box outside the quadrant.
      const double ix1 = std::max(moved.x1, static_cast<double>(p.qx0));
      const double iy1 = std::max(moved.y1, static_cast<double>(p.qy0));
      const double ix2 = std::min(moved.x2, static_cast<double>(p.qx1));
      const double iy2 = std::min(moved.y2, static_cast<double>(p.qy1));
      if (ix2 <= ix1 || iy2 <= iy1) continue;
      const BBox clipped(ix1, iy1, ix2, iy2);
      const double survival = clipped.area() / (p.scale * p.scale * area);
      if (survival < cfg.min_box_survival) continue;
      Label kept = lbl;
      kept.box = clipped;
      out.labels.push_back(kept);
    }
  }
  return out;
}

Sample mixup(const Sample& a, const Sample& b, double lambda) {
  check_rgb(a.image, "mixup");
  if (!a.image.same_shape(b.image)) throw std::invalid_argument("mixup: image shapes differ");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("mixup: lambda outside [0, 1]");

  Sample out;
  out.image = Image(a.image.height(), a.image.width(), a.image.channels());
  const std::vector<double>& pa = a.image.data();
  const std::vector<double>& pb = b.image.data();
  std::vector<double>& po = out.image.data();
  for (std::size_t i = 0; i < po.size(); ++i) {
    po[i] = lambda * pa[i] + (1.0 - lambda) * pb[i];
  }
  for (const Label& lbl : a.labels) {
    Label mixed = lbl;
    mixed.weight = lbl.weight * lambda;
    if (mixed.weight > 0.0) out.labels.push_back(mixed);
  }
  for (const Label& lbl : b.labels) {
    Label mixed = lbl;
    mixed.weight = lbl.weight * (1.0 - lambda);
    if (mixed.weight > 0.0) out.labels.push_back(mixed);
  }
  return out;
}

Sample hsv_distort(const Sample& s, const HsvGains& gains, Rng& rng) {
  check_rgb(s.image, "hsv_distort");
  const double fh = 1.0 + gains.h * (2.0 * rng.uniform() - 1.0);
  const double fs = 1.0 + gains.s * (2.0 * rng.uniform() - 1.0);
  const double fv = 1.0 + gains.v * (2.0 * rng.uniform() - 1.0);

  Sample out = s;
  Image& img = out.image;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double h, sat, val;
      rgb_to_hsv(img.at(y, x, 0) / 255.0, img.at(y, x, 1) / 255.0,
                 img.at(y, x, 2) / 255.0, h, sat, val);
      h = std::clamp(h * fh, 0.0, 1.0);
      if (h >= 1.0) h -= 1.0;  // hue wraps
      sat = std::clamp(sat * fs, 0.0, 1.0);
      val = std::clamp(val * fv, 0.0, 1.0);
      double r, g, b;
      hsv_to_rgb(h, sat, val, r, g, b);
      img.at(y, x, 0) = r * 255.0;
      img.at(y, x, 1) = g * 255.0;
      img.at(y, x, 2) = b * 255.0;
    }
  }
  return out;
}

AffineParams compose_affine(double degrees, double scale, double shear_x_deg,
                            double shear_y_deg, double translate_x_px,
                            double translate_y_px, ImageSize size) {
  if (!(scale > 0.0)) throw std::invalid_argument("compose_affine: scale must be positive");
  const double theta = degrees * kDegToRad;
  const double ct = std::cos(theta), st = std::sin(theta);
  // Rotation * isotropic scale, then shear.
  const double a00 = scale * ct, a01 = -scale * st;
  const double a10 = scale * st, a11 = scale * ct;
  const double shx = std::tan(shear_x_deg * kDegToRad);
  const double shy = std::tan(shear_y_deg * kDegToRad);
  const double l00 = a00 + shx * a10, l01 = a01 + shx * a11;
  const double l10 = shy * a00 + a10, l11 = shy * a01 + a11;

  const double cx = 0.5 * size.width, cy = 0.5 * size.height;
  AffineParams p;
  p.m[0] = l00;
  p.m[1] = l01;
  p.m[2] = cx + translate_x_px - (l00 * cx + l01 * cy);
  p.m[3] = l10;
  p.m[4] = l11;
  p.m[5] = cy + translate_y_px - (l10 * cx + l11 * cy);
  return p;
}

AffineParams sample_affine(const AffineRanges& ranges, ImageSize size, Rng& rng) {
  const double degrees = rng.uniform(-ranges.degrees, ranges.degrees);
  const double scale = rng.uniform(ranges.scale_min, ranges.scale_max);
  const double shear_x = rng.uniform(-ranges.shear, ranges.shear);
  const double shear_y = rng.uniform(-ranges.shear, ranges.shear);
  const double tx = rng.uniform(-ranges.translate, ranges.translate) * size.width;
  const double ty = rng.uniform(-ranges.translate, ranges.translate) * size.height;
  return compose_affine(degrees, scale, shear_x, shear_y, tx, ty, size);
}

Sample apply_affine(const Sample& s, const AffineParams& params, double min_box_survival) {
  check_rgb(s.image, "apply_affine");
  if (!(min_box_survival > 0.0 && min_box_survival <= 1.0)) {
    throw std::invalid_argument("apply_affine: min_box_survival outside (0, 1]");
  }
  const double* m = params.m;
  const double det = m[0] * m[4] - m[1] * m[3];
  if (std::abs(det) < 1e-12) throw std::invalid_argument("apply_affine: degenerate transform");
  const double i00 = m[4] / det, i01 = -m[1] / det;
  const double i10 = -m[3] / det, i11 = m[0] / det;

  const int w = s.image.width(), h = s.image.height();
  Sample out;
  out.image = Image(h, w, 3, kFillGray);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x + 0.5 - m[2], dy = y + 0.5 - m[5];
      const double sx = i00 * dx + i01 * dy;
      const double sy = i10 * dx + i11 * dy;
      const int px = static_cast<int>(std::floor(sx));
      const int py = static_cast<int>(std::floor(sy));
      if (px < 0 || px >= w || py < 0 || py >= h) continue;
      for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = s.image.at(py, px, c);
    }
  }

  const ImageSize bounds(w, h);
  for (const Label& lbl : s.labels) {
    const double xs[2] = {lbl.box.x1, lbl.box.x2};
    const double ys[2] = {lbl.box.y1, lbl.box.y2};
    double ex1 = 1e300, ey1 = 1e300, ex2 = -1e300, ey2 = -1e300;
    for (double bx : xs) {
      for (double by : ys) {
        const double tx = m[0] * bx + m[1] * by + m[2];
        const double ty = m[3] * bx + m[4] * by + m[5];
        ex1 = std::min(ex1, tx);
        ey1 = std::min(ey1, ty);
        ex2 = std::max(ex2, tx);
        ey2 = std::max(ey2, ty);
      }
    }
    BBox envelope(ex1, ey1, ex2, ey2);
    const double full = envelope.area();
    if (full <= 0.0) continue;
    BBox clipped = envelope;
    if (!clip_box(clipped, bounds)) continue;
    if (clipped.area() / full < min_box_survival) continue;
    Label kept = lbl;
    kept.box = clipped;
    out.labels.push_back(kept);
  }
  return out;
}

Sample geometric_distort(const Sample& s, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  check_rgb(s.image, "geometric_distort");
  const ImageSize size(s.image.width(), s.image.height());
  return apply_affine(s, sample_affine(cfg.affine, size, rng), cfg.min_box_survival);
}

Sample mask_tiny_labels(const Sample& s, int min_px, int ref_long_side) {
  check_rgb(s.image, "mask_tiny_labels");
  if (min_px < 1 || ref_long_side < 1) {
    throw std::invalid_argument("mask_tiny_labels: min_px and ref_long_side must be positive");
  }
  const int long_side = std::max(s.image.width(), s.image.height());
  const double scale = static_cast<double>(ref_long_side) / long_side;

  Sample out = s;
  out.labels.clear();
  for (const Label& lbl : s.labels) {
    const double scaled_long = std::max(lbl.box.width(), lbl.box.height()) * scale;
    if (scaled_long < static_cast<double>(min_px)) {
      paint_rect(out.image, static_cast<int>(std::floor(lbl.box.x1)),
                 static_cast<int>(std::floor(lbl.box.y1)),
                 static_cast<int>(std::ceil(lbl.box.x2)),
                 static_cast<int>(std::ceil(lbl.box.y2)), kFillGray);
    } else {
      out.labels.push_back(lbl);
    }
  }
  return out;
}

}  // namespace dronedet
