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

#include "dronedet/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dronedet {

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 1 || width < 1 || channels < 1) {
    throw std::invalid_argument("Image: dimensions must be >= 1");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

double Image::sample_bilinear(double x, double y, int c) const {
  // Continuous pixel-center coordinates: value at integer (i, j) is the
  // sample of pixel (i, j). Clamp to the valid lattice (border replicate).
  double fx = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
  double fy = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
  int x0 = static_cast<int>(std::floor(fx));
  int y0 = static_cast<int>(std::floor(fy));
  int x1 = std::min(x0 + 1, width_ - 1);
  int y1 = std::min(y0 + 1, height_ - 1);
  double tx = fx - x0;
  double ty = fy - y0;
  double v00 = at(y0, x0, c);
  double v01 = at(y0, x1, c);
  double v10 = at(y1, x0, c);
  double v11 = at(y1, x1, c);
  double top = v00 + (v01 - v00) * tx;
  double bot = v10 + (v11 - v10) * tx;
  return top + (bot - top) * ty;
}

Image resize_bilinear(const Image& src, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw std::invalid_argument("resize_bilinear: output size must be >= 1");
  }
  Image dst(out_h, out_w, src.channels());
  double sx = static_cast<double>(src.width()) / out_w;
  double sy = static_cast<double>(src.height()) / out_h;
  for (int y = 0; y < out_h; ++y) {
    double srcy = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < out_w; ++x) {
      double srcx = (x + 0.5) * sx - 0.5;
      for (int c = 0; c < src.channels(); ++c) {
        dst.at(y, x, c) = src.sample_bilinear(srcx, srcy, c);
      }
    }
  }
  return dst;
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  double mx = std::max({r, g, b});
  double mn = std::min({r, g, b});
  double d = mx - mn;
  v = mx;
  s = (mx <= 0.0) ? 0.0 : d / mx;
  if (d <= 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r) {
    h = (g - b) / d;
    if (h < 0.0) h += 6.0;
  } else if (mx == g) {
    h = (b - r) / d + 2.0;
  } else {
    h = (r - g) / d + 4.0;
  }
  h /= 6.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  if (s <= 0.0) {
    r = g = b = v;
    return;
  }
  double hh = (h - std::floor(h)) * 6.0;  // wrap into [0,6)
  int sector = static_cast<int>(hh);
  if (sector > 5) sector = 5;
  double f = hh - sector;
  double p = v * (1.0 - s);
  double q = v * (1.0 - s * f);
  double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace dronedet
