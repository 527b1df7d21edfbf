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

#include <cstddef>
#include <vector>

namespace dronedet {

/// Dense H x W x C pixel array, row-major, float64 values in [0,255].
/// Augmentation math stays in float64; quantization to 8 bit happens only
/// when writing PPM/PGM files.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  double& at(int y, int x, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  double at(int y, int x, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  /// Bilinear sample at continuous lattice coordinates (border-replicated):
  /// the value at integer (x, y) is exactly pixel (y, x). Callers working in
  /// the pixel-center convention subtract 0.5 first.
  double sample_bilinear(double x, double y, int c) const;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Resamples `src` to `out_h` x `out_w` with bilinear interpolation,
/// center-aligned: src_x = (dst_x + 0.5) * (src_w / out_w) - 0.5.
Image resize_bilinear(const Image& src, int out_h, int out_w);

/// RGB <-> HSV on normalized values (rgb in [0,1], h in [0,1), s,v in [0,1]).
void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v);
void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b);

}  // namespace dronedet
