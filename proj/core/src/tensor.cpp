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

#include "dronedet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dronedet {

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  std::size_t n = 1;
  for (std::size_t d : shape_) {
    if (d == 0) throw std::invalid_argument("Tensor: zero dimension");
    n *= d;
  }
  if (shape_.empty()) throw std::invalid_argument("Tensor: empty shape");
  data_.assign(n, fill);
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data) {
  Tensor t(std::move(shape));
  if (t.size() != data.size()) {
    throw std::invalid_argument("Tensor: data length does not match shape");
  }
  t.data_ = std::move(data);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double stable_sum(std::vector<double>& buf) {
  std::sort(buf.begin(), buf.end());
  double s = 0.0;
  for (double v : buf) s += v;
  return s;
}

void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n) {
  std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_bt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      const double* arow = a + i * k;
      const double* brow = b + j * k;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[i * n + j] = s;
    }
  }
}

void matmul_at(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
  std::fill(c, c + m * n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace dronedet
