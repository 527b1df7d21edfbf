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

/// Dense row-major float64 array with shape metadata.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return data_.size(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at2(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at2(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at3(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at3(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double& at4(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  double at4(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// Order-canonical accumulation: sorts the buffer by value before summing,
/// so the result depends only on the multiset of addends. Used where outputs
/// must be invariant to token or pixel permutations. Consumes `buf`.
double stable_sum(std::vector<double>& buf);

/// C = A(m x k) * B(k x n), row-major.
void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n);
/// C = A(m x k) * B(n x k)^T.
void matmul_bt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);
/// C = A(k x m)^T * B(k x n).
void matmul_at(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);

}  // namespace dronedet
