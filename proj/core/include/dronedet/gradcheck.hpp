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
#include <functional>

#include "dronedet/nnblocks.hpp"
#include "dronedet/tensor.hpp"

namespace dronedet {

/// A differentiable block wrapped for finite-difference verification. The
/// loss is a scalar of the current parameters; analytic_gradient must return
/// d loss / d param in the same flat order as get_params.
struct GradCheckProblem {
  std::function<std::vector<double>()> get_params;
  std::function<void(const std::vector<double>&)> set_params;
  std::function<double()> loss;
  std::function<std::vector<double>()> analytic_gradient;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t num_params = 0;
};

/// Central finite differences per parameter. Relative error per entry is
/// |a - n| / max(1e-8, |a| + |n|); the report carries the max. Non-finite
/// losses or gradients raise.
GradCheckReport grad_check(const GradCheckProblem& problem, double eps = 1e-5);

/// Loss = sum of all encoder outputs on a fixed input (eval mode).
GradCheckProblem encoder_grad_problem(Tensor x, EncoderParams params);

/// Loss = sum of all CBAM outputs on a fixed input.
GradCheckProblem cbam_grad_problem(Tensor f, CbamParams params);

/// Loss = sum(x @ w); gradients of a linear map are exact, which pins the
/// harness itself.
GradCheckProblem linear_grad_problem(Tensor x, Tensor w);

}  // namespace dronedet
