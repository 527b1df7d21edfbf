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

#include "dronedet/gradcheck.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace dronedet {

GradCheckReport grad_check(const GradCheckProblem& problem, double eps) {
  if (!problem.get_params || !problem.set_params || !problem.loss ||
      !problem.analytic_gradient) {
    throw std::invalid_argument("grad_check: incomplete problem");
  }
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw std::invalid_argument("grad_check: eps must be positive");
  }

  const std::vector<double> base = problem.get_params();
  const std::vector<double> analytic = problem.analytic_gradient();
  if (analytic.size() != base.size()) {
    throw std::runtime_error("grad_check: gradient length does not match parameters");
  }
  for (double g : analytic) {
    if (!std::isfinite(g)) throw std::runtime_error("grad_check: non-finite analytic gradient");
  }

  GradCheckReport report;
  report.num_params = base.size();
  std::vector<double> probe = base;
  for (std::size_t i = 0; i < base.size(); ++i) {
    probe[i] = base[i] + eps;
    problem.set_params(probe);
    const double lp = problem.loss();
    probe[i] = base[i] - eps;
    problem.set_params(probe);
    const double lm = problem.loss();
    probe[i] = base[i];
    if (!std::isfinite(lp) || !std::isfinite(lm)) {
      problem.set_params(base);
      throw std::runtime_error("grad_check: non-finite loss");
    }
    const double numeric = (lp - lm) / (2.0 * eps);
    const double rel = std::abs(analytic[i] - numeric) /
                       std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
      report.analytic_at_worst = analytic[i];
      report.numeric_at_worst = numeric;
    }
  }
  problem.set_params(base);
  return report;
}

GradCheckProblem encoder_grad_problem(Tensor x, EncoderParams params) {
  auto state = std::make_shared<EncoderParams>(std::move(params));
  auto input = std::make_shared<Tensor>(std::move(x));
  GradCheckProblem prob;
  prob.get_params = [state] { return flatten_params(*state); };
  prob.set_params = [state](const std::vector<double>& flat) { load_params(*state, flat); };
  prob.loss = [state, input] {
    const Tensor out = transformer_encoder_forward(*input, *state);
    double s = 0.0;
    for (double v : out.data()) s += v;
    return s;
  };
  prob.analytic_gradient = [state, input] {
    return encoder_param_gradients(*input, *state);
  };
  return prob;
}

GradCheckProblem cbam_grad_problem(Tensor f, CbamParams params) {
  auto state = std::make_shared<CbamParams>(std::move(params));
  auto input = std::make_shared<Tensor>(std::move(f));
  GradCheckProblem prob;
  prob.get_params = [state] { return flatten_params(*state); };
  prob.set_params = [state](const std::vector<double>& flat) { load_params(*state, flat); };
  prob.loss = [state, input] {
    const Tensor out = cbam_forward(*input, *state);
    double s = 0.0;
    for (double v : out.data()) s += v;
    return s;
  };
  prob.analytic_gradient = [state, input] {
    return cbam_param_gradients(*input, *state);
  };
  return prob;
}

GradCheckProblem linear_grad_problem(Tensor x, Tensor w) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0)) {
    throw std::invalid_argument("linear_grad_problem: shape mismatch");
  }
  auto weights = std::make_shared<Tensor>(std::move(w));
  auto input = std::make_shared<Tensor>(std::move(x));
  GradCheckProblem prob;
  prob.get_params = [weights] { return weights->data(); };
  prob.set_params = [weights](const std::vector<double>& flat) {
    if (flat.size() != weights->size()) {
      throw std::invalid_argument("linear_grad_problem: parameter length mismatch");
    }
    weights->data() = flat;
  };
  prob.loss = [weights, input] {
    const std::size_t n = input->dim(0), c = input->dim(1), m = weights->dim(1);
    Tensor out({n, m});
    matmul(input->data().data(), weights->data().data(), out.data().data(), n, c, m);
    double s = 0.0;
    for (double v : out.data()) s += v;
    return s;
  };
  prob.analytic_gradient = [weights, input] {
    // d sum(XW) / dW[c][m] = sum_i X[i][c], independent of m.
    const std::size_t n = input->dim(0), c = input->dim(1), m = weights->dim(1);
    std::vector<double> grad(c * m, 0.0);
    for (std::size_t cc = 0; cc < c; ++cc) {
      double colsum = 0.0;
      for (std::size_t i = 0; i < n; ++i) colsum += input->at2(i, cc);
      for (std::size_t j = 0; j < m; ++j) grad[cc * m + j] = colsum;
    }
    return grad;
  };
  return prob;
}

}  // namespace dronedet
