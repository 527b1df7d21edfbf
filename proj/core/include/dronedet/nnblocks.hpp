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

#include <utility>
#include <vector>

#include "dronedet/geometry.hpp"
#include "dronedet/rng.hpp"
#include "dronedet/tensor.hpp"

namespace dronedet {

/// Transformer encoder block parameters: multi-head self-attention plus a
/// two-layer MLP, with per-sublayer layer norms. Projections are bias-free;
/// the MLP carries biases. Pre-norm residual ordering by default, post-norm
/// behind the flag. Token reductions inside the attention use order-canonical
/// summation, so outputs are invariant to token permutation (there is no
/// positional encoding).
struct EncoderParams {
  int model_dim = 0;  // C, must be divisible by num_heads
  int num_heads = 1;
  int mlp_dim = 0;  // hidden width of the MLP
  bool pre_norm = true;
  double dropout_rate = 0.0;  // applied in train mode only

  Tensor ln1_gain, ln1_bias;      // [C]
  Tensor wq, wk, wv, wo;          // [C, C]
  Tensor ln2_gain, ln2_bias;      // [C]
  Tensor mlp_w1, mlp_b1;          // [C, E], [E]
  Tensor mlp_w2, mlp_b2;          // [E, C], [C]

  /// Identity-friendly init: layer-norm gains 1, all weights and biases 0.
  static EncoderParams create(int model_dim, int num_heads, int mlp_expansion = 4);
  static EncoderParams random(int model_dim, int num_heads, Rng& rng, int mlp_expansion = 4);

  void validate() const;
};

struct MhaResult {
  Tensor output;     // [N, C]
  Tensor attention;  // [H, N, N], each row sums to 1
};

/// Scaled dot-product multi-head self-attention over x [N, C] (no layer norm
/// here; the encoder wraps it).
MhaResult multi_head_attention(const Tensor& x, const EncoderParams& p);

/// Full encoder block. Pre-norm: x + Attn(LN1(x)), then y + MLP(LN2(y)).
/// Dropout is identity when train_mode is false; train mode with a positive
/// dropout rate requires an rng.
Tensor transformer_encoder_forward(const Tensor& x, const EncoderParams& p,
                                   bool train_mode = false, Rng* rng = nullptr);

/// Gradient of sum(encoder_forward(x)) w.r.t. the flattened parameters
/// (eval mode). Layout matches flatten_params(EncoderParams).
std::vector<double> encoder_param_gradients(const Tensor& x, const EncoderParams& p);

std::vector<double> flatten_params(const EncoderParams& p);
void load_params(EncoderParams& p, const std::vector<double>& flat);

/// CBAM parameters: shared channel MLP (C -> C/r -> C, ReLU, bias-free) and a
/// k x k spatial convolution over the [avg; max] channel-pooled pair.
struct CbamParams {
  int channels = 0;   // C, divisible by reduction
  int reduction = 16;
  int kernel = 7;     // odd

  Tensor mlp_w1;     // [C/r, C]
  Tensor mlp_w2;     // [C, C/r]
  Tensor conv;       // [2, k, k]
  Tensor conv_bias;  // [1]

  static CbamParams create(int channels, int reduction = 16, int kernel = 7);
  static CbamParams random(int channels, int reduction, int kernel, Rng& rng);

  void validate() const;
};

/// Channel attention then spatial attention, each applied multiplicatively:
/// out = Ms (.) (Mc (.) f) for f [C, H, W]. Both attention maps are sigmoid
/// outputs, so |out| <= |f| elementwise.
Tensor cbam_forward(const Tensor& f, const CbamParams& p);

/// Gradient of sum(cbam_forward(f)) w.r.t. the flattened parameters.
std::vector<double> cbam_param_gradients(const Tensor& f, const CbamParams& p);

std::vector<double> flatten_params(const CbamParams& p);
void load_params(CbamParams& p, const std::vector<double>& flat);

/// One detection head's geometry. The stride-4 spec is the extra
/// tiny-object head.
struct HeadSpec {
  int stride = 8;  // one of {4, 8, 16, 32}
  std::vector<std::pair<double, double>> anchors;  // (w, h) pixel pairs
  int num_classes = 0;

  void validate() const;
};

/// The four-head configuration covering strides {4, 8, 16, 32}. Anchor sizes
/// are library defaults chosen per stride; swap in tuned values as needed.
std::vector<HeadSpec> default_head_specs(int num_classes);

/// Decodes raw head output [A, H, W, 5+K] (channels: tx, ty, tw, th, obj,
/// class logits). Center = (2*sig(t) - 0.5 + cell) * stride, size =
/// (2*sig(t))^2 * anchor, score = sig(obj) * sig(best class logit). Boxes
/// with score >= conf_thr are emitted with the argmax class.
std::vector<ScoredBox> yolo_head_decode(const Tensor& raw, const HeadSpec& spec,
                                        double conf_thr);

/// Cosine schedule from lr0 down to final_fraction * lr0 at the last epoch:
/// lr = lr0 * (f + (1 - f) * (1 + cos(pi * epoch / (total - 1))) / 2).
double cosine_lr(int epoch, int total_epochs, double lr0, double final_fraction = 0.12);

}  // namespace dronedet
