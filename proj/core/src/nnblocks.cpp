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

#include "dronedet/nnblocks.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace dronedet {
namespace {

constexpr double kLnEps = 1e-5;
constexpr double kPi = 3.14159265358979323846;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); }

double gelu_grad(double v) {
  return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) +
         v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
}

struct LnCache {
  Tensor xhat;                  // [N, C]
  std::vector<double> inv_std;  // per token
};

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  LnCache* cache) {
  const std::size_t n = x.dim(0), c = x.dim(1);
  Tensor out({n, c});
  Tensor xhat({n, c});
  std::vector<double> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mu = 0.0;
    for (std::size_t e = 0; e < c; ++e) mu += x.at2(i, e);
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t e = 0; e < c; ++e) {
      const double d = x.at2(i, e) - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double istd = 1.0 / std::sqrt(var + kLnEps);
    inv_std[i] = istd;
    for (std::size_t e = 0; e < c; ++e) {
      const double xh = (x.at2(i, e) - mu) * istd;
      xhat.at2(i, e) = xh;
      out.at2(i, e) = gain[e] * xh + bias[e];
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

// dx_i = istd * (dxhat_i - mean(dxhat) - xhat_i * mean(dxhat * xhat))
Tensor layer_norm_backward(const Tensor& dy, const LnCache& cache,
                           const Tensor& gain, double* dgain, double* dbias) {
  const std::size_t n = dy.dim(0), c = dy.dim(1);
  Tensor dx({n, c});
  std::vector<double> dxhat(c);
  for (std::size_t i = 0; i < n; ++i) {
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t e = 0; e < c; ++e) {
      const double g = dy.at2(i, e);
      const double xh = cache.xhat.at2(i, e);
      dgain[e] += g * xh;
      dbias[e] += g;
      dxhat[e] = g * gain[e];
      m1 += dxhat[e];
      m2 += dxhat[e] * xh;
    }
    m1 /= static_cast<double>(c);
    m2 /= static_cast<double>(c);
    const double istd = cache.inv_std[i];
    for (std::size_t e = 0; e < c; ++e) {
      dx.at2(i, e) = istd * (dxhat[e] - m1 - cache.xhat.at2(i, e) * m2);
    }
  }
  return dx;
}

struct AttnCache {
  Tensor input;    // projection input [N, C]
  Tensor q, k, v;  // [N, C]
  Tensor concat;   // [N, C]
  Tensor attn;     // [H, N, N]
};

// Softmax denominators and value aggregations run through stable_sum so the
// result for a given token set does not depend on token order.
Tensor attention_forward(const Tensor& x, const EncoderParams& p,
                         AttnCache* cache) {
  const std::size_t n = x.dim(0), c = x.dim(1);
  const std::size_t heads = static_cast<std::size_t>(p.num_heads);
  const std::size_t d = c / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  Tensor q({n, c}), k({n, c}), v({n, c});
  matmul(x.data().data(), p.wq.data().data(), q.data().data(), n, c, c);
  matmul(x.data().data(), p.wk.data().data(), k.data().data(), n, c, c);
  matmul(x.data().data(), p.wv.data().data(), v.data().data(), n, c, c);

  Tensor attn({heads, n, n});
  Tensor concat({n, c});
  std::vector<double> logits(n), expv(n), buf;
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * d;
    for (std::size_t i = 0; i < n; ++i) {
      double lmax = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (std::size_t e = 0; e < d; ++e) dot += q.at2(i, off + e) * k.at2(j, off + e);
        logits[j] = dot * scale;
        lmax = std::max(lmax, logits[j]);
      }
      for (std::size_t j = 0; j < n; ++j) expv[j] = std::exp(logits[j] - lmax);
      buf = expv;
      const double denom = stable_sum(buf);
      for (std::size_t j = 0; j < n; ++j) attn.at3(h, i, j) = expv[j] / denom;
      for (std::size_t e = 0; e < d; ++e) {
        buf.resize(n);
        for (std::size_t j = 0; j < n; ++j) buf[j] = attn.at3(h, i, j) * v.at2(j, off + e);
        concat.at2(i, off + e) = stable_sum(buf);
      }
    }
  }

  Tensor out({n, c});
  matmul(concat.data().data(), p.wo.data().data(), out.data().data(), n, c, c);
  if (cache) {
    cache->input = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->concat = std::move(concat);
    cache->attn = std::move(attn);
  }
  return out;
}

Tensor attention_backward(const Tensor& dout, const EncoderParams& p,
                          const AttnCache& cc, double* dwq, double* dwk,
                          double* dwv, double* dwo) {
  const std::size_t n = dout.dim(0), c = dout.dim(1);
  const std::size_t heads = static_cast<std::size_t>(p.num_heads);
  const std::size_t d = c / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  matmul_at(cc.concat.data().data(), dout.data().data(), dwo, c, n, c);
  Tensor dconcat({n, c});
  matmul_bt(dout.data().data(), p.wo.data().data(), dconcat.data().data(), n, c, c);

  Tensor dq({n, c}), dk({n, c}), dv({n, c});
  std::vector<double> da(n * n);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * d;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t e = 0; e < d; ++e) s += dconcat.at2(i, off + e) * cc.v.at2(j, off + e);
        da[i * n + j] = s;
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t e = 0; e < d; ++e) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += cc.attn.at3(h, i, j) * dconcat.at2(i, off + e);
        dv.at2(j, off + e) += s;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      double rowdot = 0.0;
      for (std::size_t j = 0; j < n; ++j) rowdot += cc.attn.at3(h, i, j) * da[i * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        const double dlog = cc.attn.at3(h, i, j) * (da[i * n + j] - rowdot) * scale;
        if (dlog == 0.0) continue;
        for (std::size_t e = 0; e < d; ++e) {
          dq.at2(i, off + e) += dlog * cc.k.at2(j, off + e);
          dk.at2(j, off + e) += dlog * cc.q.at2(i, off + e);
        }
      }
    }
  }

  matmul_at(cc.input.data().data(), dq.data().data(), dwq, c, n, c);
  matmul_at(cc.input.data().data(), dk.data().data(), dwk, c, n, c);
  matmul_at(cc.input.data().data(), dv.data().data(), dwv, c, n, c);

  Tensor dx({n, c}), tmp({n, c});
  matmul_bt(dq.data().data(), p.wq.data().data(), dx.data().data(), n, c, c);
  matmul_bt(dk.data().data(), p.wk.data().data(), tmp.data().data(), n, c, c);
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += tmp[i];
  matmul_bt(dv.data().data(), p.wv.data().data(), tmp.data().data(), n, c, c);
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += tmp[i];
  return dx;
}

struct MlpCache {
  Tensor input;  // [N, C]
  Tensor z;      // pre-activation [N, E]
  Tensor h;      // gelu(z) [N, E]
};

Tensor mlp_forward(const Tensor& x, const EncoderParams& p, MlpCache* cache) {
  const std::size_t n = x.dim(0), c = x.dim(1);
  const std::size_t e = static_cast<std::size_t>(p.mlp_dim);
  Tensor z({n, e});
  matmul(x.data().data(), p.mlp_w1.data().data(), z.data().data(), n, c, e);
  Tensor h({n, e});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t q = 0; q < e; ++q) {
      z.at2(i, q) += p.mlp_b1[q];
      h.at2(i, q) = gelu(z.at2(i, q));
    }
  }
  Tensor out({n, c});
  matmul(h.data().data(), p.mlp_w2.data().data(), out.data().data(), n, e, c);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t q = 0; q < c; ++q) out.at2(i, q) += p.mlp_b2[q];
  }
  if (cache) {
    cache->input = x;
    cache->z = std::move(z);
    cache->h = std::move(h);
  }
  return out;
}

Tensor mlp_backward(const Tensor& dout, const EncoderParams& p,
                    const MlpCache& cc, double* dw1, double* db1, double* dw2,
                    double* db2) {
  const std::size_t n = dout.dim(0), c = dout.dim(1);
  const std::size_t e = static_cast<std::size_t>(p.mlp_dim);
  matmul_at(cc.h.data().data(), dout.data().data(), dw2, e, n, c);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t q = 0; q < c; ++q) db2[q] += dout.at2(i, q);
  }
  Tensor dh({n, e});
  matmul_bt(dout.data().data(), p.mlp_w2.data().data(), dh.data().data(), n, c, e);
  Tensor dz({n, e});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t q = 0; q < e; ++q) {
      dz.at2(i, q) = dh.at2(i, q) * gelu_grad(cc.z.at2(i, q));
      db1[q] += dz.at2(i, q);
    }
  }
  matmul_at(cc.input.data().data(), dz.data().data(), dw1, c, n, e);
  Tensor dx({n, c});
  matmul_bt(dz.data().data(), p.mlp_w1.data().data(), dx.data().data(), n, e, c);
  return dx;
}

void apply_dropout(Tensor& t, double rate, Rng* rng) {
  if (rate <= 0.0) return;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = rng->uniform() < rate ? 0.0 : t[i] * keep_scale;
  }
}

void check_encoder_input(const Tensor& x, const EncoderParams& p) {
  p.validate();
  if (x.rank() != 2 || x.dim(1) != static_cast<std::size_t>(p.model_dim)) {
    throw std::invalid_argument("encoder: input must be [N, model_dim]");
  }
  if (!x.all_finite()) throw std::invalid_argument("encoder: non-finite input");
}

struct EncoderTrace {
  LnCache ln1, ln2;
  AttnCache attn;
  MlpCache mlp;
};

Tensor run_encoder(const Tensor& x, const EncoderParams& p, bool train_mode,
                   Rng* rng, EncoderTrace* trace) {
  check_encoder_input(x, p);
  if (train_mode && p.dropout_rate > 0.0 && rng == nullptr) {
    throw std::invalid_argument("encoder: train mode with dropout needs an rng");
  }
  const double rate = train_mode ? p.dropout_rate : 0.0;
  LnCache* c1 = trace ? &trace->ln1 : nullptr;
  LnCache* c2 = trace ? &trace->ln2 : nullptr;
  AttnCache* ca = trace ? &trace->attn : nullptr;
  MlpCache* cm = trace ? &trace->mlp : nullptr;

  if (p.pre_norm) {
    Tensor a = attention_forward(layer_norm(x, p.ln1_gain, p.ln1_bias, c1), p, ca);
    apply_dropout(a, rate, rng);
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a[i];
    Tensor m = mlp_forward(layer_norm(y, p.ln2_gain, p.ln2_bias, c2), p, cm);
    apply_dropout(m, rate, rng);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += y[i];
    return m;
  }

  Tensor a = attention_forward(x, p, ca);
  apply_dropout(a, rate, rng);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += x[i];
  Tensor y = layer_norm(a, p.ln1_gain, p.ln1_bias, c1);
  Tensor m = mlp_forward(y, p, cm);
  apply_dropout(m, rate, rng);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] += y[i];
  return layer_norm(m, p.ln2_gain, p.ln2_bias, c2);
}

void append(std::vector<double>& flat, const Tensor& t) {
  flat.insert(flat.end(), t.data().begin(), t.data().end());
}

std::size_t take(Tensor& t, const std::vector<double>& flat, std::size_t pos) {
  std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
            flat.begin() + static_cast<std::ptrdiff_t>(pos + t.size()),
            t.data().begin());
  return pos + t.size();
}

void check_tensor_shape(const Tensor& t, std::initializer_list<std::size_t> dims,
                        const char* what) {
  if (t.shape() != std::vector<std::size_t>(dims)) {
    throw std::invalid_argument(std::string(what) + ": bad shape");
  }
  if (!t.all_finite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite values");
  }
}

}  // namespace

EncoderParams EncoderParams::create(int model_dim, int num_heads, int mlp_expansion) {
  if (model_dim < 1 || num_heads < 1 || model_dim % num_heads != 0) {
    throw std::invalid_argument("EncoderParams: model_dim must be a positive multiple of num_heads");
  }
  if (mlp_expansion < 1) throw std::invalid_argument("EncoderParams: bad mlp_expansion");
  const std::size_t c = static_cast<std::size_t>(model_dim);
  const std::size_t e = c * static_cast<std::size_t>(mlp_expansion);
  EncoderParams p;
  p.model_dim = model_dim;
  p.num_heads = num_heads;
  p.mlp_dim = static_cast<int>(e);
  p.ln1_gain = Tensor({c}, 1.0);
  p.ln1_bias = Tensor({c});
  p.wq = Tensor({c, c});
  p.wk = Tensor({c, c});
  p.wv = Tensor({c, c});
  p.wo = Tensor({c, c});
  p.ln2_gain = Tensor({c}, 1.0);
  p.ln2_bias = Tensor({c});
  p.mlp_w1 = Tensor({c, e});
  p.mlp_b1 = Tensor({e});
  p.mlp_w2 = Tensor({e, c});
  p.mlp_b2 = Tensor({c});
  return p;
}

EncoderParams EncoderParams::random(int model_dim, int num_heads, Rng& rng,
                                    int mlp_expansion) {
  EncoderParams p = create(model_dim, num_heads, mlp_expansion);
  const double wscale = 1.0 / std::sqrt(static_cast<double>(model_dim));
  const double hscale = 1.0 / std::sqrt(static_cast<double>(p.mlp_dim));
  for (double& v : p.ln1_gain.data()) v = 1.0 + 0.05 * rng.normal();
  for (double& v : p.ln1_bias.data()) v = 0.05 * rng.normal();
  for (double& v : p.wq.data()) v = wscale * rng.normal();
  for (double& v : p.wk.data()) v = wscale * rng.normal();
  for (double& v : p.wv.data()) v = wscale * rng.normal();
  for (double& v : p.wo.data()) v = wscale * rng.normal();
  for (double& v : p.ln2_gain.data()) v = 1.0 + 0.05 * rng.normal();
  for (double& v : p.ln2_bias.data()) v = 0.05 * rng.normal();
  for (double& v : p.mlp_w1.data()) v = wscale * rng.normal();
  for (double& v : p.mlp_b1.data()) v = 0.05 * rng.normal();
  for (double& v : p.mlp_w2.data()) v = hscale * rng.normal();
  for (double& v : p.mlp_b2.data()) v = 0.05 * rng.normal();
  return p;
}

void EncoderParams::validate() const {
  if (model_dim < 1 || num_heads < 1 || model_dim % num_heads != 0) {
    throw std::invalid_argument("EncoderParams: model_dim must be a positive multiple of num_heads");
  }
  if (mlp_dim < 1) throw std::invalid_argument("EncoderParams: bad mlp_dim");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("EncoderParams: dropout_rate outside [0, 1)");
  }
  const std::size_t c = static_cast<std::size_t>(model_dim);
  const std::size_t e = static_cast<std::size_t>(mlp_dim);
  check_tensor_shape(ln1_gain, {c}, "ln1_gain");
  check_tensor_shape(ln1_bias, {c}, "ln1_bias");
  check_tensor_shape(wq, {c, c}, "wq");
  check_tensor_shape(wk, {c, c}, "wk");
  check_tensor_shape(wv, {c, c}, "wv");
  check_tensor_shape(wo, {c, c}, "wo");
  check_tensor_shape(ln2_gain, {c}, "ln2_gain");
  check_tensor_shape(ln2_bias, {c}, "ln2_bias");
  check_tensor_shape(mlp_w1, {c, e}, "mlp_w1");
  check_tensor_shape(mlp_b1, {e}, "mlp_b1");
  check_tensor_shape(mlp_w2, {e, c}, "mlp_w2");
  check_tensor_shape(mlp_b2, {c}, "mlp_b2");
}

MhaResult multi_head_attention(const Tensor& x, const EncoderParams& p) {
  check_encoder_input(x, p);
  AttnCache cache;
  Tensor out = attention_forward(x, p, &cache);
  return MhaResult{std::move(out), std::move(cache.attn)};
}

Tensor transformer_encoder_forward(const Tensor& x, const EncoderParams& p,
                                   bool train_mode, Rng* rng) {
  return run_encoder(x, p, train_mode, rng, nullptr);
}

std::vector<double> flatten_params(const EncoderParams& p) {
  p.validate();
  std::vector<double> flat;
  append(flat, p.ln1_gain);
  append(flat, p.ln1_bias);
  append(flat, p.wq);
  append(flat, p.wk);
  append(flat, p.wv);
  append(flat, p.wo);
  append(flat, p.ln2_gain);
  append(flat, p.ln2_bias);
  append(flat, p.mlp_w1);
  append(flat, p.mlp_b1);
  append(flat, p.mlp_w2);
  append(flat, p.mlp_b2);
  return flat;
}

void load_params(EncoderParams& p, const std::vector<double>& flat) {
  std::size_t total = p.ln1_gain.size() + p.ln1_bias.size() + p.wq.size() +
                      p.wk.size() + p.wv.size() + p.wo.size() +
                      p.ln2_gain.size() + p.ln2_bias.size() + p.mlp_w1.size() +
                      p.mlp_b1.size() + p.mlp_w2.size() + p.mlp_b2.size();
  if (flat.size() != total) {
    throw std::invalid_argument("load_params: flat vector length mismatch");
  }
  std::size_t pos = 0;
  pos = take(p.ln1_gain, flat, pos);
  pos = take(p.ln1_bias, flat, pos);
  pos = take(p.wq, flat, pos);
  pos = take(p.wk, flat, pos);
  pos = take(p.wv, flat, pos);
  pos = take(p.wo, flat, pos);
  pos = take(p.ln2_gain, flat, pos);
  pos = take(p.ln2_bias, flat, pos);
  pos = take(p.mlp_w1, flat, pos);
  pos = take(p.mlp_b1, flat, pos);
  pos = take(p.mlp_w2, flat, pos);
  pos = take(p.mlp_b2, flat, pos);
  p.validate();
}

std::vector<double> encoder_param_gradients(const Tensor& x, const EncoderParams& p) {
  EncoderTrace trace;
  Tensor out = run_encoder(x, p, false, nullptr, &trace);
  const std::size_t n = out.dim(0), c = out.dim(1);

  std::vector<double> dg1(c, 0.0), db1ln(c, 0.0), dg2(c, 0.0), db2ln(c, 0.0);
  std::vector<double> dwq(c * c), dwk(c * c), dwv(c * c), dwo(c * c);
  const std::size_t e = static_cast<std::size_t>(p.mlp_dim);
  std::vector<double> dw1(c * e), dbm1(e, 0.0), dw2(e * c), dbm2(c, 0.0);

  Tensor dout({n, c}, 1.0);
  if (p.pre_norm) {
    Tensor dy = dout;
    Tensor dv = mlp_backward(dout, p, trace.mlp, dw1.data(), dbm1.data(),
                             dw2.data(), dbm2.data());
    Tensor dy2 = layer_norm_backward(dv, trace.ln2, p.ln2_gain, dg2.data(), db2ln.data());
    for (std::size_t i = 0; i < dy.size(); ++i) dy[i] += dy2[i];
    Tensor du = attention_backward(dy, p, trace.attn, dwq.data(), dwk.data(),
                                   dwv.data(), dwo.data());
    layer_norm_backward(du, trace.ln1, p.ln1_gain, dg1.data(), db1ln.data());
  } else {
    Tensor ds2 = layer_norm_backward(dout, trace.ln2, p.ln2_gain, dg2.data(), db2ln.data());
    Tensor dy = ds2;
    Tensor dy_mlp = mlp_backward(ds2, p, trace.mlp, dw1.data(), dbm1.data(),
                                 dw2.data(), dbm2.data());
    for (std::size_t i = 0; i < dy.size(); ++i) dy[i] += dy_mlp[i];
    Tensor ds1 = layer_norm_backward(dy, trace.ln1, p.ln1_gain, dg1.data(), db1ln.data());
    attention_backward(ds1, p, trace.attn, dwq.data(), dwk.data(), dwv.data(),
                       dwo.data());
  }

  std::vector<double> grad;
  auto push = [&grad](const std::vector<double>& v) {

    grad.insert(grad.end(), v.begin(), v.end());
  };
  push(dg1);
  push(db1ln);
  push(dwq);
  push(dwk);
  push(dwv);
  push(dwo);
  push(dg2);
  push(db2ln);
  push(dw1);
  push(dbm1);
  push(dw2);
  push(dbm2);
  return grad;
}

CbamParams CbamParams::create(int channels, int reduction, int kernel) {
  if (channels < 1 || reduction < 1 || channels % reduction != 0) {
    throw std::invalid_argument("CbamParams: reduction must divide channels");
  }
  if (kernel < 1 || kernel % 2 == 0) {
    throw std::invalid_argument("CbamParams: kernel must be odd");
  }
  const std::size_t c = static_cast<std::size_t>(channels);
  const std::size_t hid = c / static_cast<std::size_t>(reduction);
  const std::size_t k = static_cast<std::size_t>(kernel);
  CbamParams p;
  p.channels = channels;
  p.reduction = reduction;
  p.kernel = kernel;
  p.mlp_w1 = Tensor({hid, c});
  p.mlp_w2 = Tensor({c, hid});
  p.conv = Tensor({2, k, k});
  p.conv_bias = Tensor({1});
  return p;
}

CbamParams CbamParams::random(int channels, int reduction, int kernel, Rng& rng) {
  CbamParams p = create(channels, reduction, kernel);
  const double cscale = 1.0 / std::sqrt(static_cast<double>(channels));
  for (double& v : p.mlp_w1.data()) v = cscale * rng.normal();
  for (double& v : p.mlp_w2.data()) v = cscale * rng.normal();
  for (double& v : p.conv.data()) v = 0.1 * rng.normal();
  p.conv_bias[0] = 0.05 * rng.normal();
  return p;
}

void CbamParams::validate() const {
  if (channels < 1 || reduction < 1 || channels % reduction != 0) {
    throw std::invalid_argument("CbamParams: reduction must divide channels");
  }
  if (kernel < 1 || kernel % 2 == 0) {
    throw std::invalid_argument("CbamParams: kernel must be odd");
  }
  const std::size_t c = static_cast<std::size_t>(channels);
  const std::size_t hid = c / static_cast<std::size_t>(reduction);
  const std::size_t k = static_cast<std::size_t>(kernel);
  check_tensor_shape(mlp_w1, {hid, c}, "cbam mlp_w1");
  check_tensor_shape(mlp_w2, {c, hid}, "cbam mlp_w2");
  check_tensor_shape(conv, {2, k, k}, "cbam conv");
  check_tensor_shape(conv_bias, {1}, "cbam conv_bias");
}

namespace {

struct CbamTrace {
  std::vector<double> avg, mx;          // channel pools [C]
  std::vector<double> za, zm, ha, hm;   // MLP hidden, pre and post ReLU
  std::vector<double> mc;               // channel attention [C]
  Tensor f1;                            // Mc-scaled input [C, H, W]
  Tensor amap, mmap;                    // spatial pools [H, W]
  std::vector<std::size_t> argmax_c;    // per position, channel of the max
  Tensor ms;                            // spatial attention [H, W]
};

Tensor cbam_run(const Tensor& f, const CbamParams& p, CbamTrace* trace) {
  p.validate();
  if (f.rank() != 3 || f.dim(0) != static_cast<std::size_t>(p.channels)) {
    throw std::invalid_argument("cbam: input must be [channels, H, W]");
  }
  if (!f.all_finite()) throw std::invalid_argument("cbam: non-finite input");
  const std::size_t c = f.dim(0), hgt = f.dim(1), wid = f.dim(2);
  const std::size_t hid = c / static_cast<std::size_t>(p.reduction);
  const std::size_t hw = hgt * wid;

  std::vector<double> avg(c), mx(c), buf;
  for (std::size_t ch = 0; ch < c; ++ch) {
    buf.assign(f.data().begin() + static_cast<std::ptrdiff_t>(ch * hw),
               f.data().begin() + static_cast<std::ptrdiff_t>((ch + 1) * hw));
    mx[ch] = *std::max_element(buf.begin(), buf.end());
    avg[ch] = stable_sum(buf) / static_cast<double>(hw);
  }

  auto mlp_hidden = [&](const std::vector<double>& in, std::vector<double>& z,
                        std::vector<double>& h) {
    z.assign(hid, 0.0);
    for (std::size_t q = 0; q < hid; ++q) {
      double s = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) s += p.mlp_w1.at2(q, ch) * in[ch];
      z[q] = s;
    }
    h = z;
    for (double& v : h) v = std::max(0.0, v);
  };
  std::vector<double> za, zm, ha, hm;
  mlp_hidden(avg, za, ha);
  mlp_hidden(mx, zm, hm);

  std::vector<double> mc(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double ra = 0.0, rm = 0.0;
    for (std::size_t q = 0; q < hid; ++q) {
      ra += p.mlp_w2.at2(ch, q) * ha[q];
      rm += p.mlp_w2.at2(ch, q) * hm[q];
    }
    mc[ch] = sigmoid(ra + rm);
  }

  Tensor f1({c, hgt, wid});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < hw; ++i) {
      f1.data()[ch * hw + i] = mc[ch] * f.data()[ch * hw + i];
    }
  }

  Tensor amap({hgt, wid}), mmap({hgt, wid});
  std::vector<std::size_t> argmax_c(hw, 0);
  for (std::size_t y = 0; y < hgt; ++y) {
    for (std::size_t x = 0; x < wid; ++x) {
      buf.resize(c);
      double best = -std::numeric_limits<double>::infinity();
      std::size_t best_ch = 0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = f1.at3(ch, y, x);
        buf[ch] = v;
        if (v > best) {
          best = v;
          best_ch = ch;
        }
      }
      amap.at2(y, x) = stable_sum(buf) / static_cast<double>(c);
      mmap.at2(y, x) = best;
      argmax_c[y * wid + x] = best_ch;
    }
  }

  const std::size_t k = static_cast<std::size_t>(p.kernel);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  Tensor ms({hgt, wid});
  for (std::size_t y = 0; y < hgt; ++y) {
    for (std::size_t x = 0; x < wid; ++x) {
      double s = p.conv_bias[0];
      for (std::size_t ki = 0; ki < k; ++ki) {
        const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ki) - pad;
        if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(hgt)) continue;
        for (std::size_t kj = 0; kj < k; ++kj) {
          const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kj) - pad;
          if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(wid)) continue;
          const std::size_t uy = static_cast<std::size_t>(sy);
          const std::size_t ux = static_cast<std::size_t>(sx);
          s += p.conv.at3(0, ki, kj) * amap.at2(uy, ux) +
               p.conv.at3(1, ki, kj) * mmap.at2(uy, ux);
        }
      }
      ms.at2(y, x) = sigmoid(s);
    }
  }

  Tensor out({c, hgt, wid});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < hgt; ++y) {
      for (std::size_t x = 0; x < wid; ++x) {
        out.at3(ch, y, x) = ms.at2(y, x) * f1.at3(ch, y, x);
      }
    }
  }

  if (trace) {
    trace->avg = std::move(avg);
    trace->mx = std::move(mx);
    trace->za = std::move(za);
    trace->zm = std::move(zm);
    trace->ha = std::move(ha);
    trace->hm = std::move(hm);
    trace->mc = std::move(mc);
    trace->f1 = std::move(f1);
    trace->amap = std::move(amap);
    trace->mmap = std::move(mmap);
    trace->argmax_c = std::move(argmax_c);
    trace->ms = std::move(ms);
  }
  return out;
}

}  // namespace

Tensor cbam_forward(const Tensor& f, const CbamParams& p) {
  return cbam_run(f, p, nullptr);
}

std::vector<double> cbam_param_gradients(const Tensor& f, const CbamParams& p) {
  CbamTrace t;
  cbam_run(f, p, &t);
  const std::size_t c = f.dim(0), hgt = f.dim(1), wid = f.dim(2);
  const std::size_t hid = c / static_cast<std::size_t>(p.reduction);
  const std::size_t k = static_cast<std::size_t>(p.kernel);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t hw = hgt * wid;

  // Loss is the plain sum of outputs, so dOut = 1 everywhere.
  Tensor df1({c, hgt, wid});
  Tensor dms({hgt, wid});
  for (std::size_t y = 0; y < hgt; ++y) {
    for (std::size_t x = 0; x < wid; ++x) {
      double s = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        s += t.f1.at3(ch, y, x);
        df1.at3(ch, y, x) = t.ms.at2(y, x);
      }
      dms.at2(y, x) = s;
    }
  }

  Tensor ds({hgt, wid});
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double m = t.ms[i];
    ds[i] = dms[i] * m * (1.0 - m);
  }

  std::vector<double> dconv(2 * k * k, 0.0);
  double dbias = 0.0;
  Tensor damap({hgt, wid}), dmmap({hgt, wid});
  for (std::size_t y = 0; y < hgt; ++y) {
    for (std::size_t x = 0; x < wid; ++x) {
      const double g = ds.at2(y, x);
      dbias += g;
      if (g == 0.0) continue;
      for (std::size_t ki = 0; ki < k; ++ki) {
        const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ki) - pad;
        if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(hgt)) continue;
        for (std::size_t kj = 0; kj < k; ++kj) {
          const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kj) - pad;
          if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(wid)) continue;
          const std::size_t uy = static_cast<std::size_t>(sy);
          const std::size_t ux = static_cast<std::size_t>(sx);
          dconv[(0 * k + ki) * k + kj] += g * t.amap.at2(uy, ux);
          dconv[(1 * k + ki) * k + kj] += g * t.mmap.at2(uy, ux);
          damap.at2(uy, ux) += g * p.conv.at3(0, ki, kj);
          dmmap.at2(uy, ux) += g * p.conv.at3(1, ki, kj);
        }
      }
    }
  }

  for (std::size_t y = 0; y < hgt; ++y) {
    for (std::size_t x = 0; x < wid; ++x) {
      const double da = damap.at2(y, x) / static_cast<double>(c);
      for (std::size_t ch = 0; ch < c; ++ch) df1.at3(ch, y, x) += da;
      df1.at3(t.argmax_c[y * wid + x], y, x) += dmmap.at2(y, x);
    }
  }

  std::vector<double> dmc(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) {
      s += df1.data()[ch * hw + i] * f.data()[ch * hw + i];
    }
    dmc[ch] = s;
  }

  std::vector<double> dr(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    dr[ch] = dmc[ch] * t.mc[ch] * (1.0 - t.mc[ch]);
  }

  std::vector<double> dw1(hid * c, 0.0), dw2(c * hid, 0.0);
  auto branch = [&](const std::vector<double>& pooled, const std::vector<double>& z,
                    const std::vector<double>& h) {
    std::vector<double> dh(hid, 0.0);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t q = 0; q < hid; ++q) {
        dw2[ch * hid + q] += dr[ch] * h[q];
        dh[q] += p.mlp_w2.at2(ch, q) * dr[ch];
      }
    }
    for (std::size_t q = 0; q < hid; ++q) {
      const double dz = z[q] > 0.0 ? dh[q] : 0.0;
      if (dz == 0.0) continue;
      for (std::size_t ch = 0; ch < c; ++ch) dw1[q * c + ch] += dz * pooled[ch];
    }
  };
  branch(t.avg, t.za, t.ha);
  branch(t.mx, t.zm, t.hm);

  std::vector<double> grad;
  grad.reserve(dw1.size() + dw2.size() + dconv.size() + 1);
  grad.insert(grad.end(), dw1.begin(), dw1.end());
  grad.insert(grad.end(), dw2.begin(), dw2.end());
  grad.insert(grad.end(), dconv.begin(), dconv.end());
  grad.push_back(dbias);
  return grad;
}

std::vector<double> flatten_params(const CbamParams& p) {
  p.validate();
  std::vector<double> flat;
  append(flat, p.mlp_w1);
  append(flat, p.mlp_w2);
  append(flat, p.conv);
  append(flat, p.conv_bias);
  return flat;
}

void load_params(CbamParams& p, const std::vector<double>& flat) {
  const std::size_t total =
      p.mlp_w1.size() + p.mlp_w2.size() + p.conv.size() + p.conv_bias.size();
  if (flat.size() != total) {
    throw std::invalid_argument("load_params: flat vector length mismatch");
  }
  std::size_t pos = 0;
  pos = take(p.mlp_w1, flat, pos);
  pos = take(p.mlp_w2, flat, pos);
  pos = take(p.conv, flat, pos);
  pos = take(p.conv_bias, flat, pos);
  p.validate();
}

void HeadSpec::validate() const {
  if (stride != 4 && stride != 8 && stride != 16 && stride != 32) {
    throw std::invalid_argument("HeadSpec: stride must be one of 4, 8, 16, 32");
  }
  if (anchors.empty()) throw std::invalid_argument("HeadSpec: no anchors");
  for (const auto& a : anchors) {
    if (!(a.first > 0.0) || !(a.second > 0.0)) {
      throw std::invalid_argument("HeadSpec: anchors must be positive");
    }
  }
  if (num_classes < 1) throw std::invalid_argument("HeadSpec: num_classes < 1");
}

std::vector<HeadSpec> default_head_specs(int num_classes) {
  if (num_classes < 1) throw std::invalid_argument("default_head_specs: num_classes < 1");
  std::vector<HeadSpec> specs;
  for (int stride : {4, 8, 16, 32}) {
    const double s = static_cast<double>(stride);
    HeadSpec spec;
    spec.stride = stride;
    spec.anchors = {{2.0 * s, 2.5 * s}, {4.0 * s, 5.0 * s}, {8.0 * s, 10.0 * s}};
    spec.num_classes = num_classes;
    specs.push_back(std::move(spec));
  }
  return specs;
}

std::vector<ScoredBox> yolo_head_decode(const Tensor& raw, const HeadSpec& spec,
                                        double conf_thr) {
  spec.validate();
  if (raw.rank() != 4 || raw.dim(0) != spec.anchors.size() ||
      raw.dim(3) != 5 + static_cast<std::size_t>(spec.num_classes)) {
    throw std::invalid_argument("yolo_head_decode: raw shape does not match spec");
  }
  if (!raw.all_finite()) throw std::invalid_argument("yolo_head_decode: non-finite logits");

  const std::size_t num_anchors = raw.dim(0), rows = raw.dim(1), cols = raw.dim(2);
  const std::size_t num_classes = static_cast<std::size_t>(spec.num_classes);
  const double stride = static_cast<double>(spec.stride);

  std::vector<ScoredBox> out;
  for (std::size_t a = 0; a < num_anchors; ++a) {
    for (std::size_t gy = 0; gy < rows; ++gy) {
      for (std::size_t gx = 0; gx < cols; ++gx) {
        std::size_t best = 0;
        for (std::size_t q = 1; q < num_classes; ++q) {
          if (raw.at4(a, gy, gx, 5 + q) > raw.at4(a, gy, gx, 5 + best)) best = q;
        }
        const double score =
            sigmoid(raw.at4(a, gy, gx, 4)) * sigmoid(raw.at4(a, gy, gx, 5 + best));
        if (score < conf_thr) continue;
        const double cx =
            (2.0 * sigmoid(raw.at4(a, gy, gx, 0)) - 0.5 + static_cast<double>(gx)) * stride;
        const double cy =
            (2.0 * sigmoid(raw.at4(a, gy, gx, 1)) - 0.5 + static_cast<double>(gy)) * stride;
        const double sw = 2.0 * sigmoid(raw.at4(a, gy, gx, 2));
        const double sh = 2.0 * sigmoid(raw.at4(a, gy, gx, 3));
        const double bw = sw * sw * spec.anchors[a].first;
        const double bh = sh * sh * spec.anchors[a].second;
        out.push_back(ScoredBox{
            BBox(cx - 0.5 * bw, cy - 0.5 * bh, cx + 0.5 * bw, cy + 0.5 * bh),
            score, static_cast<int>(best)});
      }
    }
  }
  return out;
}

double cosine_lr(int epoch, int total_epochs, double lr0, double final_fraction) {
  if (total_epochs < 2) throw std::invalid_argument("cosine_lr: total_epochs < 2");
  if (epoch < 0 || epoch > total_epochs - 1) {
    throw std::invalid_argument("cosine_lr: epoch out of range");
  }
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) {
    throw std::invalid_argument("cosine_lr: lr0 must be positive");
  }
  if (!(final_fraction >= 0.0 && final_fraction <= 1.0)) {
    throw std::invalid_argument("cosine_lr: final_fraction outside [0, 1]");
  }
  const double f = final_fraction;
  const double phase = kPi * static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
  return lr0 * (f + (1.0 - f) * (1.0 + std::cos(phase)) / 2.0);
}

}  // namespace dronedet
