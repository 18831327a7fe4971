/*
 * Copyright 2026 The FundusNet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fnet/layers.hpp"

#include <cmath>
#include <random>
#include <string>

#include "fnet/errors.hpp"

namespace fnet {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ShapeError(message);
}

struct Nhwc {
  std::size_t n, h, w, c;
};

Nhwc dims4(const Tensor& x, const char* op) {
  require(x.shape().rank() == 4,
          std::string(op) + ": expected [N,H,W,C] input, got " + x.shape().to_string());
  return {x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]};
}

void add_into(Tensor& acc, const Tensor& t) {
  double* pa = acc.data();
  const double* pt = t.data();
  for (std::size_t i = 0; i < acc.size(); ++i) pa[i] += pt[i];
}

// Adds bias[j] to every row of a [rows, cols] tensor.
void add_row_bias(Tensor& t, const Tensor& bias) {
  const std::size_t cols = bias.size();
  const std::size_t rows = t.size() / cols;
  double* p = t.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) p[r * cols + j] += bias[j];
  }
}

Tensor column_sum(const Tensor& t) {
  const std::size_t cols = t.shape()[t.shape().rank() - 1];
  const std::size_t rows = t.size() / cols;
  Tensor out(Shape{cols});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) out[j] += t[r * cols + j];
  }
  return out;
}

Tensor gate_preactivation(const Tensor& concat, const LstmGate& gate) {
  Tensor a = matmul(concat, gate.weight);
  add_row_bias(a, gate.bias);
  return a;
}

void check_gate(const LstmGate& g, std::size_t rows, std::size_t hidden, const char* name) {
  require(g.weight.shape() == Shape{rows, hidden} && g.bias.shape() == Shape{hidden},
          std::string("lstm: ") + name + " gate parameters must be [" + std::to_string(rows) +
              "," + std::to_string(hidden) + "] and [" + std::to_string(hidden) + "]");
}

void accumulate(LstmParams& acc, const LstmParams& g) {
  for (auto [a, b] : {std::pair{&acc.forget, &g.forget}, std::pair{&acc.input, &g.input},
                      std::pair{&acc.candidate, &g.candidate}, std::pair{&acc.output, &g.output}}) {
    add_into(a->weight, b->weight);
    add_into(a->bias, b->bias);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2D

Forward<ConvCache> conv2d_forward(const Tensor& x, const ConvParams& p) {
  const auto [n, h, w, cin] = dims4(x, "conv2d_forward");
  const Shape& ks = p.kernels.shape();
  require(ks.rank() == 4 && ks[0] == kConvKernelSize && ks[1] == kConvKernelSize,
          "conv2d_forward: kernels must be [3,3,Cin,Cout], got " + ks.to_string());
  require(ks[2] == cin, "conv2d_forward: input has " + std::to_string(cin) +
                            " channels but kernels expect " + std::to_string(ks[2]));
  const std::size_t cout = ks[3];
  require(p.bias.shape() == Shape{cout}, "conv2d_forward: bias must be [" + std::to_string(cout) + "]");

  Tensor y(Shape{n, h, w, cout});
  const double* px = x.data();
  const double* pk = p.kernels.data();
  double* py = y.data();
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  for (std::size_t b = 0; b < n; ++b) {
    for (long i = 0; i < H; ++i) {
      for (long j = 0; j < W; ++j) {
        double* out = py + ((b * h + i) * w + j) * cout;
        for (std::size_t co = 0; co < cout; ++co) out[co] = p.bias[co];
        for (long di = 0; di < 3; ++di) {
          const long si = i + di - 1;
          if (si < 0 || si >= H) continue;
          for (long dj = 0; dj < 3; ++dj) {
            const long sj = j + dj - 1;
            if (sj < 0 || sj >= W) continue;
            const double* in = px + ((b * h + si) * w + sj) * cin;
            const double* k = pk + (di * 3 + dj) * cin * cout;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double v = in[ci];
              const double* krow = k + ci * cout;
              for (std::size_t co = 0; co < cout; ++co) out[co] += v * krow[co];
            }
          }
        }
      }
    }
  }
  return {std::move(y), ConvCache{x}};
}

ConvGrads conv2d_backward(const Tensor& dy, const ConvCache& cache, const ConvParams& p) {
  const Tensor& x = cache.input;
  const auto [n, h, w, cin] = dims4(x, "conv2d_backward");
  const std::size_t cout = p.kernels.shape()[3];
  require(dy.shape() == Shape{n, h, w, cout},
          "conv2d_backward: dy " + dy.shape().to_string() + " does not match forward output [" +
              std::to_string(n) + "," + std::to_string(h) + "," + std::to_string(w) + "," +
              std::to_string(cout) + "]");

  ConvGrads g{Tensor(x.shape()), Tensor(p.kernels.shape()), column_sum(dy)};
  const double* px = x.data();
  const double* pk = p.kernels.data();
  const double* pdy = dy.data();
  double* pdx = g.dx.data();
  double* pdk = g.dkernels.data();
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  for (std::size_t b = 0; b < n; ++b) {
    for (long i = 0; i < H; ++i) {
      for (long j = 0; j < W; ++j) {
        const double* grad = pdy + ((b * h + i) * w + j) * cout;
        for (long di = 0; di < 3; ++di) {
          const long si = i + di - 1;
          if (si < 0 || si >= H) continue;
          for (long dj = 0; dj < 3; ++dj) {
            const long sj = j + dj - 1;
            if (sj < 0 || sj >= W) continue;
            const std::size_t in_off = ((b * h + si) * w + sj) * cin;
            const std::size_t k_off = (di * 3 + dj) * cin * cout;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double v = px[in_off + ci];
              const double* krow = pk + k_off + ci * cout;
              double* dkrow = pdk + k_off + ci * cout;
              double acc = 0.0;
              for (std::size_t co = 0; co < cout; ++co) {
                acc += grad[co] * krow[co];
                dkrow[co] += v * grad[co];
              }
              pdx[in_off + ci] += acc;
            }
          }
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// MaxPool

Forward<MaxPoolCache> maxpool_forward(const Tensor& x) {
  const auto [n, h, w, c] = dims4(x, "maxpool_forward");
  require(h >= 2 && w >= 2, "maxpool_forward: spatial extent " + x.shape().to_string() +
                                " is smaller than the 2x2 window");
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor y(Shape{n, oh, ow, c});
  MaxPoolCache cache{x.shape(), std::vector<std::size_t>(y.size())};
  std::size_t o = 0;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        for (std::size_t ch = 0; ch < c; ++ch, ++o) {
          std::size_t best = ((b * h + 2 * i) * w + 2 * j) * c + ch;
          for (std::size_t di = 0; di < 2; ++di) {
            for (std::size_t dj = 0; dj < 2; ++dj) {
              const std::size_t idx = ((b * h + 2 * i + di) * w + 2 * j + dj) * c + ch;
              if (x[idx] > x[best]) best = idx;  // strict: first occurrence wins ties
            }
          }
          y[o] = x[best];
          cache.argmax[o] = best;
        }
      }
    }
  }
  return {std::move(y), std::move(cache)};
}

Tensor maxpool_backward(const Tensor& dy, const MaxPoolCache& cache) {
  require(dy.size() == cache.argmax.size() && dy.shape().rank() == 4,
          "maxpool_backward: dy " + dy.shape().to_string() + " does not match pooled output");
  Tensor dx(cache.input_shape);
  for (std::size_t o = 0; o < dy.size(); ++o) dx[cache.argmax[o]] += dy[o];
  return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNormParams BatchNormParams::identity(std::size_t channels) {
  return {Tensor(Shape{channels}, 1.0), Tensor(Shape{channels}, 0.0), Tensor(Shape{channels}, 0.0),
          Tensor(Shape{channels}, 1.0)};
}

Forward<BatchNormCache> batchnorm_forward(const Tensor& x, const BatchNormParams& p, Mode mode) {
  const auto [n, h, w, c] = dims4(x, "batchnorm_forward");
  for (const Tensor* t : {&p.gamma, &p.beta, &p.running_mean, &p.running_var}) {
    require(t->shape() == Shape{c},
            "batchnorm_forward: parameters must have " + std::to_string(c) + " channels");
  }
  if (!(p.epsilon > 0.0)) throw ParameterError("batchnorm_forward: epsilon must be > 0");
  const std::size_t m = n * h * w;
  if (mode == Mode::train && m < 2) {
    throw ShapeError("batchnorm_forward: degenerate batch, N*H*W = " + std::to_string(m) +
                     " (train mode needs at least 2)");
  }

  BatchNormCache cache;
  cache.mode = mode;
  cache.inv_std.resize(c);
  std::vector<double> mean(c, 0.0), var(c, 0.0);
  if (mode == Mode::train) {
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t ch = 0; ch < c; ++ch) mean[ch] += x[r * c + ch];
    }
    for (std::size_t ch = 0; ch < c; ++ch) mean[ch] /= static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double d = x[r * c + ch] - mean[ch];
        var[ch] += d * d;
      }
    }
    for (std::size_t ch = 0; ch < c; ++ch) var[ch] /= static_cast<double>(m);
    cache.updated_mean = Tensor(Shape{c});
    cache.updated_var = Tensor(Shape{c});
    for (std::size_t ch = 0; ch < c; ++ch) {
      cache.updated_mean[ch] = p.momentum * p.running_mean[ch] + (1.0 - p.momentum) * mean[ch];
      cache.updated_var[ch] = p.momentum * p.running_var[ch] + (1.0 - p.momentum) * var[ch];
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = p.running_mean[ch];
      var[ch] = p.running_var[ch];
    }
  }
  for (std::size_t ch = 0; ch < c; ++ch) cache.inv_std[ch] = 1.0 / std::sqrt(var[ch] + p.epsilon);

  Tensor y(x.shape());
  cache.x_hat = Tensor(x.shape());
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t k = r * c + ch;
      const double xh = (x[k] - mean[ch]) * cache.inv_std[ch];
      cache.x_hat[k] = xh;
      y[k] = p.gamma[ch] * xh + p.beta[ch];
    }
  }
  return {std::move(y), std::move(cache)};
}

BatchNormGrads batchnorm_backward(const Tensor& dy, const BatchNormCache& cache,
                                  const BatchNormParams& p) {
  require(dy.shape() == cache.x_hat.shape(), "batchnorm_backward: dy " + dy.shape().to_string() +
                                                 " does not match forward output " +
                                                 cache.x_hat.shape().to_string());
  const std::size_t c = cache.inv_std.size();
  const std::size_t m = dy.size() / c;
  BatchNormGrads g{Tensor(dy.shape()), Tensor(Shape{c}), Tensor(Shape{c})};
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t k = r * c + ch;
      g.dbeta[ch] += dy[k];
      g.dgamma[ch] += dy[k] * cache.x_hat[k];
    }
  }
  if (cache.mode == Mode::infer) {
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        g.dx[r * c + ch] = dy[r * c + ch] * p.gamma[ch] * cache.inv_std[ch];
      }
    }
    return g;
  }
  // Mean and variance are functions of x:
  // dx = gamma * inv_std / M * (M dy - sum(dy) - x_hat * sum(dy x_hat)).
  const double md = static_cast<double>(m);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t k = r * c + ch;
      g.dx[k] = p.gamma[ch] * cache.inv_std[ch] / md *
                (md * dy[k] - g.dbeta[ch] - cache.x_hat[k] * g.dgamma[ch]);
    }
  }
  return g;
}

void commit_running_stats(BatchNormParams& p, const BatchNormCache& cache) {
  if (cache.mode != Mode::train) return;
  p.running_mean = cache.updated_mean;
  p.running_var = cache.updated_var;
}

// ---------------------------------------------------------------------------
// Dropout

Forward<DropoutCache> dropout_forward(const Tensor& x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout_forward: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::infer || rate == 0.0) return {x, DropoutCache{}};
  const double keep_scale = 1.0 / (1.0 - rate);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Tensor mask(x.shape());
  for (double& m : mask.values()) m = uniform(rng) < rate ? 0.0 : keep_scale;
  return dropout_forward_masked(x, mask);
}

Forward<DropoutCache> dropout_forward_masked(const Tensor& x, const Tensor& mask) {
  if (mask.empty()) return {x, DropoutCache{}};
  require(mask.shape() == x.shape(), "dropout: mask " + mask.shape().to_string() +
                                         " does not match input " + x.shape().to_string());
  return {elementwise(x, mask, Binary::mul), DropoutCache{mask}};
}

Tensor dropout_backward(const Tensor& dy, const DropoutCache& cache) {
  if (cache.mask.empty()) return dy;
  require(dy.shape() == cache.mask.shape(),
          "dropout_backward: dy " + dy.shape().to_string() + " does not match forward output");
  return elementwise(dy, cache.mask, Binary::mul);
}

// ---------------------------------------------------------------------------
// Dense

Forward<DenseCache> dense_forward(const Tensor& x, const DenseParams& p, Activation activation) {
  require(x.shape().rank() == 2, "dense_forward: expected [N,in] input, got " + x.shape().to_string());
  require(p.weight.shape().rank() == 2 && p.weight.shape()[0] == x.shape()[1],
          "dense_forward: input " + x.shape().to_string() + " does not match weight " +
              p.weight.shape().to_string());
  require(p.bias.shape() == Shape{p.weight.shape()[1]}, "dense_forward: bias must be [out]");
  Tensor y = matmul(x, p.weight);
  add_row_bias(y, p.bias);
  switch (activation) {
    case Activation::none:
      break;
    case Activation::relu:
      y = map_unary(y, Unary::relu);
      break;
    case Activation::sigmoid:
      y = map_unary(y, Unary::sigmoid);
      break;
  }
  return {y, DenseCache{x, y, activation}};
}

DenseGrads dense_backward(const Tensor& dy, const DenseCache& cache, const DenseParams& p) {
  require(dy.shape() == cache.output.shape(), "dense_backward: dy " + dy.shape().to_string() +
                                                  " does not match forward output " +
                                                  cache.output.shape().to_string());
  Tensor g = dy;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double out = cache.output[k];
    switch (cache.activation) {
      case Activation::none:
        break;
      case Activation::relu:
        g[k] = out > 0.0 ? g[k] : 0.0;
        break;
      case Activation::sigmoid:
        g[k] *= out * (1.0 - out);
        break;
    }
  }
  return {matmul_nt(g, p.weight), matmul_tn(cache.input, g), column_sum(g)};
}

// ---------------------------------------------------------------------------
// LSTM

LstmParams LstmParams::zeros(std::size_t input_size, std::size_t hidden_size) {
  const Shape ws{hidden_size + input_size, hidden_size};
  const Shape bs{hidden_size};
  LstmGate g{Tensor(ws), Tensor(bs)};
  return {g, g, g, g};
}

LstmState LstmState::zeros(std::size_t batch, std::size_t hidden_size) {
  return {Tensor(Shape{batch, hidden_size}), Tensor(Shape{batch, hidden_size})};
}

LstmStepResult lstm_step(const Tensor& x_t, const LstmState& prev, const LstmParams& p) {
  require(x_t.shape().rank() == 2, "lstm_step: expected [N,in] input, got " + x_t.shape().to_string());
  const std::size_t n = x_t.shape()[0], in = x_t.shape()[1];
  const std::size_t hidden = p.hidden_size();
  const std::size_t rows = hidden + in;
  check_gate(p.forget, rows, hidden, "forget");
  check_gate(p.input, rows, hidden, "input");
  check_gate(p.candidate, rows, hidden, "candidate");
  check_gate(p.output, rows, hidden, "output");
  require(prev.h.shape() == Shape{n, hidden} && prev.c.shape() == Shape{n, hidden},
          "lstm_step: state must be [" + std::to_string(n) + "," + std::to_string(hidden) + "]");

  LstmStepCache cache;
  cache.concat = Tensor(Shape{n, rows});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t j = 0; j < hidden; ++j) cache.concat[b * rows + j] = prev.h[b * hidden + j];
    for (std::size_t j = 0; j < in; ++j) cache.concat[b * rows + hidden + j] = x_t[b * in + j];
  }
  cache.forget = map_unary(gate_preactivation(cache.concat, p.forget), Unary::sigmoid);
  cache.input = map_unary(gate_preactivation(cache.concat, p.input), Unary::sigmoid);
  cache.candidate = map_unary(gate_preactivation(cache.concat, p.candidate), Unary::tanh);
  cache.output = map_unary(gate_preactivation(cache.concat, p.output), Unary::sigmoid);
  cache.cell_prev = prev.c;
  cache.cell = elementwise(elementwise(cache.forget, prev.c, Binary::mul),
                           elementwise(cache.input, cache.candidate, Binary::mul), Binary::add);
  cache.cell_tanh = map_unary(cache.cell, Unary::tanh);
  LstmState next{elementwise(cache.output, cache.cell_tanh, Binary::mul), cache.cell};
  return {std::move(next), std::move(cache)};
}

LstmStepGrads lstm_step_backward(const Tensor& dh, const Tensor& dc, const LstmStepCache& cache,
                                 const LstmParams& p) {
  require(dh.shape() == cache.cell.shape() && dc.shape() == cache.cell.shape(),
          "lstm_step_backward: gradients must match state shape " + cache.cell.shape().to_string());
  const std::size_t n = cache.cell.shape()[0];
  const std::size_t hidden = p.hidden_size();
  const std::size_t rows = cache.concat.shape()[1];
  const std::size_t in = rows - hidden;

  Tensor da_f(dh.shape()), da_i(dh.shape()), da_c(dh.shape()), da_o(dh.shape());
  LstmStepGrads g;
  g.dprev.c = Tensor(dh.shape());
  for (std::size_t k = 0; k < dh.size(); ++k) {
    const double f = cache.forget[k], i = cache.input[k], cand = cache.candidate[k];
    const double o = cache.output[k], th = cache.cell_tanh[k];
    const double dcell = dc[k] + dh[k] * o * (1.0 - th * th);
    da_o[k] = dh[k] * th * o * (1.0 - o);
    da_f[k] = dcell * cache.cell_prev[k] * f * (1.0 - f);
    da_i[k] = dcell * cand * i * (1.0 - i);
    da_c[k] = dcell * i * (1.0 - cand * cand);
    g.dprev.c[k] = dcell * f;
  }

  const std::pair<const LstmGate*, const Tensor*> gates[] = {
      {&p.forget, &da_f}, {&p.input, &da_i}, {&p.candidate, &da_c}, {&p.output, &da_o}};
  LstmGate* dgates[] = {&g.dparams.forget, &g.dparams.input, &g.dparams.candidate,
                        &g.dparams.output};
  Tensor dconcat(Shape{n, rows});
  for (std::size_t q = 0; q < 4; ++q) {
    const auto [gate, da] = gates[q];
    dgates[q]->weight = matmul_tn(cache.concat, *da);
    dgates[q]->bias = column_sum(*da);
    add_into(dconcat, matmul_nt(*da, gate->weight));
  }
  g.dprev.h = Tensor(Shape{n, hidden});
  g.dx = Tensor(Shape{n, in});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t j = 0; j < hidden; ++j) g.dprev.h[b * hidden + j] = dconcat[b * rows + j];
    for (std::size_t j = 0; j < in; ++j) g.dx[b * in + j] = dconcat[b * rows + hidden + j];
  }
  return g;
}

Forward<LstmCache> lstm_forward(const Tensor& xs, const LstmParams& p, bool return_sequence) {
  require(xs.shape().rank() == 3, "lstm_forward: expected [N,T,in] input, got " + xs.shape().to_string());
  return lstm_forward(xs, p, LstmState::zeros(xs.shape()[0], p.hidden_size()), return_sequence);
}

Forward<LstmCache> lstm_forward(const Tensor& xs, const LstmParams& p, const LstmState& init,
                                bool return_sequence) {
  require(xs.shape().rank() == 3, "lstm_forward: expected [N,T,in] input, got " + xs.shape().to_string());
  const std::size_t n = xs.shape()[0], steps = xs.shape()[1], in = xs.shape()[2];
  const std::size_t hidden = p.hidden_size();
  require(init.h.shape() == Shape{n, hidden} && init.c.shape() == Shape{n, hidden},
          "lstm_forward: initial state must be [" + std::to_string(n) + "," +
              std::to_string(hidden) + "]");

  LstmCache cache{{}, xs.shape(), return_sequence};
  cache.steps.reserve(steps);
  Tensor ys = return_sequence ? Tensor(Shape{n, steps, hidden}) : Tensor();
  LstmState state = init;
  Tensor x_t(Shape{n, in});
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t j = 0; j < in; ++j) x_t[b * in + j] = xs[(b * steps + t) * in + j];
    }
    LstmStepResult r = lstm_step(x_t, state, p);
    state = std::move(r.next);
    cache.steps.push_back(std::move(r.cache));
    if (return_sequence) {
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t j = 0; j < hidden; ++j) ys[(b * steps + t) * hidden + j] = state.h[b * hidden + j];
      }
    }
  }
  if (!return_sequence) ys = state.h;
  return {std::move(ys), std::move(cache)};
}

LstmGrads lstm_backward(const Tensor& dys, const LstmCache& cache, const LstmParams& p) {
  const std::size_t n = cache.input_shape[0], steps = cache.input_shape[1];
  const std::size_t in = cache.input_shape[2];
  const std::size_t hidden = p.hidden_size();
  const Shape expected = cache.return_sequence ? Shape{n, steps, hidden} : Shape{n, hidden};
  require(dys.shape() == expected, "lstm_backward: dys " + dys.shape().to_string() +
                                       " does not match forward output " + expected.to_string());

  LstmGrads g{Tensor(cache.input_shape), LstmParams::zeros(in, hidden), LstmState::zeros(n, hidden)};
  Tensor dh_next(Shape{n, hidden}), dc_next(Shape{n, hidden});
  for (std::size_t t = steps; t-- > 0;) {
    Tensor dh = dh_next;
    if (cache.return_sequence) {
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t j = 0; j < hidden; ++j) dh[b * hidden + j] += dys[(b * steps + t) * hidden + j];
      }
    } else if (t + 1 == steps) {
      add_into(dh, dys);
    }
    LstmStepGrads s = lstm_step_backward(dh, dc_next, cache.steps[t], p);
    accumulate(g.dparams, s.dparams);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t j = 0; j < in; ++j) g.dxs[(b * steps + t) * in + j] = s.dx[b * in + j];
    }
    dh_next = std::move(s.dprev.h);
    dc_next = std::move(s.dprev.c);
  }
  g.dinit = {std::move(dh_next), std::move(dc_next)};
  return g;
}

}  // namespace fnet
