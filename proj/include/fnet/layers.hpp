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

#pragma once

// Hand-written forward and backward passes for every layer in the network.
//
// Each forward returns its output together with a cache holding exactly what
// the matching backward needs. Backward passes take the layer's parameters
// explicitly; caches never alias parameter storage.

#include <cstddef>
#include <vector>

#include "fnet/random.hpp"
#include "fnet/tensor.hpp"

namespace fnet {

enum class Mode { train, infer };

template <class Cache>
struct Forward {
  Tensor y;
  Cache cache;
};

// ---------------------------------------------------------------------------
// Conv2D: 3x3 cross-correlation, stride 1, zero "same" padding.
//
// The textbook convolution flips the kernel; with learned kernels the flip is
// unobservable, so the layer computes cross-correlation like every CNN library.

struct ConvParams {
  Tensor kernels;  // [3, 3, in_channels, out_channels]
  Tensor bias;     // [out_channels]
};

struct ConvCache {
  Tensor input;
};

struct ConvGrads {
  Tensor dx;
  Tensor dkernels;
  Tensor dbias;
};

inline constexpr std::size_t kConvKernelSize = 3;

Forward<ConvCache> conv2d_forward(const Tensor& x, const ConvParams& p);
ConvGrads conv2d_backward(const Tensor& dy, const ConvCache& cache, const ConvParams& p);

// ---------------------------------------------------------------------------
// MaxPool 2x2, stride 2. Odd trailing rows/columns are dropped. Ties go to the
// first element of the window in row-major order.

struct MaxPoolCache {
  Shape input_shape;
  std::vector<std::size_t> argmax;  // flat input offset per output element
};

Forward<MaxPoolCache> maxpool_forward(const Tensor& x);
Tensor maxpool_backward(const Tensor& dy, const MaxPoolCache& cache);

// ---------------------------------------------------------------------------
// Per-channel batch normalization over N, H, W with the biased variance.

struct BatchNormParams {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  double epsilon = 1e-5;
  double momentum = 0.9;

  // gamma = 1, beta = 0, running mean 0, running variance 1.
  static BatchNormParams identity(std::size_t channels);
};

struct BatchNormCache {
  Mode mode = Mode::infer;
  Tensor x_hat;
  std::vector<double> inv_std;
  // Running statistics after this batch (train mode only); see commit_running_stats.
  Tensor updated_mean;
  Tensor updated_var;
};

struct BatchNormGrads {
  Tensor dx;
  Tensor dgamma;
  Tensor dbeta;
};

Forward<BatchNormCache> batchnorm_forward(const Tensor& x, const BatchNormParams& p, Mode mode);
BatchNormGrads batchnorm_backward(const Tensor& dy, const BatchNormCache& cache,
                                  const BatchNormParams& p);

// Forward passes never mutate parameters; the caller decides when to adopt the
// statistics a train-mode batch produced. Infer-mode caches are a no-op.
void commit_running_stats(BatchNormParams& p, const BatchNormCache& cache);

// ---------------------------------------------------------------------------
// Inverted dropout: survivors are scaled by 1/(1-rate) at train time, so
// inference is the identity.

struct DropoutCache {
  Tensor mask;  // 0 or 1/(1-rate) per element; empty when the pass was the identity
};

Forward<DropoutCache> dropout_forward(const Tensor& x, double rate, Mode mode, Rng& rng);
// Replays a fixed mask, e.g. one taken from an earlier cache.
Forward<DropoutCache> dropout_forward_masked(const Tensor& x, const Tensor& mask);
Tensor dropout_backward(const Tensor& dy, const DropoutCache& cache);

// ---------------------------------------------------------------------------
// Fully connected layer y = act(x W + b).

enum class Activation { none, relu, sigmoid };

struct DenseParams {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

struct DenseCache {
  Tensor input;
  Tensor output;
  Activation activation = Activation::none;
};

struct DenseGrads {
  Tensor dx;
  Tensor dweight;
  Tensor dbias;
};

Forward<DenseCache> dense_forward(const Tensor& x, const DenseParams& p, Activation activation);
DenseGrads dense_backward(const Tensor& dy, const DenseCache& cache, const DenseParams& p);

// ---------------------------------------------------------------------------
// LSTM. Each gate owns one matrix acting on the concatenation [h_{t-1}, x_t]:
//
//   f_t  = sigmoid([h_{t-1}, x_t] W_f + b_f)
//   i_t  = sigmoid([h_{t-1}, x_t] W_i + b_i)
//   C~_t = tanh   ([h_{t-1}, x_t] W_C + b_C)
//   C_t  = f_t * C_{t-1} + i_t * C~_t
//   o_t  = sigmoid([h_{t-1}, x_t] W_o + b_o)
//   h_t  = o_t * tanh(C_t)

struct LstmGate {
  Tensor weight;  // [hidden + input, hidden]; rows 0..hidden-1 act on h_{t-1}
  Tensor bias;    // [hidden]
};

struct LstmParams {
  LstmGate forget;
  LstmGate input;
  LstmGate candidate;
  LstmGate output;

  std::size_t hidden_size() const { return forget.bias.size(); }
  std::size_t input_size() const { return forget.weight.shape()[0] - hidden_size(); }

  static LstmParams zeros(std::size_t input_size, std::size_t hidden_size);
};

struct LstmState {
  Tensor h;  // [batch, hidden]
  Tensor c;  // [batch, hidden]

  static LstmState zeros(std::size_t batch, std::size_t hidden_size);
};

struct LstmStepCache {
  Tensor concat;  // [h_{t-1}, x_t]
  Tensor forget;
  Tensor input;
  Tensor candidate;
  Tensor output;
  Tensor cell_prev;
  Tensor cell;
  Tensor cell_tanh;
};

struct LstmStepResult {
  LstmState next;
  LstmStepCache cache;
};

struct LstmStepGrads {
  Tensor dx;
  LstmState dprev;
  LstmParams dparams;
};

LstmStepResult lstm_step(const Tensor& x_t, const LstmState& prev, const LstmParams& p);

// dh and dc are the total upstream gradients reaching h_t and C_t.
LstmStepGrads lstm_step_backward(const Tensor& dh, const Tensor& dc, const LstmStepCache& cache,
                                 const LstmParams& p);

struct LstmCache {
  std::vector<LstmStepCache> steps;
  Shape input_shape;
  bool return_sequence = true;
};

struct LstmGrads {
  Tensor dxs;
  LstmParams dparams;  // summed over timesteps
  LstmState dinit;
};

// xs is [batch, time, input]. The output is [batch, time, hidden] with
// return_sequence, otherwise [batch, hidden] holding h_T.
Forward<LstmCache> lstm_forward(const Tensor& xs, const LstmParams& p, const LstmState& init,
                                bool return_sequence);
Forward<LstmCache> lstm_forward(const Tensor& xs, const LstmParams& p, bool return_sequence);
LstmGrads lstm_backward(const Tensor& dys, const LstmCache& cache, const LstmParams& p);

}  // namespace fnet
