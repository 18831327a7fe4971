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

// The CNN-LSTM cataract classifier:
//
//   input -> [conv3x3+ReLU -> maxpool2x2 -> batchnorm] x 3 -> dropout -> flatten
//         -> dense+ReLU -> reshape to sequence -> LSTM (sequence) -> LSTM (last)
//         -> dense+sigmoid
//
// With the default descriptor that is 16 layers counting the input layer.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fnet/label.hpp"
#include "fnet/layers.hpp"
#include "fnet/tensor_io.hpp"

namespace fnet {

struct ArchitectureDescriptor {
  std::size_t input_height = 224;
  std::size_t input_width = 224;
  std::size_t input_channels = 3;
  std::vector<std::size_t> conv_filters{32, 64, 128};
  std::size_t dense_units = 256;
  std::size_t lstm_units = 256;
  std::size_t lstm_layers = 2;
  // The dense output [N, dense_units] is read as a sequence of
  // sequence_length steps with dense_units / sequence_length features each.
  std::size_t sequence_length = 1;
  double dropout_rate = 0.2;
  std::size_t output_units = 1;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.9;

  // 16x16x1 input, filters [2,2,2], dense 8, LSTM 4. Used for gradient checks
  // and fast experiments.
  static ArchitectureDescriptor tiny();

  // Throws ParameterError naming the first incompatible layer pair.
  void validate() const;

  // Ordered layer names, input layer first.
  std::vector<std::string> layer_names() const;

  // Spatial extent entering the flatten layer: [h, w, c].
  std::vector<std::size_t> feature_map_shape() const;

  std::string to_json() const;
  static ArchitectureDescriptor from_json(const std::string& text);

  friend bool operator==(const ArchitectureDescriptor&, const ArchitectureDescriptor&) = default;
};

struct ModelParams {
  std::vector<ConvParams> conv;
  std::vector<BatchNormParams> bn;
  DenseParams dense;
  std::vector<LstmParams> lstm;
  DenseParams head;

  // Zero-filled parameters with the shapes the descriptor implies.
  static ModelParams allocate(const ArchitectureDescriptor& d);
};

struct ParamRef {
  std::string name;
  Tensor* tensor;
};

struct ConstParamRef {
  std::string name;
  const Tensor* tensor;
};

// Trainable tensors in canonical order, e.g. "conv1.kernels", "bn2.gamma",
// "lstm1.forget.weight", "output.bias".
std::vector<ParamRef> trainable(ModelParams& p);
std::vector<ConstParamRef> trainable(const ModelParams& p);
// trainable() plus batch-norm running statistics: everything a checkpoint holds.
std::vector<ConstParamRef> persistent(const ModelParams& p);
std::vector<ParamRef> persistent(ModelParams& p);

struct ForwardTrace {
  Mode mode = Mode::infer;
  std::vector<ConvCache> conv;
  std::vector<Tensor> conv_activation;  // ReLU output of each conv layer
  std::vector<MaxPoolCache> pool;
  std::vector<BatchNormCache> bn;
  DropoutCache dropout;
  Shape feature_shape;
  DenseCache dense;
  std::vector<LstmCache> lstm;
  DenseCache head;
};

struct ForwardPass {
  Tensor probabilities;  // [N, 1]
  ForwardTrace trace;
};

class Model {
 public:
  // Validates descriptor and every parameter shape.
  Model(ArchitectureDescriptor descriptor, ModelParams params);

  // He-normal conv/dense kernels, Xavier-uniform LSTM and output matrices,
  // forget-gate bias 1, other biases 0. Deterministic in the seed.
  static Model build(const ArchitectureDescriptor& descriptor, std::uint64_t seed);

  const ArchitectureDescriptor& descriptor() const noexcept { return descriptor_; }
  const ModelParams& params() const noexcept { return params_; }
  ModelParams& params() noexcept { return params_; }

  Mode mode() const noexcept { return mode_; }
  void set_mode(Mode mode) noexcept { mode_ = mode; }

  // x is [N, H, W, C] in [0, 1]. Train mode draws the dropout mask from rng
  // unless dropout_mask is given; infer mode ignores both.
  ForwardPass forward(const Tensor& x, Rng* rng = nullptr, const Tensor* dropout_mask = nullptr) const;

  // Gradients of the loss for every parameter, given dloss/dp of shape [N, 1].
  // Running-stat slots of the result are zero. Requires a train-mode trace.
  ModelParams backward(const ForwardTrace& trace, const Tensor& dloss) const;

  // Adopts the batch-norm running statistics a train-mode forward produced.
  void commit_batch_statistics(const ForwardTrace& trace);

  // Infer-mode probabilities regardless of the current mode.
  Tensor predict_proba(const Tensor& x) const;
  std::vector<Label> predict(const Tensor& x, double threshold = 0.5) const;

  std::size_t parameter_count() const;

  // Rounds parameters and running statistics to float32 so that a checkpoint
  // round trip is exact.
  void round_to_storage_precision();

 private:
  ArchitectureDescriptor descriptor_;
  ModelParams params_;
  Mode mode_ = Mode::infer;
};

// cataract iff p >= threshold.
std::vector<Label> classify(const Tensor& probabilities, double threshold = 0.5);

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr char kCheckpointMagic[] = "FNET";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainingMetadata {
  std::uint64_t epoch = 0;
  std::uint64_t seed = 0;
  std::uint64_t optimizer_step = 0;

  friend bool operator==(const TrainingMetadata&, const TrainingMetadata&) = default;
};

struct Checkpoint {
  Model model;
  TrainingMetadata training;
  std::vector<NamedTensor> optimizer_state;  // optional, e.g. "adam.m.conv1.kernels"
};

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const TrainingMetadata& training = {},
                     const std::vector<NamedTensor>& optimizer_state = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

void save(const Model& model, const std::filesystem::path& path);
Model load(const std::filesystem::path& path);

}  // namespace fnet
