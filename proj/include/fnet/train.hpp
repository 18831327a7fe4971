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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fnet/data.hpp"
#include "fnet/model.hpp"

namespace fnet {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  // Save every N epochs (0: only at the end). Empty path disables checkpoints.
  std::size_t checkpoint_every = 1;
  std::filesystem::path checkpoint_path;
  std::filesystem::path log_path;
  // When false the wall_seconds column is written as 0 so logs are byte-stable.
  bool record_wall_time = true;

  // Throws ParameterError.
  void validate() const;
};

inline constexpr double kProbabilityClamp = 1e-7;

struct BceResult {
  double loss;
  Tensor grad;  // dloss/dp, [N, 1]
};

// Mean binary cross-entropy with p clamped to [1e-7, 1 - 1e-7]. The gradient
// is zero where clamping is active, matching the clamped loss.
BceResult bce_loss(const Tensor& probabilities, std::span<const Label> labels);

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;
};

// One bias-corrected Adam update over paired parameter/gradient tensors.
// Throws NumericalError naming the first parameter with a non-finite
// gradient; nothing is updated in that case.
void adam_step(std::span<const ParamRef> params, std::span<const ConstParamRef> grads, AdamState& state,
               const TrainConfig& config);

// Moments as named tensors for a checkpoint, and back.
std::vector<NamedTensor> export_adam_state(const AdamState& state, std::span<const ConstParamRef> params);
AdamState import_adam_state(std::span<const NamedTensor> tensors, std::span<const ConstParamRef> params,
                            std::uint64_t step);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> test_accuracy;
  double wall_seconds = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

std::string epoch_log_header();
std::string format_epoch_record(const EpochRecord& r);

struct FitOptions {
  std::size_t first_epoch = 1;  // > 1 when resuming
  std::optional<AdamState> resume;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct FitResult {
  std::vector<EpochRecord> log;
  AdamState optimizer;
};

// Stacks the indexed source images into [count, H, W, C].
Tensor stack_images(const SampleSource& source, std::span<const std::size_t> indices);

// Infer-mode probabilities for every sample, in order.
std::vector<double> predict_source(const Model& model, const SampleSource& source, std::size_t batch_size);

// Mini-batch training, epochs first_epoch..config.epochs. Each epoch reshuffles
// with a seed derived from (config.seed, epoch), so a resumed run draws the
// same batches as an uninterrupted one. Throws NumericalError on a non-finite
// loss; checkpoints already on disk are left untouched.
FitResult fit(Model& model, const SampleSource& train, const SampleSource* test, const TrainConfig& config,
              FitOptions options = {});

}  // namespace fnet
