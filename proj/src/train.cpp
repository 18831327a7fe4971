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

#include "fnet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "fnet/errors.hpp"
#include "fnet/tensor_io.hpp"

namespace fnet {

void TrainConfig::validate() const {
  if (epochs < 1) throw ParameterError("epochs must be >= 1");
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ParameterError("beta1 and beta2 must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ParameterError("epsilon must be > 0");
}

BceResult bce_loss(const Tensor& probabilities, std::span<const Label> labels) {
  const std::size_t n = labels.size();
  if (probabilities.size() != n || n == 0) {
    throw ShapeError("bce_loss: " + std::to_string(probabilities.size()) + " predictions for " +
                     std::to_string(n) + " labels");
  }
  BceResult r{0.0, Tensor(Shape{n, 1})};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double raw = probabilities[i];
    const double p = std::clamp(raw, kProbabilityClamp, 1.0 - kProbabilityClamp);
    const double y = label_value(labels[i]);
    r.loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    const bool clamped = raw < kProbabilityClamp || raw > 1.0 - kProbabilityClamp;
    r.grad[i] = clamped ? 0.0 : inv_n * ((1.0 - y) / (1.0 - p) - y / p);
  }
  r.loss *= inv_n;
  return r;
}

void adam_step(std::span<const ParamRef> params, std::span<const ConstParamRef> grads, AdamState& state,
               const TrainConfig& config) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient lists differ in length");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!(params[k].tensor->shape() == grads[k].tensor->shape())) {
      throw ShapeError("adam_step: gradient for " + params[k].name + " has shape " +
                       grads[k].tensor->shape().to_string() + ", parameter is " +
                       params[k].tensor->shape().to_string());
    }
    if (!grads[k].tensor->all_finite()) {
      throw NumericalError("non-finite gradient for parameter " + params[k].name);
    }
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.tensor->shape());
      state.second_moment.emplace_back(p.tensor->shape());
    }
  }
  if (state.first_moment.size() != params.size()) throw StateError("adam_step: optimizer state does not match parameters");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    double* w = params[k].tensor->data();
    const double* g = grads[k].tensor->data();
    double* m = state.first_moment[k].data();
    double* v = state.second_moment[k].data();
    for (std::size_t i = 0; i < params[k].tensor->size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

std::vector<NamedTensor> export_adam_state(const AdamState& state, std::span<const ConstParamRef> params) {
  std::vector<NamedTensor> out;
  if (state.first_moment.size() != params.size()) return out;
  for (std::size_t k = 0; k < params.size(); ++k) out.push_back({"adam.m." + params[k].name, state.first_moment[k]});
  for (std::size_t k = 0; k < params.size(); ++k) out.push_back({"adam.v." + params[k].name, state.second_moment[k]});
  return out;
}

AdamState import_adam_state(std::span<const NamedTensor> tensors, std::span<const ConstParamRef> params,
                            std::uint64_t step) {
  AdamState state;
  state.step = step;
  if (tensors.empty()) return state;
  if (tensors.size() != 2 * params.size()) throw FormatError("optimizer state does not match the model parameters");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& m = tensors[k];
    const auto& v = tensors[params.size() + k];
    if (m.name != "adam.m." + params[k].name || v.name != "adam.v." + params[k].name ||
        !(m.tensor.shape() == params[k].tensor->shape()) || !(v.tensor.shape() == params[k].tensor->shape())) {
      throw FormatError("optimizer state for " + params[k].name + " is missing or misshapen");
    }
    state.first_moment.push_back(m.tensor);
    state.second_moment.push_back(v.tensor);
  }
  return state;
}

std::string epoch_log_header() { return "epoch,train_loss,train_acc,test_acc,wall_seconds\n"; }

std::string format_epoch_record(const EpochRecord& r) {
  char buf[256];
  char test[32] = "";
  if (r.test_accuracy) std::snprintf(test, sizeof test, "%.6f", *r.test_accuracy);
  std::snprintf(buf, sizeof buf, "%zu,%.9f,%.6f,%s,%.3f\n", r.epoch, r.train_loss, r.train_accuracy, test,
                r.wall_seconds);
  return buf;
}

Tensor stack_images(const SampleSource& source, std::span<const std::size_t> indices) {
  Tensor batch;
  std::size_t per = 0;
  for (std::size_t b = 0; b < indices.size(); ++b) {
    Tensor img = source.image(indices[b]);
    if (b == 0) {
      const auto& s = img.shape();
      if (s.rank() != 3) throw ShapeError("sample images must be [H,W,C], got " + s.to_string());
      batch = Tensor(Shape{indices.size(), s[0], s[1], s[2]});
      per = img.size();
    } else if (img.size() != per) {
      throw ShapeError("sample " + std::to_string(indices[b]) + " has a different image shape");
    }
    std::copy(img.data(), img.data() + per, batch.data() + b * per);
  }
  return batch;
}

std::vector<double> predict_source(const Model& model, const SampleSource& source, std::size_t batch_size) {
  std::vector<double> out;
  out.reserve(source.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < source.size(); start += batch_size) {
    idx.resize(std::min(batch_size, source.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const Tensor p = model.predict_proba(stack_images(source, idx));
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  return out;
}

namespace {

void save(const Model& model, const TrainConfig& config, std::size_t epoch, const AdamState& adam) {
  if (config.checkpoint_path.empty()) return;
  TrainingMetadata meta{epoch, config.seed, adam.step};
  save_checkpoint(config.checkpoint_path, model, meta, export_adam_state(adam, trainable(model.params())));
}

double accuracy(const std::vector<double>& probs, const SampleSource& source) {
  if (probs.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    hit += (probs[i] >= 0.5) == (source.label(i) == Label::cataract);
  }
  return static_cast<double>(hit) / static_cast<double>(probs.size());
}

}  // namespace

FitResult fit(Model& model, const SampleSource& train, const SampleSource* test, const TrainConfig& config,
              FitOptions options) {
  config.validate();
  if (train.size() == 0) throw CorpusError("fit: training set is empty");

  FitResult result;
  if (options.resume) result.optimizer = std::move(*options.resume);
  std::ofstream log;
  if (!config.log_path.empty()) {
    const bool fresh = !std::filesystem::exists(config.log_path) || std::filesystem::file_size(config.log_path) == 0;
    log.open(config.log_path, std::ios::app);
    if (!log) throw IoError("cannot open epoch log " + config.log_path.string());
    if (fresh) log << epoch_log_header() << std::flush;
  }

  std::vector<std::size_t> order(train.size());
  std::vector<Label> labels;
  for (std::size_t epoch = options.first_epoch; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = make_rng(config.seed, "fit.shuffle." + std::to_string(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    Rng dropout_rng = make_rng(config.seed, "fit.dropout." + std::to_string(epoch));

    model.set_mode(Mode::train);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(config.batch_size, order.size() - start));
      labels.clear();
      for (std::size_t i : idx) labels.push_back(train.label(i));

      ForwardPass pass = model.forward(stack_images(train, idx), &dropout_rng);
      BceResult bce = bce_loss(pass.probabilities, labels);
      if (!std::isfinite(bce.loss)) {
        model.set_mode(Mode::infer);
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch));
      }
      const ModelParams grads = model.backward(pass.trace, bce.grad);
      const auto params = trainable(model.params());
      const auto grad_refs = trainable(grads);
      try {
        adam_step(params, grad_refs, result.optimizer, config);
      } catch (const NumericalError&) {
        model.set_mode(Mode::infer);
        throw;
      }
      model.commit_batch_statistics(pass.trace);
      // Keep everything a checkpoint stores at its on-disk precision so a
      // resumed run continues bit-identically.
      model.round_to_storage_precision();
      for (auto& t : result.optimizer.first_moment) round_to_float(t);
      for (auto& t : result.optimizer.second_moment) round_to_float(t);

      loss_sum += bce.loss * static_cast<double>(idx.size());
      const auto predicted = classify(pass.probabilities);
      for (std::size_t b = 0; b < idx.size(); ++b) correct += predicted[b] == labels[b];
    }
    model.set_mode(Mode::infer);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
    if (test != nullptr && test->size() > 0) {
      rec.test_accuracy = accuracy(predict_source(model, *test, config.batch_size), *test);
    }
    if (config.record_wall_time) {
      rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    result.log.push_back(rec);
    if (log.is_open()) log << format_epoch_record(rec) << std::flush;
    if (options.on_epoch) options.on_epoch(rec);

    const bool cadence = config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0;
    if (cadence || epoch == config.epochs) save(model, config, epoch, result.optimizer);
  }
  return result;
}

}  // namespace fnet
