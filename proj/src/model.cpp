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

#include "fnet/model.hpp"

#include <cmath>
#include <random>
#include <utility>

#include "fnet/errors.hpp"
#include "json.hpp"

namespace fnet {

namespace {

using nlohmann::json;

std::string block(const char* kind, std::size_t k) { return kind + std::to_string(k + 1); }

void fill_normal(Tensor& t, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.values()) v = dist(rng);
}

void fill_uniform(Tensor& t, double limit, Rng& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : t.values()) v = dist(rng);
}

template <class Params, class Ref>
std::vector<Ref> collect(Params& p, bool with_running_stats) {
  std::vector<Ref> refs;
  for (std::size_t k = 0; k < p.conv.size(); ++k) {
    refs.push_back({block("conv", k) + ".kernels", &p.conv[k].kernels});
    refs.push_back({block("conv", k) + ".bias", &p.conv[k].bias});
    refs.push_back({block("bn", k) + ".gamma", &p.bn[k].gamma});
    refs.push_back({block("bn", k) + ".beta", &p.bn[k].beta});
    if (with_running_stats) {
      refs.push_back({block("bn", k) + ".running_mean", &p.bn[k].running_mean});
      refs.push_back({block("bn", k) + ".running_var", &p.bn[k].running_var});
    }
  }
  refs.push_back({"dense.weight", &p.dense.weight});
  refs.push_back({"dense.bias", &p.dense.bias});
  for (std::size_t l = 0; l < p.lstm.size(); ++l) {
    auto& cell = p.lstm[l];
    for (auto [gate, name] : {std::pair{&cell.forget, "forget"}, std::pair{&cell.input, "input"},
                              std::pair{&cell.candidate, "candidate"}, std::pair{&cell.output, "output"}}) {
      refs.push_back({block("lstm", l) + "." + name + ".weight", &gate->weight});
      refs.push_back({block("lstm", l) + "." + name + ".bias", &gate->bias});
    }
  }
  refs.push_back({"output.weight", &p.head.weight});
  refs.push_back({"output.bias", &p.head.bias});
  return refs;
}

json descriptor_json(const ArchitectureDescriptor& d) {
  return json{{"input_shape", {d.input_height, d.input_width, d.input_channels}},
              {"conv_filters", d.conv_filters},
              {"dense_units", d.dense_units},
              {"lstm_units", d.lstm_units},
              {"lstm_layers", d.lstm_layers},
              {"sequence_length", d.sequence_length},
              {"dropout_rate", d.dropout_rate},
              {"output_units", d.output_units},
              {"bn_epsilon", d.bn_epsilon},
              {"bn_momentum", d.bn_momentum}};
}

ArchitectureDescriptor descriptor_from(const json& j) {
  ArchitectureDescriptor d;
  try {
    const auto shape = j.at("input_shape").get<std::vector<std::size_t>>();
    if (shape.size() != 3) throw FormatError("descriptor input_shape must have three extents");
    d.input_height = shape[0];
    d.input_width = shape[1];
    d.input_channels = shape[2];
    d.conv_filters = j.at("conv_filters").get<std::vector<std::size_t>>();
    d.dense_units = j.at("dense_units").get<std::size_t>();
    d.lstm_units = j.at("lstm_units").get<std::size_t>();
    d.lstm_layers = j.at("lstm_layers").get<std::size_t>();
    d.sequence_length = j.at("sequence_length").get<std::size_t>();
    d.dropout_rate = j.at("dropout_rate").get<double>();
    d.output_units = j.at("output_units").get<std::size_t>();
    d.bn_epsilon = j.at("bn_epsilon").get<double>();
    d.bn_momentum = j.at("bn_momentum").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed architecture descriptor: ") + e.what());
  }
  d.validate();
  return d;
}

}  // namespace

// ---------------------------------------------------------------------------
// ArchitectureDescriptor

ArchitectureDescriptor ArchitectureDescriptor::tiny() {
  ArchitectureDescriptor d;
  d.input_height = 16;
  d.input_width = 16;
  d.input_channels = 1;
  d.conv_filters = {2, 2, 2};
  d.dense_units = 8;
  d.lstm_units = 4;
  return d;
}

void ArchitectureDescriptor::validate() const {
  auto fail = [](const std::string& from, const std::string& to, const std::string& why) {
    throw ParameterError("incompatible layers " + from + " -> " + to + ": " + why);
  };
  if (input_height == 0 || input_width == 0 || input_channels == 0) {
    fail("input", "conv1", "input extents must be >= 1");
  }
  if (conv_filters.empty()) fail("input", "dropout", "at least one convolutional block is required");
  std::size_t h = input_height, w = input_width;
  for (std::size_t k = 0; k < conv_filters.size(); ++k) {
    if (conv_filters[k] == 0) fail(k == 0 ? "input" : block("bn", k - 1), block("conv", k), "zero filters");
    if (h < 2 || w < 2) {
      fail(block("conv", k), block("pool", k),
           "feature map " + std::to_string(h) + "x" + std::to_string(w) + " is smaller than the 2x2 pool");
    }
    h /= 2;
    w /= 2;
  }
  const std::string last_bn = block("bn", conv_filters.size() - 1);
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail(last_bn, "dropout", "rate must lie in [0, 1)");
  if (!(bn_epsilon > 0.0) || !(bn_momentum >= 0.0 && bn_momentum <= 1.0)) {
    fail(block("pool", 0), block("bn", 0), "epsilon must be > 0 and momentum in [0, 1]");
  }
  if (dense_units == 0) fail("flatten", "dense", "dense_units must be >= 1");
  if (sequence_length == 0 || dense_units % sequence_length != 0) {
    fail("dense", "lstm1",
         "dense_units " + std::to_string(dense_units) + " is not divisible by sequence_length " +
             std::to_string(sequence_length));
  }
  if (lstm_layers == 0 || lstm_units == 0) fail("dense", "lstm1", "LSTM layers and units must be >= 1");
  if (output_units != 1) {
    fail(block("lstm", lstm_layers - 1), "output", "exactly one sigmoid output unit is supported");
  }
}

std::vector<std::string> ArchitectureDescriptor::layer_names() const {
  std::vector<std::string> names{"input"};
  for (std::size_t k = 0; k < conv_filters.size(); ++k) {
    names.push_back(block("conv", k));
    names.push_back(block("pool", k));
    names.push_back(block("bn", k));
  }
  names.insert(names.end(), {"dropout", "flatten", "dense"});
  for (std::size_t l = 0; l < lstm_layers; ++l) names.push_back(block("lstm", l));
  names.push_back("output");
  return names;
}

std::vector<std::size_t> ArchitectureDescriptor::feature_map_shape() const {
  std::size_t h = input_height, w = input_width;
  for (std::size_t k = 0; k < conv_filters.size(); ++k) {
    h /= 2;
    w /= 2;
  }
  return {h, w, conv_filters.empty() ? input_channels : conv_filters.back()};
}

std::string ArchitectureDescriptor::to_json() const { return descriptor_json(*this).dump(); }

ArchitectureDescriptor ArchitectureDescriptor::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("descriptor is not valid JSON: ") + e.what());
  }
  return descriptor_from(j);
}

// ---------------------------------------------------------------------------
// Parameters

ModelParams ModelParams::allocate(const ArchitectureDescriptor& d) {
  d.validate();
  ModelParams p;
  std::size_t channels = d.input_channels;
  for (std::size_t filters : d.conv_filters) {
    p.conv.push_back({Tensor(Shape{3, 3, channels, filters}), Tensor(Shape{filters})});
    p.bn.push_back(BatchNormParams::identity(filters));
    p.bn.back().epsilon = d.bn_epsilon;
    p.bn.back().momentum = d.bn_momentum;
    channels = filters;
  }
  const auto fm = d.feature_map_shape();
  const std::size_t flat = fm[0] * fm[1] * fm[2];
  p.dense = {Tensor(Shape{flat, d.dense_units}), Tensor(Shape{d.dense_units})};
  std::size_t features = d.dense_units / d.sequence_length;
  for (std::size_t l = 0; l < d.lstm_layers; ++l) {
    p.lstm.push_back(LstmParams::zeros(features, d.lstm_units));
    features = d.lstm_units;
  }
  p.head = {Tensor(Shape{d.lstm_units, d.output_units}), Tensor(Shape{d.output_units})};
  return p;
}

std::vector<ParamRef> trainable(ModelParams& p) { return collect<ModelParams, ParamRef>(p, false); }
std::vector<ConstParamRef> trainable(const ModelParams& p) {
  return collect<const ModelParams, ConstParamRef>(p, false);
}
std::vector<ParamRef> persistent(ModelParams& p) { return collect<ModelParams, ParamRef>(p, true); }
std::vector<ConstParamRef> persistent(const ModelParams& p) {
  return collect<const ModelParams, ConstParamRef>(p, true);
}

// ---------------------------------------------------------------------------
// Model

Model::Model(ArchitectureDescriptor descriptor, ModelParams params)
    : descriptor_(std::move(descriptor)), params_(std::move(params)) {
  const ModelParams expected = ModelParams::allocate(descriptor_);
  const auto want = persistent(expected);
  const auto have = persistent(static_cast<const ModelParams&>(params_));
  if (want.size() != have.size()) throw ShapeError("parameter set does not match the descriptor");
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (!(want[i].tensor->shape() == have[i].tensor->shape())) {
      throw ShapeError("parameter " + want[i].name + " has shape " + have[i].tensor->shape().to_string() +
                       ", descriptor implies " + want[i].tensor->shape().to_string());
    }
  }
  for (std::size_t k = 0; k < params_.bn.size(); ++k) {
    params_.bn[k].epsilon = descriptor_.bn_epsilon;
    params_.bn[k].momentum = descriptor_.bn_momentum;
  }
}

Model Model::build(const ArchitectureDescriptor& descriptor, std::uint64_t seed) {
  ModelParams p = ModelParams::allocate(descriptor);
  Rng rng = make_rng(seed, "model.init");
  for (auto& conv : p.conv) {
    const auto& s = conv.kernels.shape();
    fill_normal(conv.kernels, std::sqrt(2.0 / static_cast<double>(s[0] * s[1] * s[2])), rng);
  }
  fill_normal(p.dense.weight, std::sqrt(2.0 / static_cast<double>(p.dense.weight.shape()[0])), rng);
  for (auto& cell : p.lstm) {
    for (LstmGate* gate : {&cell.forget, &cell.input, &cell.candidate, &cell.output}) {
      const auto& s = gate->weight.shape();
      fill_uniform(gate->weight, std::sqrt(6.0 / static_cast<double>(s[0] + s[1])), rng);
    }
    for (double& b : cell.forget.bias.values()) b = 1.0;
  }
  const auto& hs = p.head.weight.shape();
  fill_uniform(p.head.weight, std::sqrt(6.0 / static_cast<double>(hs[0] + hs[1])), rng);
  Model m(descriptor, std::move(p));
  m.round_to_storage_precision();
  return m;
}

ForwardPass Model::forward(const Tensor& x, Rng* rng, const Tensor* dropout_mask) const {
  const auto& d = descriptor_;
  const Shape& s = x.shape();
  if (s.rank() != 4 || s[1] != d.input_height || s[2] != d.input_width || s[3] != d.input_channels) {
    throw ShapeError("model expects input [N," + std::to_string(d.input_height) + "," +
                     std::to_string(d.input_width) + "," + std::to_string(d.input_channels) +
                     "], got " + s.to_string());
  }
  const std::size_t n = s[0];
  ForwardPass out;
  ForwardTrace& tr = out.trace;
  tr.mode = mode_;

  Tensor h = x;
  for (std::size_t k = 0; k < params_.conv.size(); ++k) {
    auto conv = conv2d_forward(h, params_.conv[k]);
    tr.conv.push_back(std::move(conv.cache));
    Tensor act = map_unary(conv.y, Unary::relu);
    auto pool = maxpool_forward(act);
    tr.conv_activation.push_back(std::move(act));
    tr.pool.push_back(std::move(pool.cache));
    auto bn = batchnorm_forward(pool.y, params_.bn[k], mode_);
    tr.bn.push_back(std::move(bn.cache));
    h = std::move(bn.y);
  }

  if (mode_ == Mode::infer) {
    tr.dropout = {};
  } else if (dropout_mask != nullptr) {
    auto drop = dropout_forward_masked(h, *dropout_mask);
    h = std::move(drop.y);
    tr.dropout = std::move(drop.cache);
  } else {
    if (rng == nullptr && d.dropout_rate > 0.0) {
      throw StateError("train-mode forward needs a random stream for dropout");
    }
    Rng unused;
    auto drop = dropout_forward(h, d.dropout_rate, mode_, rng ? *rng : unused);
    h = std::move(drop.y);
    tr.dropout = std::move(drop.cache);
  }

  tr.feature_shape = h.shape();
  h = h.reshaped(Shape{n, h.size() / n});
  auto dense = dense_forward(h, params_.dense, Activation::relu);
  tr.dense = std::move(dense.cache);
  h = dense.y.reshaped(Shape{n, d.sequence_length, d.dense_units / d.sequence_length});

  for (std::size_t l = 0; l < params_.lstm.size(); ++l) {
    const bool last = l + 1 == params_.lstm.size();
    auto lstm = lstm_forward(h, params_.lstm[l], !last);
    tr.lstm.push_back(std::move(lstm.cache));
    h = std::move(lstm.y);
  }

  auto head = dense_forward(h, params_.head, Activation::sigmoid);
  tr.head = std::move(head.cache);
  out.probabilities = std::move(head.y);
  return out;
}

ModelParams Model::backward(const ForwardTrace& tr, const Tensor& dloss) const {
  if (tr.mode != Mode::train) throw StateError("backward needs the trace of a train-mode forward");
  if (tr.conv.size() != params_.conv.size() || tr.lstm.size() != params_.lstm.size()) {
    throw StateError("forward trace does not belong to this architecture");
  }
  ModelParams g = ModelParams::allocate(descriptor_);
  for (auto& bn : g.bn) {
    for (double& v : bn.running_var.values()) v = 0.0;
  }

  auto head = dense_backward(dloss, tr.head, params_.head);
  g.head = {std::move(head.dweight), std::move(head.dbias)};
  Tensor dh = std::move(head.dx);
  for (std::size_t l = params_.lstm.size(); l-- > 0;) {
    auto lstm = lstm_backward(dh, tr.lstm[l], params_.lstm[l]);
    g.lstm[l] = std::move(lstm.dparams);
    dh = std::move(lstm.dxs);
  }

  const std::size_t n = tr.dense.output.shape()[0];
  dh = dh.reshaped(Shape{n, descriptor_.dense_units});
  auto dense = dense_backward(dh, tr.dense, params_.dense);
  g.dense = {std::move(dense.dweight), std::move(dense.dbias)};
  dh = dropout_backward(dense.dx.reshaped(tr.feature_shape), tr.dropout);

  for (std::size_t k = params_.conv.size(); k-- > 0;) {
    auto bn = batchnorm_backward(dh, tr.bn[k], params_.bn[k]);
    g.bn[k].gamma = std::move(bn.dgamma);
    g.bn[k].beta = std::move(bn.dbeta);
    Tensor dact = maxpool_backward(bn.dx, tr.pool[k]);
    const Tensor& act = tr.conv_activation[k];
    for (std::size_t i = 0; i < dact.size(); ++i) {
      if (!(act[i] > 0.0)) dact[i] = 0.0;
    }
    auto conv = conv2d_backward(dact, tr.conv[k], params_.conv[k]);
    g.conv[k] = {std::move(conv.dkernels), std::move(conv.dbias)};
    dh = std::move(conv.dx);
  }
  return g;
}

void Model::commit_batch_statistics(const ForwardTrace& trace) {
  if (trace.mode != Mode::train) return;
  for (std::size_t k = 0; k < params_.bn.size() && k < trace.bn.size(); ++k) {
    commit_running_stats(params_.bn[k], trace.bn[k]);
    round_to_float(params_.bn[k].running_mean);
    round_to_float(params_.bn[k].running_var);
  }
}

Tensor Model::predict_proba(const Tensor& x) const {
  if (mode_ == Mode::infer) return forward(x).probabilities;
  Model view = *this;
  view.set_mode(Mode::infer);
  return view.forward(x).probabilities;
}

std::vector<Label> Model::predict(const Tensor& x, double threshold) const {
  return classify(predict_proba(x), threshold);
}

std::size_t Model::parameter_count() const {
  std::size_t count = 0;
  for (const auto& ref : trainable(params_)) count += ref.tensor->size();
  return count;
}

void Model::round_to_storage_precision() {
  for (auto& ref : persistent(params_)) round_to_float(*ref.tensor);
}

std::vector<Label> classify(const Tensor& probabilities, double threshold) {
  std::vector<Label> labels;
  labels.reserve(probabilities.size());
  for (double p : probabilities.values()) labels.push_back(p >= threshold ? Label::cataract : Label::normal);
  return labels;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const TrainingMetadata& training, const std::vector<NamedTensor>& optimizer_state) {
  TensorArchive archive;
  archive.magic = kCheckpointMagic;
  archive.version = kCheckpointVersion;
  json header{{"descriptor", descriptor_json(model.descriptor())},
              {"training",
               {{"epoch", training.epoch}, {"seed", training.seed}, {"optimizer_step", training.optimizer_step}}}};
  archive.header = header.dump();
  for (const auto& ref : persistent(model.params())) archive.tensors.push_back({ref.name, *ref.tensor});
  for (const auto& extra : optimizer_state) archive.tensors.push_back(extra);
  write_archive(path, archive);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  TensorArchive archive = read_archive(path, kCheckpointMagic, kCheckpointVersion);
  json header;
  try {
    header = json::parse(archive.header);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  if (!header.contains("descriptor")) throw FormatError("checkpoint header lacks a descriptor");
  const ArchitectureDescriptor descriptor = descriptor_from(header["descriptor"]);
  TrainingMetadata training;
  if (header.contains("training")) {
    const auto& t = header["training"];
    training.epoch = t.value("epoch", std::uint64_t{0});
    training.seed = t.value("seed", std::uint64_t{0});
    training.optimizer_step = t.value("optimizer_step", std::uint64_t{0});
  }

  ModelParams params = ModelParams::allocate(descriptor);
  auto slots = persistent(params);
  std::size_t next = 0;
  std::vector<NamedTensor> extra;
  for (auto& nt : archive.tensors) {
    if (next < slots.size() && nt.name == slots[next].name) {
      if (!(nt.tensor.shape() == slots[next].tensor->shape())) {
        throw FormatError("checkpoint tensor " + nt.name + " has shape " + nt.tensor.shape().to_string() +
                          ", descriptor implies " + slots[next].tensor->shape().to_string());
      }
      *slots[next].tensor = std::move(nt.tensor);
      ++next;
    } else if (next == slots.size()) {
      extra.push_back(std::move(nt));
    } else {
      throw FormatError("checkpoint tensor " + nt.name + " found where " + slots[next].name + " was expected");
    }
  }
  if (next != slots.size()) throw FormatError("checkpoint is missing tensor " + slots[next].name);
  return {Model(descriptor, std::move(params)), training, std::move(extra)};
}

void save(const Model& model, const std::filesystem::path& path) { save_checkpoint(path, model); }

Model load(const std::filesystem::path& path) { return load_checkpoint(path).model; }

}  // namespace fnet
