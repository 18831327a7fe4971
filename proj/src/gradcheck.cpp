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

#include "fnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "fnet/errors.hpp"
#include "fnet/layers.hpp"
#include "fnet/model.hpp"
#include "fnet/random.hpp"
#include "fnet/train.hpp"

namespace fnet {

double relative_error(double analytic, double numeric) noexcept {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), kRelativeErrorFloor);
}

ProbeResult finite_difference_check(const std::vector<GradProbe>& probes, const std::function<double()>& loss,
                                    double step) {
  ProbeResult r;
  for (const auto& probe : probes) {
    if (!(probe.value->shape() == probe.analytic->shape())) {
      throw ShapeError("gradient for " + probe.name + " has shape " + probe.analytic->shape().to_string() +
                       ", value is " + probe.value->shape().to_string());
    }
    for (std::size_t i = 0; i < probe.value->size(); ++i) {
      double& v = (*probe.value)[i];
      const double saved = v;
      v = saved + step;
      const double up = loss();
      v = saved - step;
      const double down = loss();
      v = saved;
      const double err = relative_error((*probe.analytic)[i], (up - down) / (2.0 * step));
      if (err > r.max_error || r.worst.empty()) {
        r.max_error = err;
        r.worst = probe.name + "[" + std::to_string(i) + "]";
      }
      ++r.checked;
    }
  }
  return r;
}

namespace {

Tensor random_tensor(Shape shape, double scale, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = scale * dist(rng);
  return t;
}

double weighted_sum(const Tensor& y, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
  return s;
}

struct Perturber {
  const std::string& target;
  void operator()(const std::string& row, Tensor& grad) const {
    if (row == target && !grad.empty()) grad[0] += 1e-3 * std::max(1.0, std::abs(grad[0]));
  }
};

using Check = std::function<ProbeResult(Rng&, double, const Perturber&)>;

ProbeResult check_conv(Rng& rng, double h, const Perturber& perturb) {
  Tensor x = random_tensor(Shape{2, 5, 5, 2}, 0.1, rng);
  ConvParams p{random_tensor(Shape{3, 3, 2, 3}, 0.5, rng), random_tensor(Shape{3}, 0.1, rng)};
  const Tensor w = random_tensor(Shape{2, 5, 5, 3}, 1.0, rng);
  auto fwd = conv2d_forward(x, p);
  ConvGrads g = conv2d_backward(w, fwd.cache, p);
  perturb("conv2d", g.dkernels);
  return finite_difference_check({{"x", &x, &g.dx}, {"kernels", &p.kernels, &g.dkernels}, {"bias", &p.bias, &g.dbias}},
                                 [&] { return weighted_sum(conv2d_forward(x, p).y, w); }, h);
}

ProbeResult check_maxpool(Rng& rng, double h, const Perturber& perturb) {
  Tensor x = random_tensor(Shape{2, 6, 7, 3}, 0.1, rng);
  auto fwd = maxpool_forward(x);
  const Tensor w = random_tensor(fwd.y.shape(), 1.0, rng);
  Tensor dx = maxpool_backward(w, fwd.cache);
  perturb("maxpool", dx);
  return finite_difference_check({{"x", &x, &dx}}, [&] { return weighted_sum(maxpool_forward(x).y, w); }, h);
}

ProbeResult check_batchnorm(Rng& rng, double h, const Perturber& perturb, Mode mode) {
  Tensor x = random_tensor(Shape{3, 4, 4, 2}, 0.1, rng);
  BatchNormParams p = BatchNormParams::identity(2);
  p.gamma = random_tensor(Shape{2}, 0.5, rng);
  p.beta = random_tensor(Shape{2}, 0.5, rng);
  p.running_mean = random_tensor(Shape{2}, 0.1, rng);
  for (std::size_t c = 0; c < 2; ++c) p.running_var[c] = 0.5 + std::abs(p.running_mean[c]);
  const Tensor w = random_tensor(x.shape(), 1.0, rng);
  auto fwd = batchnorm_forward(x, p, mode);
  BatchNormGrads g = batchnorm_backward(w, fwd.cache, p);
  perturb(mode == Mode::train ? "batchnorm_train" : "batchnorm_infer", g.dgamma);
  return finite_difference_check({{"x", &x, &g.dx}, {"gamma", &p.gamma, &g.dgamma}, {"beta", &p.beta, &g.dbeta}},
                                 [&] { return weighted_sum(batchnorm_forward(x, p, mode).y, w); }, h);
}

ProbeResult check_dropout(Rng& rng, double h, const Perturber& perturb) {
  Tensor x = random_tensor(Shape{4, 10}, 0.1, rng);
  const Tensor w = random_tensor(x.shape(), 1.0, rng);
  auto fwd = dropout_forward(x, 0.2, Mode::train, rng);
  Tensor dx = dropout_backward(w, fwd.cache);
  perturb("dropout", dx);
  const Tensor mask = fwd.cache.mask;
  return finite_difference_check({{"x", &x, &dx}},
                                 [&] { return weighted_sum(dropout_forward_masked(x, mask).y, w); }, h);
}

ProbeResult check_dense(Rng& rng, double h, const Perturber& perturb, Activation act, const char* row) {
  Tensor x = random_tensor(Shape{4, 6}, 0.1, rng);
  DenseParams p{random_tensor(Shape{6, 5}, 0.5, rng), random_tensor(Shape{5}, 0.1, rng)};
  const Tensor w = random_tensor(Shape{4, 5}, 1.0, rng);
  auto fwd = dense_forward(x, p, act);
  DenseGrads g = dense_backward(w, fwd.cache, p);
  perturb(row, g.dweight);
  return finite_difference_check({{"x", &x, &g.dx}, {"weight", &p.weight, &g.dweight}, {"bias", &p.bias, &g.dbias}},
                                 [&] { return weighted_sum(dense_forward(x, p, act).y, w); }, h);
}

LstmParams random_lstm(std::size_t in, std::size_t hidden, Rng& rng) {
  LstmParams p = LstmParams::zeros(in, hidden);
  for (LstmGate* g : {&p.forget, &p.input, &p.candidate, &p.output}) {
    g->weight = random_tensor(g->weight.shape(), 0.5, rng);
    g->bias = random_tensor(g->bias.shape(), 0.1, rng);
  }
  return p;
}

std::vector<GradProbe> lstm_probes(LstmParams& p, const LstmParams& g) {
  return {{"forget.weight", &p.forget.weight, &g.forget.weight},
          {"forget.bias", &p.forget.bias, &g.forget.bias},
          {"input.weight", &p.input.weight, &g.input.weight},
          {"input.bias", &p.input.bias, &g.input.bias},
          {"candidate.weight", &p.candidate.weight, &g.candidate.weight},
          {"candidate.bias", &p.candidate.bias, &g.candidate.bias},
          {"output.weight", &p.output.weight, &g.output.weight},
          {"output.bias", &p.output.bias, &g.output.bias}};
}

ProbeResult check_lstm_step(Rng& rng, double h, const Perturber& perturb) {
  Tensor x = random_tensor(Shape{2, 3}, 0.1, rng);
  LstmState prev{random_tensor(Shape{2, 4}, 0.1, rng), random_tensor(Shape{2, 4}, 0.1, rng)};
  LstmParams p = random_lstm(3, 4, rng);
  const Tensor wh = random_tensor(Shape{2, 4}, 1.0, rng);
  const Tensor wc = random_tensor(Shape{2, 4}, 1.0, rng);
  auto fwd = lstm_step(x, prev, p);
  LstmStepGrads g = lstm_step_backward(wh, wc, fwd.cache, p);
  perturb("lstm_step", g.dparams.candidate.weight);
  auto probes = lstm_probes(p, g.dparams);
  probes.push_back({"x", &x, &g.dx});
  probes.push_back({"h_prev", &prev.h, &g.dprev.h});
  probes.push_back({"c_prev", &prev.c, &g.dprev.c});
  return finite_difference_check(probes, [&] {
    const auto r = lstm_step(x, prev, p);
    return weighted_sum(r.next.h, wh) + weighted_sum(r.next.c, wc);
  }, h);
}

ProbeResult check_lstm(Rng& rng, double h, const Perturber& perturb, bool sequence) {
  constexpr std::size_t n = 2, steps = 4, in = 3, hidden = 5;
  Tensor xs = random_tensor(Shape{n, steps, in}, 0.1, rng);
  LstmState init{random_tensor(Shape{n, hidden}, 0.1, rng), random_tensor(Shape{n, hidden}, 0.1, rng)};
  LstmParams p = random_lstm(in, hidden, rng);
  const Tensor w = random_tensor(sequence ? Shape{n, steps, hidden} : Shape{n, hidden}, 1.0, rng);
  auto fwd = lstm_forward(xs, p, init, sequence);
  LstmGrads g = lstm_backward(w, fwd.cache, p);
  perturb(sequence ? "lstm_sequence" : "lstm_last", g.dparams.forget.weight);
  auto probes = lstm_probes(p, g.dparams);
  probes.push_back({"xs", &xs, &g.dxs});
  probes.push_back({"h0", &init.h, &g.dinit.h});
  probes.push_back({"c0", &init.c, &g.dinit.c});
  return finite_difference_check(probes, [&] { return weighted_sum(lstm_forward(xs, p, init, sequence).y, w); }, h);
}

ProbeResult check_bce(Rng& rng, double h, const Perturber& perturb) {
  std::uniform_real_distribution<double> prob(0.05, 0.95);
  Tensor p(Shape{8, 1});
  std::vector<Label> labels;
  for (std::size_t i = 0; i < 8; ++i) {
    p[i] = prob(rng);
    labels.push_back(rng() % 2 ? Label::cataract : Label::normal);
  }
  BceResult r = bce_loss(p, labels);
  perturb("bce_loss", r.grad);
  return finite_difference_check({{"p", &p, &r.grad}}, [&] { return bce_loss(p, labels).loss; }, h);
}

ProbeResult check_model(Rng& rng, double h, const Perturber& perturb) {
  Model model = Model::build(ArchitectureDescriptor::tiny(), rng());
  model.set_mode(Mode::train);
  std::uniform_real_distribution<double> pixel(0.0, 1.0);
  Tensor x(Shape{3, 16, 16, 1});
  for (double& v : x.values()) v = pixel(rng);
  const std::vector<Label> labels{Label::cataract, Label::normal, Label::cataract};

  ForwardPass pass = model.forward(x, &rng);
  const Tensor mask = pass.trace.dropout.mask;
  BceResult bce = bce_loss(pass.probabilities, labels);
  ModelParams grads = model.backward(pass.trace, bce.grad);
  auto grad_refs = trainable(grads);
  perturb("model_end_to_end", *grad_refs.front().tensor);

  std::vector<GradProbe> probes;
  auto params = trainable(model.params());
  for (std::size_t k = 0; k < params.size(); ++k) probes.push_back({params[k].name, params[k].tensor, grad_refs[k].tensor});
  return finite_difference_check(probes, [&] {
    return bce_loss(model.forward(x, nullptr, &mask).probabilities, labels).loss;
  }, h);
}

struct Item {
  const char* name;
  double tolerance;
  Check check;
};

std::vector<Item> items() {
  return {
      {"conv2d", kLayerGradTolerance, check_conv},
      {"maxpool", kLayerGradTolerance, check_maxpool},
      {"batchnorm_train", kLayerGradTolerance,
       [](Rng& r, double h, const Perturber& p) { return check_batchnorm(r, h, p, Mode::train); }},
      {"batchnorm_infer", kLayerGradTolerance,
       [](Rng& r, double h, const Perturber& p) { return check_batchnorm(r, h, p, Mode::infer); }},
      {"dropout", kLayerGradTolerance, check_dropout},
      {"dense_linear", kLayerGradTolerance,
       [](Rng& r, double h, const Perturber& p) { return check_dense(r, h, p, Activation::none, "dense_linear"); }},
      {"dense_relu", kLayerGradTolerance,
       [](Rng& r, double h, const Perturber& p) { return check_dense(r, h, p, Activation::relu, "dense_relu"); }},
      {"dense_sigmoid", kLayerGradTolerance,
       [](Rng& r, double h, const Perturber& p) { return check_dense(r, h, p, Activation::sigmoid, "dense_sigmoid"); }},
      {"lstm_step", kLayerGradTolerance, check_lstm_step},
      {"lstm_sequence", kLayerGradTolerance,
       [](Rng& r, double h, const Perturber& p) { return check_lstm(r, h, p, true); }},
      {"lstm_last", kLayerGradTolerance,
       [](Rng& r, double h, const Perturber& p) { return check_lstm(r, h, p, false); }},
      {"bce_loss", kLossGradTolerance, check_bce},
      {"model_end_to_end", kModelGradTolerance, check_model},
  };
}

}  // namespace

std::vector<std::string> gradcheck_row_names() {
  std::vector<std::string> names;
  for (const auto& item : items()) names.emplace_back(item.name);
  return names;
}

bool GradcheckReport::passed() const {
  return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.passed; });
}

std::string GradcheckReport::table() const {
  std::string out = "layer                 max_rel_error  tolerance  checked  status\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-20s  %13.3e  %9.0e  %7zu  %s\n", r.name.c_str(), r.max_error, r.tolerance,
                  r.checked, r.passed ? "PASS" : "FAIL");
    out += buf;
  }
  return out;
}

GradcheckReport run_gradcheck_suite(const GradcheckOptions& options) {
  if (options.seeds == 0) throw ParameterError("gradcheck needs at least one seed");
  const auto known = gradcheck_row_names();
  if (!options.perturb.empty() && std::find(known.begin(), known.end(), options.perturb) == known.end()) {
    throw ParameterError("unknown gradcheck row '" + options.perturb + "'");
  }
  const Perturber perturb{options.perturb};
  GradcheckReport report;
  for (const auto& item : items()) {
    GradcheckRow row{item.name, 0.0, item.tolerance, 0, false};
    for (std::size_t s = 0; s < options.seeds; ++s) {
      Rng rng = make_rng(options.seed, std::string("gradcheck.") + item.name + "." + std::to_string(s));
      const ProbeResult r = item.check(rng, options.step, perturb);
      row.max_error = std::max(row.max_error, r.max_error);
      row.checked += r.checked;
    }
    row.passed = row.max_error <= row.tolerance;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace fnet
