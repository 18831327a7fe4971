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

// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>
#include <string>

#include "fnet/cli.hpp"
#include "fnet/errors.hpp"
#include "fnet/gradcheck.hpp"
#include "fnet/metrics.hpp"
#include "fnet/synthetic.hpp"
#include "fnet/train.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace fnet;
using test_util::max_abs_diff;
using test_util::random_tensor;
using test_util::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed;
  std::string detail;
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome gradient_suite() {
  const auto start = std::chrono::steady_clock::now();
  GradcheckOptions opt;
  opt.seeds = 5;
  const GradcheckReport r = run_gradcheck_suite(opt);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  double layer_worst = 0.0, model_worst = 0.0;
  for (const auto& row : r.rows)
    (row.name == "model_end_to_end" ? model_worst : layer_worst) =
        std::max(row.name == "model_end_to_end" ? model_worst : layer_worst, row.max_error);
  return {r.passed() && secs < 120.0,
          fmt("layers max %.2e, end-to-end %.2e, %.1f s", layer_worst, model_worst, secs)};
}

Outcome equation_oracles() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng = make_rng(0, "acceptance.oracles");
  double conv_worst = 0.0;
  for (std::size_t n = 1; n <= 3; ++n)
    for (std::size_t h = 3; h <= 7; ++h)
      for (std::size_t w = 3; w <= 7; ++w)
        for (std::size_t cin = 1; cin <= 3; ++cin)
          for (std::size_t cout = 1; cout <= 3; ++cout) {
            const Tensor x = random_tensor(Shape{n, h, w, cin}, rng);
            const ConvParams p{random_tensor(Shape{3, 3, cin, cout}, rng), random_tensor(Shape{cout}, rng)};
            conv_worst = std::max(conv_worst, max_abs_diff(conv2d_forward(x, p).y, oracles::conv_oracle(x, p)));
          }
  double lstm_worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t in = 1 + trial % 5, hidden = 1 + trial % 4;
    const LstmParams p = oracles::random_lstm(in, hidden, rng, 0.5);
    const Tensor x = random_tensor(Shape{1, in}, rng);
    const LstmState prev{random_tensor(Shape{1, hidden}, rng, 0.5), random_tensor(Shape{1, hidden}, rng)};
    const auto r = lstm_step(x, prev, p);
    const auto s = oracles::scalar_lstm(x.flatten(), prev.h.flatten(), prev.c.flatten(), p);
    for (std::size_t j = 0; j < hidden; ++j)
      lstm_worst = std::max({lstm_worst, std::abs(r.cache.forget[j] - s.f[j]), std::abs(r.cache.input[j] - s.i[j]),
                             std::abs(r.cache.candidate[j] - s.cand[j]), std::abs(r.cache.output[j] - s.o[j]),
                             std::abs(r.next.c[j] - s.c[j]), std::abs(r.next.h[j] - s.h[j])});
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {conv_worst <= 1e-12 && lstm_worst <= 1e-12 && secs < 60.0,
          fmt("conv %.1e, lstm %.1e, %.2f s", conv_worst, lstm_worst, secs)};
}

// Balanced = 2 x minority, x3 augmentation, and no source image on both sides.
bool pipeline_holds(const CorpusSelection& s, const DatasetSplit& split, std::string& why) {
  const std::size_t minority = std::min(s.cataract_available, s.normal_available);
  const auto train = split.partition(Partition::train), test = split.partition(Partition::test);
  std::set<std::string> train_sources;
  for (const auto& k : train) train_sources.insert(k.source);
  const bool disjoint =
      std::none_of(test.begin(), test.end(), [&](const SampleKey& k) { return train_sources.count(k.source) > 0; });
  const bool ok = s.samples.size() == 2 * minority && split.entries.size() == 3 * s.samples.size() && disjoint &&
                  train.size() + test.size() == split.entries.size();
  if (!ok) why = "balance/augment/split arithmetic violated";
  return ok;
}

Outcome pipeline_arithmetic() {
  TempDir dir("accept-odir");
  SyntheticOdirOptions o;
  o.cataract_eyes = 30;
  o.normal_eyes = 45;
  o.other_eyes = 6;
  o.image_size = 24;
  o.seed = 3;
  const SyntheticOdir fixture = write_synthetic_odir(dir / "odir", o);
  const LabelTable table = parse_labels(fixture.csv);
  const CorpusSelection s = select_binary_corpus(table.records, fixture.image_dir, 3);
  const DatasetSplit sp = split(augment(std::span<const SampleKey>(s.samples)), 0.7, 3);
  std::string why;
  bool ok = pipeline_holds(s, sp, why);
  std::string detail = "synthetic " + std::to_string(s.samples.size()) + " -> " + std::to_string(sp.entries.size()) +
                       " (" + std::to_string(sp.partition(Partition::train).size()) + "/" +
                       std::to_string(sp.partition(Partition::test).size()) + ")";

  // Real ODIR, when the caller points at it.
  const char* csv = std::getenv("FNET_ODIR_CSV");
  const char* images = std::getenv("FNET_ODIR_IMAGES");
  if (csv && images) {
    const LabelTable real = parse_labels(csv);
    const CorpusSelection rs = select_binary_corpus(real.records, images, 0);
    const DatasetSplit rsp = split(augment(std::span<const SampleKey>(rs.samples)), 0.7, 0);
    ok = ok && pipeline_holds(rs, rsp, why) && rs.samples.size() == 1188 && rsp.entries.size() == 3564;
    detail += "; ODIR " + std::to_string(rs.samples.size()) + " -> " + std::to_string(rsp.entries.size());
  } else {
    detail += "; real ODIR not configured (FNET_ODIR_CSV, FNET_ODIR_IMAGES)";
  }
  return {ok, ok ? detail : why + ": " + detail};
}

double pairwise_auc(const std::vector<Label>& labels, const std::vector<double>& scores) {
  double good = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = 0; j < labels.size(); ++j)
      if (labels[i] == Label::cataract && labels[j] == Label::normal) {
        pairs += 1.0;
        good += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
      }
  return good / pairs;
}

Outcome metrics_values() {
  ConfusionMatrix c;
  c.tp = 8;
  c.fp = 2;
  c.fn = 1;
  c.tn = 9;
  const ScalarMetrics m = scalar_metrics(c);
  const double p = 0.8, r = 8.0 / 9.0;
  const double scalar_worst = std::max({std::abs(*m.accuracy.value - 0.85), std::abs(*m.precision.value - p),
                                        std::abs(*m.recall.value - r), std::abs(*m.sensitivity.value - r),
                                        std::abs(*m.specificity.value - 9.0 / 11.0),
                                        std::abs(*m.f1.value - 2 * p * r / (p + r))});
  Rng rng = make_rng(0, "acceptance.auc");
  double auc_worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    std::vector<Label> labels;
    std::vector<double> scores;
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back(i == 0 ? Label::cataract : i == 1 ? Label::normal : (rng() % 2 ? Label::cataract : Label::normal));
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      scores.push_back(trial % 2 ? std::round(u * 10.0) / 10.0 : u);
    }
    auc_worst = std::max(auc_worst, std::abs(roc(labels, scores).auc - pairwise_auc(labels, scores)));
  }
  return {scalar_worst <= 1e-12 && auc_worst <= 1e-12,
          fmt("scalar max diff %.1e, AUC vs pairwise max diff %.1e over 100 instances", scalar_worst, auc_worst)};
}

// Tiny model on the 20-sample separable set. Full-batch Adam at lr 0.02.
Outcome learning_capability() {
  const auto start = std::chrono::steady_clock::now();
  TrainConfig c;
  c.epochs = 200;
  c.batch_size = 20;
  c.learning_rate = 0.02;
  c.seed = 0;
  c.checkpoint_every = 0;
  c.record_wall_time = false;
  const InMemorySource train(make_separable_set(10, {16, 16, 1}, c.seed));
  Model model = Model::build(ArchitectureDescriptor::tiny(), c.seed);
  std::size_t perfect_at = 0;
  FitOptions options;
  options.on_epoch = [&](const EpochRecord& r) {
    if (perfect_at) return;
    const auto p = predict_source(model, train, train.size());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < train.size(); ++i)
      correct += (p[i] >= 0.5) == (train.label(i) == Label::cataract);
    if (correct == train.size()) perfect_at = r.epoch;
  };
  const FitResult fit_result = fit(model, train, nullptr, c, options);
  const auto& log = fit_result.log;
  std::size_t worst_up = 0;
  for (std::size_t s = 0; s + 20 <= log.size(); ++s) {
    std::size_t up = 0;
    for (std::size_t t = s + 1; t < s + 20; ++t) up += log[t].train_loss > log[t - 1].train_loss;
    worst_up = std::max(worst_up, up);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {perfect_at > 0 && worst_up <= 2 && secs < 600.0,
          fmt("100%% train accuracy at epoch %.0f, max %.0f upward epochs per 20-epoch window, %.1f s",
              static_cast<double>(perfect_at), static_cast<double>(worst_up), secs)};
}

Outcome determinism() {
  TempDir dir("accept-det");
  SyntheticOdirOptions o;
  o.cataract_eyes = 10;
  o.normal_eyes = 12;
  o.image_size = 24;
  const SyntheticOdir fixture = write_synthetic_odir(dir / "odir", o);
  RunConfig base = resolve_config(std::nullopt, {{"input_height", "16"},
                                                 {"input_width", "16"},
                                                 {"input_channels", "1"},
                                                 {"conv_filters", "2,2,2"},
                                                 {"dense_units", "8"},
                                                 {"lstm_units", "4"},
                                                 {"epochs", "3"},
                                                 {"batch_size", "8"},
                                                 {"learning_rate", "0.01"},
                                                 {"record_wall_time", "false"},
                                                 {"seed", "42"}});
  base.csv = fixture.csv;
  base.image_dir = fixture.image_dir;
  base.out_dir = dir / "prep";
  std::ostringstream sink;
  if (cmd_prepare(base, sink, sink) != 0) return {false, "prepare failed: " + sink.str()};
  base.manifest = base.manifest_path();
  std::string logs[2], checkpoints[2];
  for (int run = 0; run < 2; ++run) {
    RunConfig c = base;
    c.out_dir = dir / ("run" + std::to_string(run));
    if (cmd_train(c, sink, sink) != 0) return {false, "train failed: " + sink.str()};
    logs[run] = slurp(c.log_path());
    checkpoints[run] = slurp(c.checkpoint_path());
  }
  const bool ok = !logs[0].empty() && logs[0] == logs[1] && !checkpoints[0].empty() && checkpoints[0] == checkpoints[1];
  return {ok, fmt("epoch logs %.0f bytes, checkpoints %.0f bytes, ", static_cast<double>(logs[0].size()),
                  static_cast<double>(checkpoints[0].size())) +
                  (ok ? "identical" : "differ")};
}

Outcome persistence() {
  TempDir dir("accept-ckpt");
  Rng rng = make_rng(0, "acceptance.persistence");
  Model m = Model::build(ArchitectureDescriptor::tiny(), 5);
  // Move off the init so running stats and weights are non-trivial.
  const InMemorySource train(make_separable_set(4, {16, 16, 1}, 5));
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 4;
  c.learning_rate = 0.01;
  c.checkpoint_every = 0;
  fit(m, train, nullptr, c);
  const fs::path path = dir / "m.fnet";
  save(m, path);
  const Model back = load(path);
  const Tensor x = test_util::uniform_tensor(Shape{6, 16, 16, 1}, rng);
  const bool identical = m.predict_proba(x) == back.predict_proba(x);

  std::string bytes = slurp(path);
  bytes.back() = static_cast<char>(bytes.back() ^ 0x01);
  std::ofstream(dir / "bad.fnet", std::ios::binary) << bytes;
  bool rejected = false;
  try {
    load(dir / "bad.fnet");
  } catch (const IntegrityError&) {
    rejected = true;
  }
  return {identical && rejected, std::string("predictions ") + (identical ? "bit-identical" : "differ") +
                                     ", corrupted checksum " + (rejected ? "rejected" : "accepted")};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"gradient suite", gradient_suite},       {"equation oracles", equation_oracles},
      {"pipeline arithmetic", pipeline_arithmetic}, {"metrics", metrics_values},
      {"learning capability", learning_capability}, {"determinism", determinism},
      {"persistence", persistence},
  };
  int failures = 0, index = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.passed;
    std::printf("criterion %d %-20s %s  %s\n", ++index, name, o.passed ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
