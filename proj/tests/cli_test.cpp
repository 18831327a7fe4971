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

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fnet/cli.hpp"
#include "fnet/errors.hpp"
#include "fnet/metrics.hpp"
#include "fnet/synthetic.hpp"
#include "test_util.hpp"

using namespace fnet;
using test_util::TempDir;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fnet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

constexpr const char* kTinyConfig =
    "# tiny model on a small fixture\n"
    "input_height = 16\ninput_width = 16\ninput_channels = 1\n"
    "conv_filters = 2,2,2\ndense_units = 8\nlstm_units = 4\n"
    "epochs = 2\nbatch_size = 8\nlearning_rate = 0.01\nrecord_wall_time = false\n";

// Synthetic fixture plus a tiny-model config file.
struct Fixture {
  TempDir dir{"cli"};
  SyntheticOdir odir;
  fs::path config = dir / "run.cfg";
  fs::path run = dir / "run";

  explicit Fixture(SyntheticOdirOptions o = {12, 16, 2, 24, 5}) {
    odir = write_synthetic_odir(dir / "odir", o);
    spit(config, kTinyConfig);
  }
  std::vector<std::string> base(const std::string& cmd) const {
    return {cmd, "-c", config.string(), "-o", run.string()};
  }
  CliRun prepare(std::vector<std::string> extra = {}) const {
    auto args = base("prepare");
    for (const char* a : {"--csv", "", "--image-dir", ""}) args.emplace_back(a);
    args[6] = odir.csv.string();
    args[8] = odir.image_dir.string();
    args.insert(args.end(), extra.begin(), extra.end());
    return cli(args);
  }
};

}  // namespace

TEST(ConfigTest, TextAndJsonAgree) {
  TempDir dir("cfg");
  spit(dir / "a.cfg", "seed = 9\n# comment\nepochs=4\nconv_filters = 3, 5\nlearning_rate = 0.5\n\n");
  spit(dir / "a.json", R"({"seed": 9, "epochs": 4, "conv_filters": "3,5", "learning_rate": 0.5})");
  const RunConfig a = resolve_config(dir / "a.cfg", {});
  const RunConfig b = resolve_config(dir / "a.json", {});
  EXPECT_EQ(to_config_text(a), to_config_text(b));
  EXPECT_EQ(a.seed, 9u);
  EXPECT_EQ(a.train.seed, 9u);
  EXPECT_EQ(a.train.epochs, 4u);
  EXPECT_EQ(a.descriptor.conv_filters, (std::vector<std::size_t>{3, 5}));
  EXPECT_EQ(a.train.learning_rate, 0.5);
}

TEST(ConfigTest, RejectsBadInput) {
  EXPECT_THROW(parse_config_text("seed = 1\nseed = 2\n"), ConfigError);
  EXPECT_THROW(parse_config_text(R"({"seed": 1, "seed": 2})"), ConfigError);
  EXPECT_THROW(parse_config_text("just words\n"), ConfigError);
  EXPECT_THROW(parse_config_text(R"({"nested": {"a": 1}})"), ConfigError);

  RunConfig c;
  try {
    apply_setting(c, "no_such_key", "1");
    FAIL() << "unknown key accepted";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "no_such_key");
  }
  for (const auto& [key, value] : std::vector<std::pair<std::string, std::string>>{
           {"epochs", "abc"}, {"ratio", "x"}, {"seed", "-1"}, {"record_wall_time", "maybe"}, {"conv_filters", "2,,3"}}) {
    try {
      apply_setting(c, key, value);
      ADD_FAILURE() << key << "=" << value << " accepted";
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.key(), key);
    }
  }
}

TEST(ConfigTest, ValidationNamesKey) {
  try {
    resolve_config(std::nullopt, {{"ratio", "1.5"}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "ratio");
  }
  EXPECT_THROW(resolve_config(std::nullopt, {{"batch_size", "0"}}), ConfigError);
}

TEST(ConfigTest, Precedence) {
  TempDir dir("prec");
  ::unsetenv(kOutDirEnv);
  EXPECT_EQ(resolve_config(std::nullopt, {}).out_dir, fs::path(kDefaultOutDir));
  ::setenv(kOutDirEnv, "from-env", 1);
  EXPECT_EQ(resolve_config(std::nullopt, {}).out_dir, fs::path("from-env"));
  spit(dir / "f.cfg", "out_dir = from-file\nepochs = 3\n");
  EXPECT_EQ(resolve_config(dir / "f.cfg", {}).out_dir, fs::path("from-file"));
  const RunConfig c = resolve_config(dir / "f.cfg", {{"out_dir", "from-flag"}});
  EXPECT_EQ(c.out_dir, fs::path("from-flag"));
  EXPECT_EQ(c.train.epochs, 3u);
  EXPECT_EQ(c.manifest_path(), fs::path("from-flag") / "manifest.tsv");
  EXPECT_EQ(c.checkpoint_path(), fs::path("from-flag") / "checkpoint.fnet");
  ::unsetenv(kOutDirEnv);
}

TEST(ConfigTest, CanonicalTextRoundTrips) {
  RunConfig c = resolve_config(std::nullopt, {{"learning_rate", "0.1"}, {"conv_filters", "4,8"}, {"csv", "a b.csv"},
                                              {"threshold", "0.3"}, {"resume", "true"}});
  const std::string text = to_config_text(c);
  RunConfig d;
  for (const auto& [k, v] : parse_config_text(text)) apply_setting(d, k, v);
  EXPECT_EQ(to_config_text(d), text);
  EXPECT_EQ(d.csv, fs::path("a b.csv"));
  EXPECT_TRUE(d.resume);
  EXPECT_EQ(config_keys().size(), parse_config_text(text).size());
}

TEST(CliTest, FullPipeline) {
  Fixture fx;
  const CliRun prep = fx.prepare();
  ASSERT_EQ(prep.code, 0) << prep.err;
  EXPECT_TRUE(fs::exists(fx.run / "manifest.tsv"));
  EXPECT_TRUE(fs::exists(fx.run / "config.prepare.txt"));

  const CliRun train = cli(fx.base("train"));
  ASSERT_EQ(train.code, 0) << train.err;
  EXPECT_TRUE(fs::exists(fx.run / "checkpoint.fnet"));
  const std::string log = slurp(fx.run / "epochs.csv");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 3) << log;

  const CliRun ev = cli(fx.base("eval"));
  ASSERT_EQ(ev.code, 0) << ev.err;
  for (const char* key : {"accuracy", "precision", "recall", "sensitivity", "specificity", "f1", "auc"})
    EXPECT_NE(ev.out.find(key), std::string::npos) << key;
  const fs::path report = fx.run / "report-test.json";
  ASSERT_TRUE(fs::exists(report));
  ASSERT_TRUE(fs::exists(fx.run / "roc-test.csv"));
  const std::string json = slurp(report);
  EXPECT_EQ(to_json(report_from_json(json)) + "\n", json);

  const CliRun ev_train = cli({"eval", "-c", fx.config.string(), "-o", fx.run.string(), "--partition", "train"});
  EXPECT_EQ(ev_train.code, 0) << ev_train.err;
  EXPECT_TRUE(fs::exists(fx.run / "report-train.json"));

  const fs::path img = fx.odir.image_dir / "1_left.png";
  const CliRun pred = cli({"predict", "-c", fx.config.string(), "-o", fx.run.string(), img.string()});
  ASSERT_EQ(pred.code, 0) << pred.err;
  EXPECT_EQ(pred.out.rfind(img.string(), 0), 0u) << pred.out;
}

TEST(CliTest, ResumeContinuesEpochNumbering) {
  Fixture fx;
  ASSERT_EQ(fx.prepare().code, 0);
  ASSERT_EQ(cli(fx.base("train")).code, 0);
  auto args = fx.base("train");
  args.insert(args.end(), {"--resume", "--epochs", "4"});
  const CliRun r = cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("resuming after epoch 2"), std::string::npos) << r.out;
  std::istringstream log(slurp(fx.run / "epochs.csv"));
  std::string line;
  std::getline(log, line);
  for (int epoch = 1; epoch <= 4; ++epoch) {
    ASSERT_TRUE(std::getline(log, line));
    EXPECT_EQ(line.substr(0, line.find(',')), std::to_string(epoch));
  }
  EXPECT_FALSE(std::getline(log, line));
}

TEST(CliTest, SameSeedSameManifest) {
  Fixture fx;
  ASSERT_EQ(fx.prepare().code, 0);
  const std::string first = slurp(fx.run / "manifest.tsv");
  ASSERT_EQ(fx.prepare().code, 0);
  EXPECT_EQ(slurp(fx.run / "manifest.tsv"), first);
  ASSERT_EQ(fx.prepare({"--seed", "77"}).code, 0);
  EXPECT_NE(slurp(fx.run / "manifest.tsv"), first);
}

TEST(CliTest, MissingInputsExitTwo) {
  Fixture fx;
  auto args = fx.base("prepare");
  args.insert(args.end(), {"--csv", fx.odir.csv.string(), "--image-dir", (fx.dir / "nowhere").string()});
  const CliRun r = cli(args);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nowhere"), std::string::npos) << r.err;

  auto no_csv = fx.base("prepare");
  no_csv.insert(no_csv.end(), {"--csv", (fx.dir / "absent.csv").string()});
  const CliRun c = cli(no_csv);
  EXPECT_EQ(c.code, 2);
  EXPECT_NE(c.err.find("absent.csv"), std::string::npos) << c.err;

  EXPECT_EQ(cli(fx.base("train")).code, 2);  // no manifest yet
  EXPECT_EQ(cli({"bogus"}).code, 2);
}

TEST(CliTest, UnknownSetKeyExitsTwoNamingKey) {
  Fixture fx;
  auto args = fx.base("train");
  args.insert(args.end(), {"--set", "no_such_key=1"});
  const CliRun r = cli(args);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("no_such_key"), std::string::npos) << r.err;

  spit(fx.dir / "bad.cfg", "lerning_rate = 0.1\n");
  const CliRun f = cli({"train", "-c", (fx.dir / "bad.cfg").string()});
  EXPECT_EQ(f.code, 2);
  EXPECT_NE(f.err.find("lerning_rate"), std::string::npos) << f.err;
}

TEST(CliTest, MissingImagesArePartialData) {
  Fixture fx;
  fs::remove(fx.odir.image_dir / "2_right.png");
  const CliRun r = fx.prepare();
  EXPECT_EQ(r.code, 1) << r.err;
  EXPECT_NE(r.err.find("2_right.png"), std::string::npos) << r.err;
  EXPECT_TRUE(fs::exists(fx.run / "manifest.tsv"));
}

TEST(CliTest, PredictReportsEveryFile) {
  Fixture fx;
  ASSERT_EQ(fx.prepare().code, 0);
  ASSERT_EQ(cli(fx.base("train")).code, 0);
  const fs::path bad = fx.dir / "corrupt.png";
  spit(bad, "definitely not a png");
  const fs::path good = fx.odir.image_dir / "3_left.png";
  const CliRun r = cli({"predict", "-c", fx.config.string(), "-o", fx.run.string(), bad.string(), good.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("corrupt.png"), std::string::npos) << r.err;
  EXPECT_NE(r.out.find(good.string()), std::string::npos) << r.out;
}

TEST(CliTest, EvalGeometryMismatchExitsTwo) {
  Fixture fx;
  ASSERT_EQ(fx.prepare().code, 0);
  ASSERT_EQ(cli(fx.base("train")).code, 0);
  ASSERT_EQ(fx.prepare({"--image-shape", "8x8x1"}).code, 0);
  const CliRun r = cli(fx.base("eval"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("8x8x1"), std::string::npos) << r.err;
}

TEST(CliTest, GradcheckExitCodes) {
  EXPECT_EQ(cli({"gradcheck", "--seeds", "1"}).code, 0);
  const CliRun bad = cli({"gradcheck", "--seeds", "1", "--perturb", "conv2d"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
}

TEST(CliTest, UntrainedModelIsChance) {
  const ArchitectureDescriptor d = ArchitectureDescriptor::tiny();
  const auto samples = make_separable_set(100, ImageGeometry{16, 16, 1}, 3);
  const Model model = Model::build(d, 11);
  std::vector<Label> labels;
  std::vector<double> scores;
  for (const auto& s : samples) {
    labels.push_back(s.label);
    scores.push_back(model.predict_proba(s.image.reshaped(Shape{1, 16, 16, 1}))[0]);
  }
  const EvalReport r = evaluate(labels, scores);
  EXPECT_NEAR(*r.metrics.accuracy.value, 0.5, 0.15);
}

TEST(CliTest, TrainedToPerfectionScoresOne) {
  Fixture fx;
  ASSERT_EQ(fx.prepare().code, 0);
  auto args = fx.base("train");
  args.insert(args.end(), {"--epochs", "30"});
  ASSERT_EQ(cli(args).code, 0);
  ASSERT_EQ(cli(fx.base("eval")).code, 0);
  const EvalReport r = report_from_json(slurp(fx.run / "report-test.json"));
  for (const Rate* m : {&r.metrics.accuracy, &r.metrics.precision, &r.metrics.recall, &r.metrics.sensitivity,
                        &r.metrics.specificity, &r.metrics.f1})
    EXPECT_EQ(m->value, 1.0);
}

TEST(CliTest, PredictFormatsAndIsDeterministic) {
  Fixture fx;
  ASSERT_EQ(fx.prepare().code, 0);
  ASSERT_EQ(cli(fx.base("train")).code, 0);
  const fs::path a = fx.odir.image_dir / "1_left.png", b = fx.dir / "copy.png";
  fs::copy_file(a, b);
  const CliRun r = cli({"predict", "-c", fx.config.string(), "-o", fx.run.string(), a.string(), b.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string path, prob, label;
  std::vector<std::string> probs;
  while (lines >> path >> prob >> label) {
    ASSERT_EQ(prob.size(), 6u) << prob;  // 0.dddd
    const double p = std::stod(prob);
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
    EXPECT_TRUE(label == "cataract" || label == "normal") << label;
    probs.push_back(prob);
  }
  ASSERT_EQ(probs.size(), 2u) << r.out;
  EXPECT_EQ(probs[0], probs[1]);
}
