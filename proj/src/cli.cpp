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

#include "fnet/cli.hpp"

#include <cstdio>
#include <deque>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "fnet/errors.hpp"
#include "fnet/image.hpp"
#include "fnet/metrics.hpp"
#include "fnet/model.hpp"
#include "fnet/train.hpp"

namespace fnet {
namespace {

namespace fs = std::filesystem;

// Maps library failures onto exit codes so every command behaves the same.
int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const CorpusError& e) {
    err << "error: " << e.what() << "\n";
    return kExitPartialData;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitPartialData;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitPartialData;
  }
}

bool require_file(const fs::path& path, const char* what, std::ostream& err) {
  if (!path.empty() && fs::is_regular_file(path)) return true;
  err << "error: missing " << what << ": " << (path.empty() ? "(not set)" : path.string()) << "\n";
  return false;
}

bool require_dir(const fs::path& path, const char* what, std::ostream& err) {
  if (!path.empty() && fs::is_directory(path)) return true;
  err << "error: missing " << what << ": " << (path.empty() ? "(not set)" : path.string()) << "\n";
  return false;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f || !(f << text) || !f.flush()) throw IoError("cannot write " + path.string());
}

void echo_config(const RunConfig& config, const char* command) {
  write_text(config.out_dir / ("config." + std::string(command) + ".txt"), to_config_text(config));
}

std::string class_counts(std::span<const SampleKey> keys) {
  std::size_t cataract = 0;
  for (const auto& k : keys) cataract += k.label == Label::cataract;
  return "cataract " + std::to_string(cataract) + ", normal " + std::to_string(keys.size() - cataract);
}

std::string format_rate(const Rate& r) {
  if (!r.defined()) return "undefined (" + r.undefined_because + " is 0)";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *r.value);
  return buf;
}

fs::path image_dir_for(const RunConfig& config, const Manifest& manifest) {
  return config.image_dir.empty() ? manifest.image_dir : config.image_dir;
}

// Drops epoch log rows past the checkpoint so a resumed run does not repeat them.
void truncate_log(const fs::path& path, std::size_t last_epoch) {
  if (!fs::exists(path)) return;
  std::ifstream in(path);
  std::string line, kept;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!header) {
      const std::size_t epoch = std::stoull(line.substr(0, line.find(',')));
      if (epoch > last_epoch) break;
    }
    kept += line + "\n";
    header = false;
  }
  in.close();
  write_text(path, kept);
}

}  // namespace

fs::path report_path(const RunConfig& config, Partition partition) {
  return config.out_dir / ("report-" + std::string(to_string(partition)) + ".json");
}

fs::path roc_path(const RunConfig& config, Partition partition) {
  return config.out_dir / ("roc-" + std::string(to_string(partition)) + ".csv");
}

int cmd_prepare(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!require_file(config.csv, "labels CSV", err) || !require_dir(config.image_dir, "image directory", err)) {
      return int{kExitUsage};
    }
    const LabelTable table = parse_labels(config.csv);
    for (const auto& issue : table.skipped) err << "warning: line " << issue.line << ": " << issue.message << "\n";
    const CorpusSelection selection = select_binary_corpus(table.records, config.image_dir, config.seed);
    for (const auto& missing : selection.skipped) err << "warning: missing image " << missing << "\n";

    const auto augmented = augment(std::span<const SampleKey>(selection.samples));
    Manifest manifest{split(augmented, config.ratio, config.seed), fs::absolute(config.image_dir).lexically_normal(),
                      config.geometry()};
    const fs::path path = config.manifest_path();
    fs::create_directories(config.out_dir);
    write_manifest(manifest, path);
    echo_config(config, "prepare");

    const auto train = manifest.split.partition(Partition::train);
    const auto test = manifest.split.partition(Partition::test);
    char checksum[16];
    std::snprintf(checksum, sizeof checksum, "%08x", manifest.split.checksum());
    out << "patients: " << table.records.size() << " (" << table.skipped.size() << " rows skipped)\n"
        << "eligible eyes: cataract " << selection.cataract_available << ", normal " << selection.normal_available
        << "\n"
        << "balanced: " << selection.samples.size() << " (" << class_counts(selection.samples) << ")\n"
        << "augmented: " << augmented.size() << " (" << class_counts(augmented) << ")\n"
        << "train: " << train.size() << " (" << class_counts(train) << ")\n"
        << "test: " << test.size() << " (" << class_counts(test) << ")\n"
        << "manifest: " << path.string() << " checksum " << checksum << "\n";
    const bool partial = !table.skipped.empty() || !selection.skipped.empty();
    return int{partial ? kExitPartialData : kExitOk};
  });
}

int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    if (!require_file(config.manifest_path(), "manifest", err)) return kExitUsage;
    const Manifest manifest = read_manifest(config.manifest_path());
    if (!(manifest.geometry == config.geometry())) {
      err << "error: manifest image shape " << manifest.geometry.to_string() << " does not match model input "
          << config.geometry().to_string() << "\n";
      return kExitUsage;
    }
    const fs::path image_dir = image_dir_for(config, manifest);
    if (!require_dir(image_dir, "image directory", err)) return kExitUsage;

    TrainConfig tc = config.train;
    tc.seed = config.seed;
    tc.checkpoint_path = config.checkpoint_path();
    tc.log_path = config.log_path();
    fs::create_directories(config.out_dir);
    echo_config(config, "train");

    FitOptions options;
    std::optional<Model> model;
    if (config.resume && fs::exists(tc.checkpoint_path)) {
      Checkpoint ck = load_checkpoint(tc.checkpoint_path);
      if (!(ck.model.descriptor() == config.descriptor)) {
        err << "error: checkpoint architecture differs from the configured one\n";
        return kExitUsage;
      }
      if (ck.training.seed != config.seed) {
        err << "error: checkpoint was trained with seed " << ck.training.seed << ", config has " << config.seed
            << "\n";
        return kExitUsage;
      }
      options.first_epoch = ck.training.epoch + 1;
      options.resume = import_adam_state(ck.optimizer_state, trainable(std::as_const(ck.model.params())),
                                         ck.training.optimizer_step);
      model.emplace(std::move(ck.model));
      truncate_log(tc.log_path, ck.training.epoch);
      out << "resuming after epoch " << ck.training.epoch << "\n";
      if (options.first_epoch > tc.epochs) {
        out << "checkpoint already covers " << tc.epochs << " epochs\n";
        return kExitOk;
      }
    } else {
      if (config.resume) out << "no checkpoint at " << tc.checkpoint_path.string() << ", starting fresh\n";
      fs::remove(tc.log_path);
      model.emplace(Model::build(config.descriptor, config.seed));
    }

    const ManifestSource train(manifest.split.partition(Partition::train), image_dir, manifest.geometry);
    const ManifestSource test(manifest.split.partition(Partition::test), image_dir, manifest.geometry);
    out << "training on " << train.size() << " samples, testing on " << test.size() << "\n";
    options.on_epoch = [&](const EpochRecord& r) {
      char line[160];
      std::snprintf(line, sizeof line, "epoch %zu/%zu loss %.6f train_acc %.4f", r.epoch, tc.epochs, r.train_loss,
                    r.train_accuracy);
      out << line;
      if (r.test_accuracy) {
        std::snprintf(line, sizeof line, " test_acc %.4f", *r.test_accuracy);
        out << line;
      }
      out << "\n" << std::flush;
    };
    try {
      fit(*model, train, test.size() > 0 ? &test : nullptr, tc, std::move(options));
    } catch (const NumericalError& e) {
      err << "error: " << e.what() << "\n";
      if (fs::exists(tc.checkpoint_path)) err << "last good checkpoint kept at " << tc.checkpoint_path.string() << "\n";
      return kExitNumerical;
    }
    out << "checkpoint: " << tc.checkpoint_path.string() << "\nepoch log: " << tc.log_path.string() << "\n";
    return kExitOk;
  });
}

int cmd_eval(const RunConfig& config, Partition partition, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    if (!require_file(config.checkpoint_path(), "checkpoint", err)) return kExitUsage;
    if (!require_file(config.manifest_path(), "manifest", err)) return kExitUsage;
    const Model model = load(config.checkpoint_path());
    const Manifest manifest = read_manifest(config.manifest_path());
    const auto& d = model.descriptor();
    const ImageGeometry model_geometry{d.input_height, d.input_width, d.input_channels};
    if (!(model_geometry == manifest.geometry)) {
      err << "error: checkpoint expects " << model_geometry.to_string() << " images, manifest holds "
          << manifest.geometry.to_string() << "\n";
      return kExitUsage;
    }
    const fs::path image_dir = image_dir_for(config, manifest);
    if (!require_dir(image_dir, "image directory", err)) return kExitUsage;
    const auto keys = manifest.split.partition(partition);
    if (keys.empty()) {
      err << "error: partition " << to_string(partition) << " is empty\n";
      return kExitPartialData;
    }

    const ManifestSource source(keys, image_dir, manifest.geometry);
    const std::vector<double> scores = predict_source(model, source, config.train.batch_size);
    std::vector<Label> labels;
    for (const auto& k : keys) labels.push_back(k.label);
    const EvalReport report = evaluate(labels, scores, config.threshold);

    fs::create_directories(config.out_dir);
    echo_config(config, "eval");
    write_text(report_path(config, partition), to_json(report) + "\n");
    if (report.roc) write_text(roc_path(config, partition), roc_csv(*report.roc));

    const auto& m = report.metrics;
    const auto& cm = report.confusion;
    out << "partition: " << to_string(partition) << " (" << keys.size() << " samples)\n"
        << "confusion: tp " << cm.tp << " fp " << cm.fp << " fn " << cm.fn << " tn " << cm.tn << "\n"
        << "accuracy: " << format_rate(m.accuracy) << "\n"
        << "precision: " << format_rate(m.precision) << "\n"
        << "recall: " << format_rate(m.recall) << "\n"
        << "sensitivity: " << format_rate(m.sensitivity) << "\n"
        << "specificity: " << format_rate(m.specificity) << "\n"
        << "f1: " << format_rate(m.f1) << "\n";
    if (report.roc) {
      char auc[32];
      std::snprintf(auc, sizeof auc, "%.4f", report.roc->auc);
      out << "auc: " << auc << "\n";
    } else {
      out << "auc: undefined (single class)\n";
    }
    out << "report: " << report_path(config, partition).string() << "\n";
    return kExitOk;
  });
}

int cmd_predict(const RunConfig& config, const std::vector<fs::path>& images, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    if (!require_file(config.checkpoint_path(), "checkpoint", err)) return kExitUsage;
    const Model model = load(config.checkpoint_path());
    const auto& d = model.descriptor();
    const ImageGeometry geometry{d.input_height, d.input_width, d.input_channels};
    bool failed = false;
    for (const auto& path : images) {
      try {
        const Tensor image = prepare_image(decode_image(path), geometry);
        const double p = model.predict_proba(image.reshaped(Shape{1, geometry.height, geometry.width,
                                                                   geometry.channels}))[0];
        char line[64];
        std::snprintf(line, sizeof line, " %.4f ", p);
        out << path.string() << line << to_string(p >= config.threshold ? Label::cataract : Label::normal) << "\n";
      } catch (const Error& e) {
        err << path.string() << ": " << e.what() << "\n";
        failed = true;
      }
    }
    return failed ? kExitPartialData : kExitOk;
  });
}

int cmd_gradcheck(const GradcheckOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const GradcheckReport report = run_gradcheck_suite(options);
    out << report.table();
    out << (report.passed() ? "all gradients within tolerance\n" : "gradient check FAILED\n");
    return int{report.passed() ? kExitOk : kExitPartialData};
  });
}

int cmd_synth(const fs::path& dir, const SyntheticOdirOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const SyntheticOdir fixture = write_synthetic_odir(dir, options);
    out << "csv: " << fixture.csv.string() << "\nimages: " << fixture.image_dir.string() << "\n";
    return int{kExitOk};
  });
}

namespace {

// Command-line values are collected as text and applied through the same
// key table as config files.
struct CommonFlags {
  std::optional<std::string> config_file;
  std::vector<std::string> settings;
  std::deque<std::pair<std::string, std::optional<std::string>>> named;  // stable addresses for CLI11

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_file, "Config file (key = value lines or flat JSON)");
    app->add_option("--set", settings, "Override any config key: --set key=value")->take_all();
  }
  // Registers a flag that overrides config key `key`.
  void option(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    named.emplace_back(key, std::nullopt);
    app->add_option(flag, named.back().second, help);
  }

  RunConfig resolve() const {
    ConfigEntries overrides;
    for (const auto& s : settings) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError(s, "--set expects key=value, got '" + s + "'");
      overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [key, value] : named) {
      if (!value) continue;
      if (key == "image_shape") {
        const ImageGeometry g = ImageGeometry::parse(*value);
        overrides.emplace_back("input_height", std::to_string(g.height));
        overrides.emplace_back("input_width", std::to_string(g.width));
        overrides.emplace_back("input_channels", std::to_string(g.channels));
      } else {
        overrides.emplace_back(key, *value);
      }
    }
    std::optional<fs::path> file;
    if (config_file) file = *config_file;
    return resolve_config(file, overrides);
  }
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cataract fundus classifier: data preparation, training and evaluation", "fnet"};
  app.require_subcommand(1);

  CommonFlags prepare_flags, train_flags, eval_flags, predict_flags;

  auto* prepare = app.add_subcommand("prepare", "Balance, augment and split the labelled corpus into a manifest");
  prepare_flags.attach(prepare);
  prepare_flags.option(prepare, "--csv", "csv", "ODIR label CSV");
  prepare_flags.option(prepare, "--image-dir", "image_dir", "Directory of fundus images");
  prepare_flags.option(prepare, "-o,--out-dir", "out_dir", "Run directory");
  prepare_flags.option(prepare, "--seed", "seed", "Master seed");
  prepare_flags.option(prepare, "--ratio", "ratio", "Train fraction of source images");
  prepare_flags.option(prepare, "--image-shape", "image_shape", "Model input as HxWxC");

  auto* train = app.add_subcommand("train", "Train a model on the manifest's train partition");
  train_flags.attach(train);
  train_flags.option(train, "--manifest", "manifest", "Manifest file");
  train_flags.option(train, "-o,--out-dir", "out_dir", "Run directory");
  train_flags.option(train, "--seed", "seed", "Master seed");
  train_flags.option(train, "--epochs", "epochs", "Total epochs");
  train_flags.option(train, "--batch-size", "batch_size", "Mini-batch size");
  train_flags.option(train, "--learning-rate", "learning_rate", "Adam step size");
  bool resume = false;
  train->add_flag("--resume", resume, "Continue from the run directory's checkpoint");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one manifest partition");
  eval_flags.attach(eval);
  eval_flags.option(eval, "--checkpoint", "checkpoint", "Checkpoint file");
  eval_flags.option(eval, "--manifest", "manifest", "Manifest file");
  eval_flags.option(eval, "-o,--out-dir", "out_dir", "Run directory");
  eval_flags.option(eval, "--threshold", "threshold", "Decision threshold");
  std::string partition_name = "test";
  eval->add_option("--partition", partition_name, "train or test")->check(CLI::IsMember({"train", "test"}));

  auto* predict = app.add_subcommand("predict", "Classify individual images");
  predict_flags.attach(predict);
  predict_flags.option(predict, "--checkpoint", "checkpoint", "Checkpoint file");
  predict_flags.option(predict, "-o,--out-dir", "out_dir", "Run directory holding checkpoint.fnet");
  predict_flags.option(predict, "--threshold", "threshold", "Decision threshold");
  std::vector<std::string> images;
  predict->add_option("images", images, "Image files")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "Compare every backward pass with finite differences");
  GradcheckOptions grad_options;
  gradcheck->add_option("--seed", grad_options.seed, "Seed");
  gradcheck->add_option("--seeds", grad_options.seeds, "Random instances per layer");
  gradcheck->add_option("--perturb", grad_options.perturb, "Corrupt one row's analytic gradient (harness test)")
      ->group("");

  auto* synth = app.add_subcommand("synth", "Write a small synthetic ODIR-format fixture");
  std::string synth_dir;
  SyntheticOdirOptions synth_options;
  synth->add_option("-o,--out-dir", synth_dir, "Fixture directory")->required();
  synth->add_option("--cataract", synth_options.cataract_eyes, "Cataract eyes");
  synth->add_option("--normal", synth_options.normal_eyes, "Normal eyes");
  synth->add_option("--other", synth_options.other_eyes, "Eyes with other diagnoses");
  synth->add_option("--size", synth_options.image_size, "Image side in pixels");
  synth->add_option("--seed", synth_options.seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  const auto with_config = [&](const CommonFlags& flags, const std::function<int(RunConfig&)>& run) {
    RunConfig config;
    try {
      config = flags.resolve();
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return int{kExitUsage};
    }
    return run(config);
  };

  if (*prepare) return with_config(prepare_flags, [&](RunConfig& c) { return cmd_prepare(c, out, err); });
  if (*train) {
    return with_config(train_flags, [&](RunConfig& c) {
      if (resume) c.resume = true;
      return cmd_train(c, out, err);
    });
  }
  if (*eval) {
    const Partition p = partition_name == "train" ? Partition::train : Partition::test;
    return with_config(eval_flags, [&](RunConfig& c) { return cmd_eval(c, p, out, err); });
  }
  if (*predict) {
    std::vector<fs::path> paths(images.begin(), images.end());
    return with_config(predict_flags, [&](RunConfig& c) { return cmd_predict(c, paths, out, err); });
  }
  if (*gradcheck) return cmd_gradcheck(grad_options, out, err);
  if (*synth) return cmd_synth(synth_dir, synth_options, out, err);
  return kExitUsage;
}

}  // namespace fnet
