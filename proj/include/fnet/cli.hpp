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

#include <filesystem>
#include <ostream>
#include <vector>

#include "fnet/config.hpp"
#include "fnet/data.hpp"
#include "fnet/gradcheck.hpp"
#include "fnet/synthetic.hpp"

namespace fnet {

enum ExitCode : int {
  kExitOk = 0,
  kExitPartialData = 1,
  kExitUsage = 2,
  kExitNumerical = 3,
};

// Each command reports on `out`, diagnostics on `err`, and returns an exit
// code instead of throwing.

// labels CSV -> balanced, augmented, split manifest under out_dir.
int cmd_prepare(const RunConfig& config, std::ostream& out, std::ostream& err);
// manifest -> checkpoint, epoch CSV and resolved config under out_dir.
int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err);
// checkpoint + manifest partition -> report JSON and ROC CSV under out_dir.
int cmd_eval(const RunConfig& config, Partition partition, std::ostream& out, std::ostream& err);
int cmd_predict(const RunConfig& config, const std::vector<std::filesystem::path>& images, std::ostream& out,
                std::ostream& err);
int cmd_gradcheck(const GradcheckOptions& options, std::ostream& out, std::ostream& err);
// Writes an ODIR-format fixture for smoke runs.
int cmd_synth(const std::filesystem::path& dir, const SyntheticOdirOptions& options, std::ostream& out,
              std::ostream& err);

std::filesystem::path report_path(const RunConfig& config, Partition partition);
std::filesystem::path roc_path(const RunConfig& config, Partition partition);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fnet
