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
#include <functional>
#include <string>
#include <vector>

#include "fnet/tensor.hpp"

namespace fnet {

inline constexpr double kLayerGradTolerance = 1e-5;
inline constexpr double kModelGradTolerance = 1e-4;
inline constexpr double kLossGradTolerance = 1e-7;
inline constexpr double kFiniteDifferenceStep = 1e-5;

// |a - n| / max(|a| + |n|, floor). The floor keeps gradients that are zero
// up to rounding from reading as 100% error.
inline constexpr double kRelativeErrorFloor = 1e-6;
double relative_error(double analytic, double numeric) noexcept;

// A tensor to perturb and the analytic gradient of the scalar loss w.r.t. it.
struct GradProbe {
  std::string name;
  Tensor* value;
  const Tensor* analytic;
};

struct ProbeResult {
  double max_error = 0.0;
  std::string worst;  // "name[index]"
  std::size_t checked = 0;
};

// Central differences of `loss` over every element of every probe.
ProbeResult finite_difference_check(const std::vector<GradProbe>& probes, const std::function<double()>& loss,
                                    double step = kFiniteDifferenceStep);

struct GradcheckRow {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

struct GradcheckOptions {
  std::uint64_t seed = 0;
  std::size_t seeds = 5;
  double step = kFiniteDifferenceStep;
  // Test hook: corrupt the analytic gradient of the named row so the harness
  // can be shown to fail.
  std::string perturb;
};

struct GradcheckReport {
  std::vector<GradcheckRow> rows;
  bool passed() const;
  std::string table() const;
};

// Every layer over `seeds` random instances plus an end-to-end check of the
// tiny model. Deterministic in the options.
GradcheckReport run_gradcheck_suite(const GradcheckOptions& options);

// Row names in the order run_gradcheck_suite emits them.
std::vector<std::string> gradcheck_row_names();

}  // namespace fnet
