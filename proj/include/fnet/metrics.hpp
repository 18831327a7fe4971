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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fnet/label.hpp"

namespace fnet {

// Cataract is the positive class.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const Label> labels, std::span<const Label> predictions);

// A rate that may be 0/0. Undefined carries the name of the zero denominator
// instead of silently reading as 0.
struct Rate {
  std::optional<double> value;
  std::string undefined_because;

  bool defined() const noexcept { return value.has_value(); }
  static Rate of(std::uint64_t numerator, std::uint64_t denominator, const char* denominator_name);

  friend bool operator==(const Rate&, const Rate&) = default;
};

struct ScalarMetrics {
  Rate accuracy;
  Rate precision;
  Rate recall;
  Rate sensitivity;  // identical to recall
  Rate specificity;
  Rate f1;

  friend bool operator==(const ScalarMetrics&, const ScalarMetrics&) = default;
};

ScalarMetrics scalar_metrics(const ConfusionMatrix& cm);

struct RocPoint {
  double threshold;  // +inf for the leading (0, 0) sentinel
  double fpr;
  double tpr;

  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

struct RocCurve {
  std::vector<RocPoint> points;  // threshold descending, (0,0) first, (1,1) last
  double auc = 0.0;

  friend bool operator==(const RocCurve&, const RocCurve&) = default;
};

// One point per unique score (ties grouped), AUC by the trapezoidal rule.
// Throws ParameterError unless both classes are present and scores finite.
RocCurve roc(std::span<const Label> labels, std::span<const double> scores);

struct EvalReport {
  ConfusionMatrix confusion;
  ScalarMetrics metrics;
  std::optional<RocCurve> roc;  // absent when only one class is present
  double threshold = 0.5;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

EvalReport evaluate(std::span<const Label> labels, std::span<const double> scores, double threshold = 0.5);

// Canonical JSON (sorted keys). Undefined rates serialize as null with an
// "undefined" reason; the +inf sentinel threshold as null.
std::string to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

// threshold,fpr,tpr rows for external plotting.
std::string roc_csv(const RocCurve& curve);

}  // namespace fnet
