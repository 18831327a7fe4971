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

#include "fnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "fnet/errors.hpp"
#include "json.hpp"

namespace fnet {

namespace {

using nlohmann::json;

json rate_json(const Rate& r) {
  if (r.defined()) return json{{"value", *r.value}};
  return json{{"value", nullptr}, {"undefined", r.undefined_because}};
}

Rate rate_from(const json& j) {
  Rate r;
  if (j.at("value").is_null()) {
    r.undefined_because = j.value("undefined", std::string());
  } else {
    r.value = j.at("value").get<double>();
  }
  return r;
}

}  // namespace

ConfusionMatrix confusion(std::span<const Label> labels, std::span<const Label> predictions) {
  if (labels.size() != predictions.size()) {
    throw ShapeError("confusion: " + std::to_string(labels.size()) + " labels vs " +
                     std::to_string(predictions.size()) + " predictions");
  }
  if (labels.empty()) throw ShapeError("confusion: no samples");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool actual = labels[i] == Label::cataract;
    const bool predicted = predictions[i] == Label::cataract;
    if (actual && predicted) ++cm.tp;
    else if (!actual && predicted) ++cm.fp;
    else if (!actual && !predicted) ++cm.tn;
    else ++cm.fn;
  }
  return cm;
}

Rate Rate::of(std::uint64_t numerator, std::uint64_t denominator, const char* denominator_name) {
  if (denominator == 0) return {std::nullopt, std::string(denominator_name) + " = 0"};
  return {static_cast<double>(numerator) / static_cast<double>(denominator), {}};
}

ScalarMetrics scalar_metrics(const ConfusionMatrix& cm) {
  ScalarMetrics m;
  m.accuracy = Rate::of(cm.tp + cm.tn, cm.total(), "total");
  m.precision = Rate::of(cm.tp, cm.tp + cm.fp, "tp + fp");
  m.recall = Rate::of(cm.tp, cm.tp + cm.fn, "tp + fn");
  m.sensitivity = m.recall;
  m.specificity = Rate::of(cm.tn, cm.tn + cm.fp, "tn + fp");
  if (!m.precision.defined()) {
    m.f1 = {std::nullopt, "precision undefined (" + m.precision.undefined_because + ")"};
  } else if (!m.recall.defined()) {
    m.f1 = {std::nullopt, "recall undefined (" + m.recall.undefined_because + ")"};
  } else {
    const double p = *m.precision.value, r = *m.recall.value;
    if (p + r == 0.0) {
      m.f1 = {std::nullopt, "precision + recall = 0"};
    } else {
      m.f1 = {2.0 * p * r / (p + r), {}};
    }
  }
  return m;
}

RocCurve roc(std::span<const Label> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw ShapeError("roc: labels and scores differ in length");
  std::uint64_t positives = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!std::isfinite(scores[i])) throw ParameterError("roc: scores must be finite");
    positives += labels[i] == Label::cataract;
  }
  const std::uint64_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw ParameterError("roc: both classes must be present (AUC undefined for single-class labels)");
  }

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double threshold = scores[order[k]];
    for (; k < order.size() && scores[order[k]] == threshold; ++k) {
      (labels[order[k]] == Label::cataract ? tp : fp) += 1;
    }
    curve.points.push_back({threshold, static_cast<double>(fp) / static_cast<double>(negatives),
                            static_cast<double>(tp) / static_cast<double>(positives)});
  }
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    const auto& a = curve.points[k - 1];
    const auto& b = curve.points[k];
    curve.auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return curve;
}

EvalReport evaluate(std::span<const Label> labels, std::span<const double> scores, double threshold) {
  if (labels.size() != scores.size()) throw ShapeError("evaluate: labels and scores differ in length");
  std::vector<Label> predicted;
  predicted.reserve(scores.size());
  for (double s : scores) predicted.push_back(s >= threshold ? Label::cataract : Label::normal);
  EvalReport report;
  report.threshold = threshold;
  report.confusion = confusion(labels, predicted);
  report.metrics = scalar_metrics(report.confusion);
  const bool both = report.confusion.tp + report.confusion.fn > 0 && report.confusion.tn + report.confusion.fp > 0;
  if (both) report.roc = roc(labels, scores);
  return report;
}

std::string to_json(const EvalReport& r) {
  const auto& m = r.metrics;
  json j{{"threshold", r.threshold},
         {"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}}},
         {"metrics",
          {{"accuracy", rate_json(m.accuracy)},
           {"precision", rate_json(m.precision)},
           {"recall", rate_json(m.recall)},
           {"sensitivity", rate_json(m.sensitivity)},
           {"specificity", rate_json(m.specificity)},
           {"f1", rate_json(m.f1)}}}};
  if (r.roc) {
    json points = json::array();
    for (const auto& p : r.roc->points) {
      points.push_back({{"threshold", std::isinf(p.threshold) ? json(nullptr) : json(p.threshold)},
                        {"fpr", p.fpr},
                        {"tpr", p.tpr}});
    }
    j["roc"] = {{"auc", r.roc->auc}, {"points", points}};
  } else {
    j["roc"] = nullptr;
  }
  return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  EvalReport r;
  try {
    const json j = json::parse(text);
    r.threshold = j.at("threshold").get<double>();
    const auto& c = j.at("confusion");
    r.confusion = {c.at("tp").get<std::uint64_t>(), c.at("fp").get<std::uint64_t>(), c.at("tn").get<std::uint64_t>(),
                   c.at("fn").get<std::uint64_t>()};
    const auto& m = j.at("metrics");
    r.metrics = {rate_from(m.at("accuracy")), rate_from(m.at("precision")), rate_from(m.at("recall")),
                 rate_from(m.at("sensitivity")), rate_from(m.at("specificity")), rate_from(m.at("f1"))};
    if (!j.at("roc").is_null()) {
      RocCurve curve;
      curve.auc = j["roc"].at("auc").get<double>();
      for (const auto& p : j["roc"].at("points")) {
        const double t = p.at("threshold").is_null() ? std::numeric_limits<double>::infinity()
                                                     : p.at("threshold").get<double>();
        curve.points.push_back({t, p.at("fpr").get<double>(), p.at("tpr").get<double>()});
      }
      r.roc = std::move(curve);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed evaluation report: ") + e.what());
  }
  return r;
}

std::string roc_csv(const RocCurve& curve) {
  std::string out = "threshold,fpr,tpr\n";
  char buf[96];
  for (const auto& p : curve.points) {
    if (std::isinf(p.threshold)) {
      std::snprintf(buf, sizeof buf, "inf,%.17g,%.17g\n", p.fpr, p.tpr);
    } else {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.fpr, p.tpr);
    }
    out += buf;
  }
  return out;
}

}  // namespace fnet
