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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "fnet/cli.hpp"
#include "fnet/errors.hpp"
#include "fnet/gradcheck.hpp"
#include "fnet/metrics.hpp"
#include "fnet/model.hpp"

namespace py = pybind11;

namespace {

fnet::Tensor from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  std::vector<std::size_t> dims(a.shape(), a.shape() + a.ndim());
  const std::span<const double> values(a.data(), static_cast<std::size_t>(a.size()));
  return fnet::Tensor::from_values(fnet::Shape(dims), {values.begin(), values.end()});
}

py::array_t<double> to_array(const fnet::Tensor& t) {
  const auto& dims = t.shape().dims();
  py::array_t<double> out(std::vector<py::ssize_t>(dims.begin(), dims.end()));
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

std::vector<fnet::Label> to_labels(const std::vector<int>& labels) {
  std::vector<fnet::Label> out;
  for (int v : labels) {
    if (v != 0 && v != 1) throw fnet::ParameterError("labels must be 0 or 1");
    out.push_back(v == 1 ? fnet::Label::cataract : fnet::Label::normal);
  }
  return out;
}

py::object json_loads(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

}  // namespace

PYBIND11_MODULE(_fnet, m) {
  m.doc() = "CNN-LSTM cataract classifier core";

  py::register_exception<fnet::Error>(m, "FnetError");

  py::class_<fnet::Model>(m, "Model")
      .def_static(
          "build",
          [](const std::string& descriptor_json, std::uint64_t seed) {
            return fnet::Model::build(fnet::ArchitectureDescriptor::from_json(descriptor_json), seed);
          },
          py::arg("descriptor_json"), py::arg("seed") = 0)
      .def_static("load", [](const std::filesystem::path& path) { return fnet::load(path); })
      .def("save", [](const fnet::Model& model, const std::filesystem::path& path) { fnet::save(model, path); })
      .def("predict_proba",
           [](const fnet::Model& model, const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
             return to_array(model.predict_proba(from_array(x)));
           })
      .def_property_readonly("parameter_count", &fnet::Model::parameter_count)
      .def_property_readonly("descriptor_json", [](const fnet::Model& model) { return model.descriptor().to_json(); })
      .def_property_readonly("layer_names", [](const fnet::Model& model) { return model.descriptor().layer_names(); });

  m.def("tiny_descriptor_json", [] { return fnet::ArchitectureDescriptor::tiny().to_json(); });
  m.def("default_descriptor_json", [] { return fnet::ArchitectureDescriptor{}.to_json(); });

  m.def(
      "evaluate",
      [](const std::vector<int>& labels, const std::vector<double>& scores, double threshold) {
        return json_loads(fnet::to_json(fnet::evaluate(to_labels(labels), scores, threshold)));
      },
      py::arg("labels"), py::arg("scores"), py::arg("threshold") = 0.5);

  m.def(
      "gradcheck",
      [](std::uint64_t seed, std::size_t seeds) {
        fnet::GradcheckOptions options;
        options.seed = seed;
        options.seeds = seeds;
        py::list rows;
        for (const auto& r : fnet::run_gradcheck_suite(options).rows) {
          py::dict row;
          row["name"] = r.name;
          row["max_error"] = r.max_error;
          row["tolerance"] = r.tolerance;
          row["checked"] = r.checked;
          row["passed"] = r.passed;
          rows.append(row);
        }
        return rows;
      },
      py::arg("seed") = 0, py::arg("seeds") = 5);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::vector<const char*> argv{"fnet"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = fnet::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return py::make_tuple(code, out.str(), err.str());
  });
}
