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

#include "fnet/errors.hpp"
#include "fnet/gradcheck.hpp"

using namespace fnet;

TEST(RelativeErrorTest, Floor) {
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_NEAR(relative_error(1e-9, 0.0), 1e-9 / kRelativeErrorFloor, 1e-18);
  EXPECT_NEAR(relative_error(1.0, 3.0), 0.5, 1e-15);
  EXPECT_EQ(relative_error(2.0, 2.0), 0.0);
}

TEST(FiniteDifferenceTest, QuadraticExact) {
  Tensor x = Tensor::from_values(Shape{3}, {0.5, -1.0, 2.0});
  Tensor g = Tensor::from_values(Shape{3}, {1.0, -2.0, 4.0});  // d/dx of sum x^2
  const ProbeResult ok = finite_difference_check({{"x", &x, &g}}, [&] {
    double s = 0.0;
    for (double v : x.values()) s += v * v;
    return s;
  });
  EXPECT_EQ(ok.checked, 3u);
  EXPECT_LT(ok.max_error, 1e-9);
  EXPECT_EQ(x[1], -1.0);  // restored

  g[2] = 5.0;
  const ProbeResult bad = finite_difference_check({{"x", &x, &g}}, [&] {
    double s = 0.0;
    for (double v : x.values()) s += v * v;
    return s;
  });
  EXPECT_GT(bad.max_error, 0.1);
  EXPECT_EQ(bad.worst, "x[2]");
}

TEST(GradcheckSuiteTest, PassesAndIsDeterministic) {
  GradcheckOptions opt;
  opt.seeds = 2;
  const GradcheckReport a = run_gradcheck_suite(opt);
  ASSERT_EQ(a.rows.size(), gradcheck_row_names().size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].name, gradcheck_row_names()[i]);
    EXPECT_TRUE(a.rows[i].passed) << a.rows[i].name << " " << a.rows[i].max_error;
    EXPECT_GT(a.rows[i].checked, 0u);
  }
  EXPECT_TRUE(a.passed());
  EXPECT_EQ(run_gradcheck_suite(opt).table(), a.table());
}

TEST(GradcheckSuiteTest, PerturbationFailsOnlyThatRow) {
  GradcheckOptions opt;
  opt.seeds = 1;
  for (const std::string& name : gradcheck_row_names()) {
    opt.perturb = name;
    const GradcheckReport r = run_gradcheck_suite(opt);
    EXPECT_FALSE(r.passed()) << name;
    for (const GradcheckRow& row : r.rows) EXPECT_EQ(row.passed, row.name != name) << name << " / " << row.name;
  }
}

TEST(GradcheckSuiteTest, UnknownPerturbName) {
  GradcheckOptions opt;
  opt.seeds = 1;
  opt.perturb = "no_such_layer";
  EXPECT_THROW(run_gradcheck_suite(opt), ParameterError);
}

TEST(GradcheckSuiteTest, TableListsEveryRow) {
  GradcheckOptions opt;
  opt.seeds = 1;
  const std::string t = run_gradcheck_suite(opt).table();
  EXPECT_EQ(t.rfind("layer", 0), 0u);
  for (const std::string& name : gradcheck_row_names()) EXPECT_NE(t.find(name), std::string::npos) << name;
}
