// Copyright 2026 The voxface Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "test_util.h"
#include "voxface/stats.h"

namespace voxface {
namespace {

// N values with the given sample mean and sample standard deviation.
std::vector<double> WithMoments(int n, double mean, double sd) {
  std::vector<double> z(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) z[i] = (i % 2 == 0 ? 1.0 : -1.0) * (1.0 + 0.01 * i);
  double m = SampleMean(z);
  for (double& v : z) v -= m;
  double s = SampleStd(z);
  for (double& v : z) v = mean + sd * v / s;
  return z;
}

TEST_CASE("Student quantile against an independent implementation") {
  for (double dof : {1.0, 2.0, 10.0, 99.0, 500.0, 9e4, 2e5, 1e9}) {
    boost::math::students_t dist(dof);
    for (double p : {0.001, 0.05, 0.3, 0.5, 0.9, 0.95, 0.975, 0.999}) {
      CHECK(std::abs(StudentQuantile(p, dof) - boost::math::quantile(dist, p)) < 1e-4);
    }
  }
  CHECK(StudentQuantile(0.95, 99) == doctest::Approx(1.6604).epsilon(1e-4));
  CHECK_THROWS(StudentQuantile(0.0, 5));
  CHECK_THROWS(StudentQuantile(0.5, 0));
}

TEST_CASE("incomplete beta against an independent implementation") {
  for (double a : {0.5, 1.0, 3.0, 49.5}) {
    for (double b : {0.5, 2.0, 10.0}) {
      for (double x : {0.01, 0.2, 0.5, 0.77, 0.99}) {
        CHECK(RegularizedIncompleteBeta(a, b, x) ==
              doctest::Approx(boost::math::ibeta(a, b, x)).epsilon(1e-10));
      }
      for (double p : {0.01, 0.5, 0.95}) {
        CHECK(InverseRegularizedIncompleteBeta(a, b, p) ==
              doctest::Approx(boost::math::ibeta_inv(a, b, p)).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("confidence bound worked examples") {
  std::vector<double> a = WithMoments(100, 0.9, 0.1);
  CHECK(SampleMean(a) == doctest::Approx(0.9));
  CHECK(SampleStd(a) == doctest::Approx(0.1));
  CHECK(CiUpper(a, 0.05) == doctest::Approx(0.9166).epsilon(1e-4));
  CHECK(CiUpper(a, 0.05) < 1.0);
  std::vector<double> b = WithMoments(100, 0.99, 0.1);
  CHECK(CiUpper(b, 0.05) == doctest::Approx(1.0066).epsilon(1e-4));

  std::vector<double> same(7, 0.83);
  CHECK(CiUpper(same, 0.05) == doctest::Approx(0.83));
  std::vector<double> one = {0.5};
  CHECK_THROWS(CiUpper(one, 0.05));
  CHECK(SampleStd(std::vector<double>{1, 3}) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("confidence bound is shift and scale equivariant") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.9, 0.2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> r(20);
    for (double& v : r) v = g(rng);
    const double base = CiUpper(r, 0.05);
    std::vector<double> shifted = r, scaled = r;
    for (double& v : shifted) v += 0.3;
    for (double& v : scaled) v *= 2.0;
    CHECK(CiUpper(shifted, 0.05) == doctest::Approx(base + 0.3));
    CHECK(CiUpper(scaled, 0.05) == doctest::Approx(2.0 * base));
    CHECK(CiUpper(r, 0.01) > base);
  }
}

TEST_CASE("chance baseline and error pairs") {
  Eigen::MatrixXd train(3, 1);
  train << 1, 2, 3;
  ChanceEstimator c = ChanceBaseline(train);
  CHECK(c.constant[0] == 2.0);
  CHECK_THROWS(ChanceBaseline(Eigen::MatrixXd(0, 2)));

  Eigen::MatrixXd pred(2, 1), truth(2, 1);
  pred << 1, 2;
  truth << 1, 4;
  ErrorPair e = ComputeErrorPair(pred, c, truth, Split::kEval);
  CHECK(e.model_mse[0] == doctest::Approx(2.0));
  CHECK(e.chance_mse[0] == doctest::Approx(2.5));
  CHECK(e.ratio[0] == doctest::Approx(0.8));
  double brute_model = 0, brute_chance = 0;
  for (int i = 0; i < 2; ++i) {
    brute_model += (pred(i) - truth(i)) * (pred(i) - truth(i)) / 2;
    brute_chance += (2.0 - truth(i)) * (2.0 - truth(i)) / 2;
  }
  CHECK(e.ratio[0] == doctest::Approx(brute_model / brute_chance));

  CHECK(ComputeErrorPair(truth, c, truth, Split::kEval).ratio[0] == 0.0);
  Eigen::MatrixXd chance_pred = Eigen::MatrixXd::Constant(2, 1, 2.0);
  CHECK(ComputeErrorPair(chance_pred, c, truth, Split::kEval).ratio[0] == 1.0);

  CHECK_THROWS(ComputeErrorPair(pred, c, truth, Split::kTrain));
  CHECK_THROWS(ComputeErrorPair(pred, c, truth, Split::kSelect));

  // Chance MSE on the training split is the population variance.
  Eigen::MatrixXd chance_train = Eigen::MatrixXd::Constant(3, 1, 2.0);
  CHECK(((chance_train - train).array().square().mean()) == doctest::Approx(2.0 / 3));
}

TEST_CASE("report decisions follow the bound") {
  std::vector<std::vector<Eigen::VectorXd>> ratios(2);
  std::vector<double> good = WithMoments(100, 0.9, 0.1);
  std::vector<double> bad = WithMoments(100, 0.99, 0.1);
  for (int r = 0; r < 100; ++r) {
    Eigen::VectorXd v(2);
    v << good[r], bad[r];
    ratios[0].push_back(v);
    ratios[1].push_back(v * 1.2);
  }
  TestReport rep = BuildReport({"a", "b"}, {1.0, 0.5}, ratios, 0.05);
  CHECK(rep.runs == 100);
  CHECK(rep.Find("a", 1.0).predictable);
  CHECK(!rep.Find("b", 1.0).predictable);
  CHECK(!rep.Find("a", 0.5).predictable);
  CHECK(rep.AtLevel(0.5).size() == 2);
  for (const AmTest& t : rep.tests) CHECK(t.predictable == (t.ci_upper < 1.0));
  CHECK_THROWS(rep.Find("zz", 1.0));

  auto dir = testing::TempDir("stats");
  WriteTestReport(dir / "r.csv", rep, "note");
  TestReport back = ReadTestReport(dir / "r.csv");
  REQUIRE(back.tests.size() == rep.tests.size());
  CHECK(back.runs == 100);
  for (size_t i = 0; i < rep.tests.size(); ++i) {
    CHECK(back.tests[i].am_id == rep.tests[i].am_id);
    CHECK(back.tests[i].ci_upper == rep.tests[i].ci_upper);
    CHECK(back.tests[i].predictable == rep.tests[i].predictable);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("uncertainty filtering keeps the lowest fraction") {
  CHECK(RetainedCount(100, 1.0) == 100);
  CHECK(RetainedCount(100, 0.75) == 75);
  CHECK(RetainedCount(3, 0.5) == 2);
  CHECK(RetainedCount(1, 0.1) == 1);
  CHECK_THROWS(RetainedCount(10, 0.0));
  CHECK_THROWS(RetainedCount(10, 1.5));

  std::vector<double> u = {0.5, 0.1, 0.3, 0.1, 0.9, 0.2};
  std::vector<std::string> ids = {"f", "e", "d", "c", "b", "a"};
  std::vector<int> keep = RetainLowestUncertainty(u, ids, 0.5);
  CHECK(keep == std::vector<int>{3, 1, 5});
  CHECK(RetainLowestUncertainty(u, ids, 1.0).size() == 6);
}

TEST_CASE("harness seeds are distinct and stable") {
  auto s = HarnessSeeds(42, 100);
  CHECK(s.size() == 100);
  CHECK(std::set<uint64_t>(s.begin(), s.end()).size() == 100);
  CHECK(HarnessSeeds(42, 3) == std::vector<uint64_t>(s.begin(), s.begin() + 3));
  CHECK(HarnessSeeds(43, 3) != std::vector<uint64_t>(s.begin(), s.begin() + 3));
}

TEST_CASE("harness results do not depend on the worker count") {
  ExperimentData data = testing::SmallExperiment(5, 80);
  HarnessConfig config;
  config.runs = 3;
  config.seed = 11;
  config.training = DeskScaleTrainingConfig();
  config.training.iterations = 30;
  config.jobs = 1;
  HarnessResult a = RunHarness(data, config);
  config.jobs = 3;
  HarnessResult b = RunHarness(data, config);
  REQUIRE(a.report.tests.size() == b.report.tests.size());
  CHECK(a.report.tests.size() == 3 * data.am_ids.size());
  for (size_t i = 0; i < a.report.tests.size(); ++i) {
    CHECK(a.report.tests[i].ratios == b.report.tests[i].ratios);
  }
  for (size_t r = 0; r < a.runs.size(); ++r) {
    CHECK(a.runs[r].means == b.runs[r].means);
    CHECK(a.runs[r].seed == HarnessSeeds(11, 3)[r]);
  }
  config.runs = 1;
  CHECK_THROWS(RunHarness(data, config));
}

}  // namespace
}  // namespace voxface
