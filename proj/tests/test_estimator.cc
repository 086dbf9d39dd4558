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
#include <vector>

#include "test_util.h"
#include "voxface/estimator.h"
#include "voxface/training.h"

namespace voxface {
namespace {

Eigen::MatrixXd RandomSegment(int frames, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(frames, 64);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

TEST_CASE("zero heads predict mean 0 and variance 1") {
  EstimatorModel model(5);
  model.Initialize(1);
  std::mt19937_64 rng(2);
  HeadOutputs out = model.Forward(RandomSegment(30, rng));
  CHECK(out.code.cols() == 64);
  CHECK((out.means.array() == 0.0).all());
  CHECK((out.variances.array() == 1.0).all());
  CHECK((out.code.array() >= 0.0).all());
}

TEST_CASE("forward is deterministic and rejects short segments") {
  EstimatorModel model(3);
  model.Initialize(4);
  std::mt19937_64 rng(5);
  for (double& p : model.params()) p += 1e-3;
  Eigen::MatrixXd seg = RandomSegment(40, rng);
  HeadOutputs a = model.Forward(seg), b = model.Forward(seg);
  CHECK(a.means == b.means);
  CHECK(a.variances == b.variances);
  CHECK(a.code == b.code);
  CHECK_THROWS(model.Forward(RandomSegment(19, rng)));
  CHECK_NOTHROW(model.Forward(RandomSegment(20, rng)));
  CHECK(ArchitectureMinFrames() <= kDefaultMinFrames);
  CHECK_THROWS(model.Forward(RandomSegment(ArchitectureMinFrames() - 1, rng), 1));

  EstimatorModel same(3);
  same.Initialize(4);
  EstimatorModel other(3);
  other.Initialize(5);
  CHECK(std::vector<double>(same.params().begin(), same.params().end()) !=
        std::vector<double>(other.params().begin(), other.params().end()));
}

TEST_CASE("loss gradients match central differences") {
  const int k = 4;
  EstimatorModel model(k);
  model.Initialize(7);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 0.05);
  const auto& s = model.slots();
  for (int slot : {s.mean_w, s.mean_b, s.var_w, s.var_b}) {
    for (double& p : nn::Vec(model.params(), model.layout().slot(slot))) p = g(rng);
  }

  std::vector<Example> examples(3);
  std::vector<BatchItem> batch;
  for (int i = 0; i < 3; ++i) {
    examples[i].speaker = "s" + std::to_string(i);
    examples[i].frames = std::make_shared<Eigen::MatrixXd>(RandomSegment(26, rng));
    examples[i].targets = Eigen::VectorXd::LinSpaced(k, -1.0 + i, 1.0 - i);
    batch.push_back({&examples[i], Segment{examples[i].speaker, 0, 26, ""}});
  }
  auto total = [&](bool frozen, std::vector<double>* grads) {
    std::mt19937_64 r(0);
    StepResult res = JointStep(model, nullptr, nullptr, batch, 0.0, frozen, r);
    if (grads) *grads = res.model_grads;
    return res.total;
  };

  for (bool frozen : {false, true}) {
    std::vector<double> ana;
    total(frozen, &ana);
    std::uniform_int_distribution<size_t> pick(0, model.num_params() - 1);
    // Sample from every slot so the heads and the backbone are all covered.
    std::vector<size_t> idx;
    for (const auto& slot : model.layout().slots()) {
      std::uniform_int_distribution<size_t> in(slot.offset, slot.offset + slot.size() - 1);
      idx.push_back(in(rng));
    }
    while (idx.size() < 25) idx.push_back(pick(rng));
    double worst = 0.0;
    for (size_t i : idx) {
      const double h = 1e-5;
      const double orig = model.params()[i];
      model.params()[i] = orig + h;
      const double up = total(frozen, nullptr);
      model.params()[i] = orig - h;
      const double down = total(frozen, nullptr);
      model.params()[i] = orig;
      const double num = (up - down) / (2 * h);
      const double denom = std::max({std::abs(num), std::abs(ana[i]), 1e-6});
      worst = std::max(worst, std::abs(num - ana[i]) / denom);
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("plain and uncertainty losses") {
  CHECK(LossPlain(2, 2) == 0);
  CHECK(LossPlain(3, 1) == 4);
  CHECK(LossUncertainty(2, 1, 1) == doctest::Approx(1.0));
  CHECK_THROWS(LossUncertainty(0, 0, 1));
  CHECK_THROWS(LossUncertainty(0, -1, 1));

  for (double e : {0.3, 1.0, 2.5}) {
    CHECK(LossUncertainty(e, 1.0, 0.0) == doctest::Approx(LossPlain(e, 0.0)));
    double best_g = 0, best = 1e300;
    for (double g = 0.001; g < 10; g += 0.001) {
      double l = LossUncertainty(e, g, 0.0);
      if (l < best) best = l, best_g = g;
      CHECK(l >= 1 + std::log(e * e) - 1e-12);
    }
    CHECK(std::abs(best_g - e * e) <= 0.001);
    CHECK(LossUncertainty(e, e * e, 0.0) == doctest::Approx(1 + std::log(e * e)));
  }

  // Batch averaging is the mean of per-sample losses.
  HeadOutputs out;
  out.means.resize(3, 1);
  out.means << 1, 2, 4;
  out.log_variances = Eigen::MatrixXd::Zero(3, 1);
  out.variances = Eigen::MatrixXd::Ones(3, 1);
  Eigen::MatrixXd t(3, 1);
  t << 0, 0, 0;
  CHECK(ComputeEstimatorLoss(out, t, true).value == doctest::Approx(21.0 / 3));
  CHECK(ComputeEstimatorLoss(out, t, false).value == doctest::Approx(21.0 / 3));
}

TEST_CASE("aggregation worked examples") {
  Eigen::MatrixXd m1(1, 1), v1(1, 1);
  m1 << 4.0;
  v1 << 2.5;
  AggregatedPrediction a = Aggregate(m1, v1);
  CHECK(a.mean[0] == 4.0);
  CHECK(a.variance[0] == doctest::Approx(2.5));
  CHECK(a.calibrated[0] == doctest::Approx(2.5));
  CHECK(a.num_segments == 1);

  Eigen::MatrixXd m(2, 1), v(2, 1);
  m << 1, 3;
  v << 1, 1;
  a = Aggregate(m, v);
  CHECK(a.mean[0] == doctest::Approx(2.0));
  CHECK(a.variance[0] == doctest::Approx(0.5));
  CHECK(a.calibrated[0] == doctest::Approx(1.0));

  v << 1, 3;
  a = Aggregate(m, v);
  CHECK(a.mean[0] == doctest::Approx(1.5));
  CHECK(a.variance[0] == doctest::Approx(0.75));
  CHECK(a.calibrated[0] == doctest::Approx(1.5));
  // Brute-force weighted sum with weights w / G.
  CHECK(0.75 / 1 * 1 + 0.75 / 3 * 3 == doctest::Approx(a.mean[0]));

  CHECK_THROWS(Aggregate(Eigen::MatrixXd(0, 2), Eigen::MatrixXd(0, 2)));
  Eigen::MatrixXd bad(1, 1);
  bad << 0.0;
  CHECK_THROWS(Aggregate(m1, bad));
}

TEST_CASE("aggregation invariants on random inputs") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0, 3);
  std::uniform_real_distribution<double> u(0.05, 5);
  for (int trial = 0; trial < 200; ++trial) {
    const int l = 1 + trial % 7, k = 3;
    Eigen::MatrixXd m(l, k), v(l, k);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = g(rng);
      v.data()[i] = u(rng);
    }
    AggregatedPrediction a = Aggregate(m, v);
    for (int j = 0; j < k; ++j) {
      CHECK(a.mean[j] >= m.col(j).minCoeff() - 1e-12);
      CHECK(a.mean[j] <= m.col(j).maxCoeff() + 1e-12);
      double wsum = (a.variance[j] / v.col(j).array()).sum();
      CHECK(std::abs(wsum - 1.0) < 1e-12);
      CHECK(a.calibrated[j] == doctest::Approx(l * a.variance[j]));
    }
    Eigen::MatrixXd m2(2 * l, k), v2(2 * l, k);
    m2 << m, m;
    v2 << v, v;
    AggregatedPrediction d = Aggregate(m2, v2);
    CHECK((d.mean - a.mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((d.variance - 0.5 * a.variance).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((d.calibrated - a.calibrated).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("training decreases the loss, beats chance on planted AMs and is deterministic") {
  ExperimentData data = testing::SmallExperiment(21);
  TrainingConfig config = DeskScaleTrainingConfig();
  std::vector<size_t> planted;
  SynthResult r = Generate(testing::SmallSynth(21));
  for (const auto& p : r.dataset.planted) {
    for (size_t k = 0; k < data.am_ids.size(); ++k) {
      if (data.am_ids[k] == p.am_id) planted.push_back(k);
    }
  }
  REQUIRE(!planted.empty());

  double early = 0.0, late = 0.0;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    config.seed = seed;
    TrainResult t = Train(data.train, data.select, config);
    REQUIRE(t.loss_trace.size() == static_cast<size_t>(config.iterations));
    for (int i = 0; i < 10; ++i) {
      early += t.loss_trace[i];
      late += t.loss_trace[t.loss_trace.size() - 1 - i];
    }
  }
  CHECK(late < early);

  config.seed = 3;
  TrainResult a = Train(data.train, data.select, config);
  TrainResult b = Train(data.train, data.select, config);
  CHECK(std::vector<double>(a.model.params().begin(), a.model.params().end()) ==
        std::vector<double>(b.model.params().begin(), b.model.params().end()));
  CHECK(a.best_iteration == b.best_iteration);

  // Selection-set error per AM against the training-mean predictor.
  const int k = static_cast<int>(data.am_ids.size());
  Eigen::VectorXd model_se = Eigen::VectorXd::Zero(k), chance_se = model_se;
  Eigen::VectorXd chance = Eigen::VectorXd::Zero(k);
  for (const Example& e : data.train) chance += e.targets;
  chance /= static_cast<double>(data.train.size());
  for (const Example& e : data.select) {
    AggregatedPrediction p = PredictExample(a.model, e, config);
    model_se += (p.mean - e.targets).array().square().matrix();
    chance_se += (chance - e.targets).array().square().matrix();
  }
  for (size_t j : planted) CHECK(model_se[j] < chance_se[j]);
}

TEST_CASE("empty splits are rejected") {
  ExperimentData data = testing::SmallExperiment(22, 40);
  TrainingConfig config = DeskScaleTrainingConfig();
  CHECK_THROWS(Train({}, data.select, config));
  CHECK_THROWS(Train(data.train, {}, config));
}

}  // namespace
}  // namespace voxface
