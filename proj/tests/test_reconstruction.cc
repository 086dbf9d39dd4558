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
#include <fstream>
#include <random>

#include "test_util.h"
#include "voxface/reconstruction.h"
#include "voxface/synthdata.h"

namespace voxface {
namespace {

struct Fixture {
  SynthResult synth;
  ShapeBasis basis;
  std::vector<ResolvedAm> ams;

  Fixture() : synth(Generate(testing::SmallSynth(31, 60))) {
    std::vector<Mesh> train;
    for (int i : synth.dataset.Indices(Split::kTrain)) {
      train.push_back(synth.dataset.meshes[i]);
    }
    testing::WarningCapture quiet;
    basis = BuildBasis(train, static_cast<int>(train.size()) - 1);
    ams = ResolveAll(synth.dataset.landmarks, synth.dataset.am_definitions);
  }

  int K() const { return static_cast<int>(ams.size()); }

  Eigen::VectorXd AmsOf(const Eigen::VectorXd& flat) const {
    Eigen::VectorXd v(K());
    for (int k = 0; k < K(); ++k) {
      v[k] = EvaluateAm(std::span<const double>(flat.data(), flat.size()), ams[k]);
    }
    return v;
  }

  ReconstructionProblem Problem(const Eigen::VectorXd& targets, double lambda) const {
    return {ams, targets, Eigen::VectorXd::Ones(K()), lambda};
  }
};

Eigen::VectorXd RandomAlpha(int d, std::mt19937_64& rng, double sd = 0.5) {
  std::normal_distribution<double> g(0.0, sd);
  Eigen::VectorXd a(d);
  for (int i = 0; i < d; ++i) a[i] = g(rng);
  return a;
}

TEST_CASE("targets from a shape in the span are matched") {
  Fixture f;
  REQUIRE(f.basis.dim() >= 5);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd beta_true =
        ToBeta(f.basis, RandomAlpha(f.basis.dim(), rng));
    Eigen::VectorXd targets = f.AmsOf(f.basis.Reconstruct(beta_true));
    FitResult r = Fit(f.basis, f.Problem(targets, 1e-8));
    Eigen::VectorXd got = f.AmsOf(Flatten(r.mesh));
    CHECK((got - targets).cwiseAbs().maxCoeff() < 1e-4);
    CHECK(r.objective() <= r.objective_trace.front());
    for (size_t i = 1; i < r.objective_trace.size(); ++i) {
      CHECK(r.objective_trace[i] <= r.objective_trace[i - 1]);
    }
  }
}

TEST_CASE("zero weights return the mean face") {
  Fixture f;
  ReconstructionProblem p = f.Problem(f.AmsOf(f.basis.mean_shape).array() + 3.0, 1e-3);
  p.weights.setZero();
  FitResult r = Fit(f.basis, p);
  CHECK(r.beta.cwiseAbs().maxCoeff() == 0.0);
  CHECK(Flatten(r.mesh) == f.basis.mean_shape);
  CHECK(r.converged);
}

TEST_CASE("stronger regularization shrinks the solution") {
  Fixture f;
  std::mt19937_64 rng(2);
  Eigen::VectorXd targets =
      f.AmsOf(f.basis.Reconstruct(ToBeta(f.basis, RandomAlpha(f.basis.dim(), rng, 1.0))));
  for (bool whiten : {true, false}) {
    FitOptions opt;
    opt.whiten = whiten;
    double prev = 1e300;
    for (double lambda : {1e-2, 1.0, 1e2}) {
      FitResult r = Fit(f.basis, f.Problem(targets, lambda), opt);
      double norm = whiten ? (r.beta.array() / f.basis.eigenvalues.array().sqrt())
                                 .matrix()
                                 .norm()
                           : r.beta.norm();
      CHECK(norm < prev);
      prev = norm;
    }
  }
}

TEST_CASE("Jacobian matches finite differences of the residuals") {
  Fixture f;
  std::mt19937_64 rng(3);
  Eigen::VectorXd targets = f.AmsOf(f.basis.mean_shape).array() + 0.5;
  ReconstructionProblem p = f.Problem(targets, 0.01);
  p.weights = Eigen::VectorXd::LinSpaced(f.K(), 0.2, 2.0);
  for (bool whiten : {true, false}) {
    FitOptions opt;
    opt.whiten = whiten;
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::VectorXd x = whiten ? RandomAlpha(f.basis.dim(), rng)
                                 : ToBeta(f.basis, RandomAlpha(f.basis.dim(), rng));
      Eigen::MatrixXd j = ReconstructionJacobian(f.basis, p, x, opt);
      Eigen::MatrixXd num(j.rows(), j.cols());
      const double h = 1e-6 * (whiten ? 1.0 : std::sqrt(f.basis.eigenvalues[0]));
      for (int c = 0; c < x.size(); ++c) {
        Eigen::VectorXd up = x, down = x;
        up[c] += h;
        down[c] -= h;
        num.col(c) = (ReconstructionResiduals(f.basis, p, up, opt) -
                      ReconstructionResiduals(f.basis, p, down, opt)) /
                     (2 * h);
      }
      CHECK((num - j).norm() / j.norm() < 1e-5);
      Eigen::VectorXd res = ReconstructionResiduals(f.basis, p, x, opt);
      CHECK(ReconstructionObjective(f.basis, p, x, opt) ==
            doctest::Approx(res.squaredNorm()));
    }
  }
}

TEST_CASE("one-hot distance target is reached without regularization") {
  Fixture f;
  int k = -1;
  for (int i = 0; i < f.K(); ++i) {
    if (f.ams[i].kind == AmKind::kDistance) {
      k = i;
      break;
    }
  }
  REQUIRE(k >= 0);
  std::mt19937_64 rng(4);
  Eigen::VectorXd reach = f.AmsOf(f.basis.Reconstruct(ToBeta(f.basis, RandomAlpha(f.basis.dim(), rng))));
  ReconstructionProblem p = f.Problem(reach, 0.0);
  p.weights.setZero();
  p.weights[k] = 1.0;
  FitResult r = Fit(f.basis, p);
  CHECK(std::abs(f.AmsOf(Flatten(r.mesh))[k] - reach[k]) < 1e-6);
}

TEST_CASE("fits are deterministic and parallel fits match serial ones") {
  Fixture f;
  std::mt19937_64 rng(5);
  std::vector<ReconstructionProblem> problems;
  for (int i = 0; i < 4; ++i) {
    problems.push_back(f.Problem(
        f.AmsOf(f.basis.Reconstruct(ToBeta(f.basis, RandomAlpha(f.basis.dim(), rng)))), 1e-3));
  }
  auto serial = FitAll(f.basis, problems, {}, 1);
  auto parallel = FitAll(f.basis, problems, {}, 3);
  for (size_t i = 0; i < problems.size(); ++i) {
    CHECK(serial[i].beta == parallel[i].beta);
    CHECK(serial[i].objective_trace == parallel[i].objective_trace);
    CHECK(Fit(f.basis, problems[i]).beta == serial[i].beta);
  }
}

TEST_CASE("invalid problems are rejected") {
  Fixture f;
  Eigen::VectorXd t = f.AmsOf(f.basis.mean_shape);
  ReconstructionProblem p = f.Problem(t, -1.0);
  CHECK_THROWS(Fit(f.basis, p));
  p = f.Problem(t, 1e-3);
  p.weights[0] = -1;
  CHECK_THROWS(Fit(f.basis, p));
  p = f.Problem(t, 1e-3);
  p.targets[0] = NAN;
  CHECK_THROWS(Fit(f.basis, p));
  p = f.Problem(t.head(2), 1e-3);
  CHECK_THROWS(Fit(f.basis, p));
}

TEST_CASE("per-vertex errors") {
  std::mt19937_64 rng(6);
  Mesh a = testing::RandomMesh(30, rng);
  CHECK(PerVertexError(a, a).isZero());
  Mesh b = a;
  b.vertices.col(0).array() += 1.0;
  Eigen::VectorXd e = PerVertexError(b, a);
  CHECK((e.array() - 1.0).abs().maxCoeff() < 1e-12);
  Mesh c = testing::RandomMesh(30, rng);
  e = PerVertexError(c, a);
  double brute = 0;
  for (int i = 0; i < 30; ++i) {
    double s = 0;
    for (int j = 0; j < 3; ++j) s += std::pow(c.vertices(i, j) - a.vertices(i, j), 2);
    brute += std::sqrt(s);
  }
  CHECK(e.mean() == doctest::Approx(brute / 30));
  CHECK_THROWS(PerVertexError(testing::RandomMesh(29, rng), a));
  Mesh d = a, t = a;
  d.topology_id = "other";
  t.topology_id = "face";
  CHECK_THROWS(PerVertexError(d, t));
}

TEST_CASE("filtered error maps") {
  std::vector<Eigen::VectorXd> errors = {Eigen::VectorXd::Constant(3, 1.0),
                                         Eigen::VectorXd::Constant(3, 2.0),
                                         Eigen::VectorXd::Constant(3, 3.0),
                                         Eigen::VectorXd::Constant(3, 4.0)};
  std::vector<std::string> ids = {"d", "c", "b", "a"};
  std::vector<double> u = {0.1, 0.4, 0.2, 0.3};
  std::vector<double> levels = {1.0, 0.75, 0.5};
  auto maps = FilteredErrorMaps(errors, u, ids, levels);
  REQUIRE(maps.size() == 3);
  CHECK(maps[0][0] == doctest::Approx(2.5));
  CHECK(maps[1][0] == doctest::Approx((1 + 3 + 4) / 3.0));
  CHECK(maps[2][0] == doctest::Approx(2.0));

  // Ties are broken by speaker id.
  std::vector<double> same(4, 0.5);
  auto tied = FilteredErrorMaps(errors, same, ids, levels);
  CHECK(tied[2][0] == doctest::Approx(3.5));
  CHECK(tied[0][0] == doctest::Approx(2.5));
  CHECK_THROWS(FilteredErrorMaps({}, {}, {}, levels));
}

TestReport ReportWith(int predictable, int total) {
  std::vector<std::string> ids;
  std::vector<std::vector<Eigen::VectorXd>> ratios(1);
  for (int k = 0; k < total; ++k) ids.push_back("am" + std::to_string(100 + k));
  for (int r = 0; r < 10; ++r) {
    Eigen::VectorXd v(total);
    for (int k = 0; k < total; ++k) {
      double base = k < predictable ? 0.5 + 0.02 * ((k * 7) % predictable) : 1.2;
      v[k] = base + 0.001 * (r % 3);
    }
    ratios[0].push_back(v);
  }
  return BuildReport(ids, {1.0}, ratios, 0.05);
}

TEST_CASE("top AM selection") {
  {
    TestReport rep = ReportWith(10, 14);
    Eigen::VectorXd z = SelectTopAms(rep, rep.am_ids);
    CHECK(z.sum() == 10);
    for (int k = 0; k < 10; ++k) CHECK(z[k] == 1);
  }
  {
    TestReport rep = ReportWith(12, 14);
    Eigen::VectorXd z = SelectTopAms(rep, rep.am_ids);
    CHECK(z.sum() == 10);
    std::vector<std::pair<double, int>> order;
    for (int k = 0; k < 12; ++k) order.push_back({rep.tests[k].ci_upper, k});
    std::sort(order.begin(), order.end());
    for (int i = 0; i < 10; ++i) CHECK(z[order[i].second] == 1);
    for (int i = 10; i < 14; ++i) {
      if (i < 12) CHECK(z[order[i].second] == 0);
    }
    CHECK(z[12] == 0);
    CHECK(z[13] == 0);
  }
  {
    TestReport rep = ReportWith(3, 14);
    testing::WarningCapture w;
    Eigen::VectorXd z = SelectTopAms(rep, rep.am_ids);
    CHECK(z.sum() == 3);
    CHECK(w.messages.size() == 1);
  }
  {
    // Ordered like the requested ids.
    TestReport rep = ReportWith(2, 3);
    std::vector<std::string> rev(rep.am_ids.rbegin(), rep.am_ids.rend());
    testing::WarningCapture w;
    Eigen::VectorXd z = SelectTopAms(rep, rev, 2);
    CHECK(z[0] == 0);
    CHECK(z[1] == 1);
    CHECK(z[2] == 1);
  }
}

TEST_CASE("confidence weights") {
  Eigen::VectorXd mask(4), var(4);
  mask << 1, 0, 1, 1;
  var << 1, 5, 2, 4;
  Eigen::VectorXd w = ConfidenceWeights(mask, var);
  CHECK(w[1] == 0);
  CHECK((w[0] + w[2] + w[3]) / 3 == doctest::Approx(1.0));
  CHECK(w[0] / w[2] == doctest::Approx(2.0));
}

TEST_CASE("error field exports") {
  auto dir = testing::TempDir("recon");
  std::mt19937_64 rng(7);
  Mesh m = testing::RandomMesh(5, rng);
  Eigen::VectorXd e = Eigen::VectorXd::LinSpaced(5, 0, 1);
  WriteErrorCsv(dir / "e.csv", e);
  WriteErrorPly(dir / "e.ply", m, e);
  std::ifstream csv(dir / "e.csv");
  std::string line;
  int rows = 0;
  bool header = false;
  while (std::getline(csv, line)) {
    if (line == "vertex,error_mm") header = true;
    else if (!line.empty() && line[0] != '#') ++rows;
  }
  CHECK(header);
  CHECK(rows == 5);
  std::ifstream ply(dir / "e.ply");
  std::getline(ply, line);
  CHECK(line == "ply");
  CHECK_THROWS(WriteErrorPly(dir / "bad.ply", m, Eigen::VectorXd::Zero(4)));
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace voxface
