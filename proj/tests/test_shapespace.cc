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

#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "test_util.h"
#include "voxface/shapespace.h"

namespace voxface {
namespace {

using testing::RandomMesh;
using testing::TempDir;
using testing::WarningCapture;

std::vector<Mesh> RandomMeshes(int n, int t, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Mesh> out;
  for (int i = 0; i < n; ++i) out.push_back(RandomMesh(t, rng));
  return out;
}

TEST_CASE("flatten is row-major per vertex and round-trips") {
  Mesh m;
  m.vertices.resize(2, 3);
  m.vertices << 1, 2, 3, 4, 5, 6;
  Eigen::VectorXd f = Flatten(m);
  Eigen::VectorXd want(6);
  want << 1, 2, 3, 4, 5, 6;
  CHECK(f == want);
  CHECK(Unflatten(f, 2).vertices == m.vertices);
  CHECK_THROWS(Unflatten(Eigen::VectorXd::Zero(7), 2));
}

TEST_CASE("two meshes give the closed-form direction and eigenvalue") {
  std::vector<Mesh> meshes = RandomMeshes(2, 5, 1);
  ShapeBasis b = BuildBasis(meshes, 1);
  REQUIRE(b.dim() == 1);
  Eigen::VectorXd diff = Flatten(meshes[1]) - Flatten(meshes[0]);
  Eigen::VectorXd u = diff.normalized();
  Eigen::VectorXd col = b.components.col(0);
  CHECK(std::min((col - u).norm(), (col + u).norm()) < 1e-10);
  CHECK(b.eigenvalues[0] == doctest::Approx(diff.squaredNorm() / 4).epsilon(1e-12));
  CHECK((b.mean_shape - 0.5 * (Flatten(meshes[0]) + Flatten(meshes[1]))).norm() <
        1e-12);
}

TEST_CASE("Gram trick matches a dense covariance eigendecomposition") {
  const int n = 5, t = 4;
  std::vector<Mesh> meshes = RandomMeshes(n, t, 2);
  ShapeBasis b = BuildBasis(meshes, n - 1);
  Eigen::MatrixXd x(n, 3 * t);
  for (int i = 0; i < n; ++i) x.row(i) = Flatten(meshes[i]).transpose();
  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd c = x.rowwise() - mean;
  Eigen::MatrixXd cov = c.transpose() * c / n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  for (int j = 0; j < n - 1; ++j) {
    const int k = 3 * t - 1 - j;  // ascending order in the solver
    CHECK(b.eigenvalues[j] == doctest::Approx(es.eigenvalues()[k]).epsilon(1e-8));
    Eigen::VectorXd v = es.eigenvectors().col(k);
    Eigen::VectorXd col = b.components.col(j);
    CHECK(std::min((col - v).norm(), (col + v).norm()) < 1e-8);
  }
}

TEST_CASE("basis invariants on random data") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    std::vector<Mesh> meshes = RandomMeshes(12, 30, 10 + seed);
    ShapeBasis b = BuildBasis(meshes, 11);
    Eigen::MatrixXd gram = b.components.transpose() * b.components;
    CHECK((gram - Eigen::MatrixXd::Identity(11, 11)).cwiseAbs().maxCoeff() < 1e-8);
    for (int j = 1; j < b.dim(); ++j) CHECK(b.eigenvalues[j] <= b.eigenvalues[j - 1]);
    for (int j = 0; j < b.dim(); ++j) {
      Eigen::Index arg;
      b.components.col(j).cwiseAbs().maxCoeff(&arg);
      CHECK(b.components(arg, j) > 0);
    }
    // Full rank reproduces every training shape.
    for (const Mesh& m : meshes) {
      Eigen::VectorXd f = Flatten(m);
      CHECK((b.Reconstruct(b.Project(f)) - f).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("truncation error is monotone in the basis size") {
  std::vector<Mesh> meshes = RandomMeshes(10, 20, 3);
  double prev = 1e300;
  for (int d = 0; d <= 9; ++d) {
    ShapeBasis b = BuildBasis(meshes, d);
    double err = 0.0;
    for (const Mesh& m : meshes) {
      Eigen::VectorXd f = Flatten(m);
      err += (b.Reconstruct(b.Project(f)) - f).squaredNorm();
    }
    CHECK(err <= prev + 1e-9);
    prev = err;
  }
  CHECK(prev < 1e-12);
}

TEST_CASE("project and reconstruct identities") {
  std::vector<Mesh> meshes = RandomMeshes(8, 10, 4);
  ShapeBasis b = BuildBasis(meshes, 5);
  CHECK(b.Project(b.mean_shape).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(b.Reconstruct(Eigen::VectorXd::Zero(5)) == b.mean_shape);
  Eigen::VectorXd beta = Eigen::VectorXd::LinSpaced(5, -2, 3);
  CHECK((b.Project(b.Reconstruct(beta)) - beta).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS(b.Project(Eigen::VectorXd::Zero(7)));
  CHECK_THROWS(b.Reconstruct(Eigen::VectorXd::Zero(4)));
}

TEST_CASE("rank deficiency reduces the dimension with a warning") {
  std::vector<Mesh> same(3, RandomMeshes(1, 6, 5)[0]);
  WarningCapture w;
  ShapeBasis b = BuildBasis(same, 2);
  CHECK(b.dim() == 0);
  CHECK(w.messages.size() == 1);

  std::vector<Mesh> meshes = RandomMeshes(2, 6, 6);
  meshes.push_back(meshes[0]);
  meshes.push_back(meshes[1]);
  ShapeBasis b2 = BuildBasis(meshes, 3);
  CHECK(b2.dim() == 1);
}

TEST_CASE("argument validation") {
  std::vector<Mesh> meshes = RandomMeshes(3, 6, 7);
  CHECK_THROWS(BuildBasis(meshes, 3));
  CHECK_THROWS(BuildBasis(std::span<const Mesh>(meshes.data(), 1), 0));
  meshes.push_back(RandomMeshes(1, 5, 8)[0]);
  CHECK_THROWS(BuildBasis(meshes, 1));
  CHECK(DefaultBasisDim(10) == 9);
  CHECK(DefaultBasisDim(1000) == 199);
}

TEST_CASE("basis file round trip") {
  std::vector<Mesh> meshes = RandomMeshes(6, 7, 9);
  ShapeBasis b = BuildBasis(meshes, 4);
  auto dir = TempDir("basis");
  WriteBasis(dir / "b.bin", b);
  ShapeBasis r = ReadBasis(dir / "b.bin");
  CHECK(r.mean_shape == b.mean_shape);
  CHECK(r.components == b.components);
  CHECK(r.eigenvalues == b.eigenvalues);
  {
    std::ofstream bad(dir / "bad.bin", std::ios::binary);
    bad << "NOTABASIS";
  }
  CHECK_THROWS_AS(ReadBasis(dir / "bad.bin"), FormatError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace voxface
