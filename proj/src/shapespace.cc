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

#include "voxface/shapespace.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "voxface/common.h"

namespace voxface {

namespace {

constexpr std::string_view kBasisMagic = "VFBASIS1";
// Gram eigenvalues below this fraction of the largest are treated as zero.
constexpr double kRankTolerance = 1e-10;

}  // namespace

Eigen::VectorXd Flatten(const Mesh& mesh) {
  return Eigen::Map<const Eigen::VectorXd>(mesh.vertices.data(),
                                           mesh.vertices.size());
}

Mesh Unflatten(const Eigen::VectorXd& flat, int num_vertices,
               std::string topology_id) {
  if (flat.size() != 3 * static_cast<Eigen::Index>(num_vertices)) {
    throw Error("flattened shape has length " + std::to_string(flat.size()) +
                ", expected " + std::to_string(3 * num_vertices));
  }
  Mesh mesh;
  mesh.vertices = Eigen::Map<const Vertices>(flat.data(), num_vertices, 3);
  mesh.topology_id = std::move(topology_id);
  return mesh;
}

Eigen::VectorXd ShapeBasis::Project(const Eigen::VectorXd& flat) const {
  if (flat.size() != mean_shape.size()) {
    throw Error("project: shape length " + std::to_string(flat.size()) +
                " does not match basis length " +
                std::to_string(mean_shape.size()));
  }
  return components.transpose() * (flat - mean_shape);
}

Eigen::VectorXd ShapeBasis::Reconstruct(const Eigen::VectorXd& beta) const {
  if (beta.size() != components.cols()) {
    throw Error("reconstruct: coefficient length " +
                std::to_string(beta.size()) + " does not match basis dim " +
                std::to_string(components.cols()));
  }
  return mean_shape + components * beta;
}

int DefaultBasisDim(int num_meshes) {
  return std::max(0, std::min(num_meshes - 1, 199));
}

ShapeBasis BuildBasis(std::span<const Mesh> meshes, int d) {
  const int n = static_cast<int>(meshes.size());
  if (n < 2) throw Error("build_basis needs at least 2 meshes");
  if (d < 0 || d > n - 1) {
    throw Error("basis dimension " + std::to_string(d) +
                " must lie in [0, n-1] = [0, " + std::to_string(n - 1) + "]");
  }
  const int t = meshes[0].num_vertices();
  const std::string& topo = meshes[0].topology_id;
  for (const auto& m : meshes) {
    if (m.num_vertices() != t) throw Error("meshes differ in vertex count");
    if (m.topology_id != topo) throw Error("meshes differ in topology id");
    ValidateMesh(m);
  }

  // Samples as rows.
  Eigen::MatrixXd centered(n, 3 * t);
  for (int i = 0; i < n; ++i) centered.row(i) = Flatten(meshes[i]).transpose();
  ShapeBasis basis;
  basis.mean_shape = centered.colwise().mean().transpose();
  // Rank is judged against the raw data scale so centering round-off on
  // identical shapes does not count as variation.
  const double scale = centered.squaredNorm();
  centered.rowwise() -= basis.mean_shape.transpose();

  const Eigen::MatrixXd gram = centered * centered.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success) {
    throw Error("Gram eigendecomposition failed");
  }
  // Ascending from Eigen; walk from the top.
  const Eigen::VectorXd& evals = solver.eigenvalues();
  const double top = std::max(evals[n - 1], 0.0);
  const double cutoff = kRankTolerance * std::max(top, kRankTolerance * scale);
  int rank = 0;
  for (int i = n - 1; i >= 0 && evals[i] > cutoff; --i) ++rank;
  if (rank < d) {
    Warn("shape data has numerical rank " + std::to_string(rank) +
         "; reducing basis dimension from " + std::to_string(d));
    d = rank;
  }

  basis.components.resize(3 * t, d);
  basis.eigenvalues.resize(d);
  for (int j = 0; j < d; ++j) {
    const int src = n - 1 - j;
    const double g = evals[src];
    Eigen::VectorXd col = centered.transpose() * solver.eigenvectors().col(src);
    col /= col.norm();
    Eigen::Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    if (col[arg] < 0) col = -col;
    basis.components.col(j) = col;
    basis.eigenvalues[j] = g / n;
  }
  return basis;
}

void WriteBasis(const std::filesystem::path& path, const ShapeBasis& basis) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  binio::WriteBytes(out, kBasisMagic);
  binio::WriteU32(out, static_cast<uint32_t>(basis.num_vertices()));
  binio::WriteU32(out, static_cast<uint32_t>(basis.dim()));
  for (Eigen::Index i = 0; i < basis.mean_shape.size(); ++i) {
    binio::WriteF64(out, basis.mean_shape[i]);
  }
  for (Eigen::Index j = 0; j < basis.eigenvalues.size(); ++j) {
    binio::WriteF64(out, basis.eigenvalues[j]);
  }
  for (Eigen::Index j = 0; j < basis.components.cols(); ++j) {
    for (Eigen::Index i = 0; i < basis.components.rows(); ++i) {
      binio::WriteF64(out, basis.components(i, j));
    }
  }
}

ShapeBasis ReadBasis(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  binio::ExpectMagic(in, kBasisMagic, "shape basis");
  const uint32_t t = binio::ReadU32(in);
  const uint32_t d = binio::ReadU32(in);
  ShapeBasis basis;
  basis.mean_shape.resize(3 * t);
  for (uint32_t i = 0; i < 3 * t; ++i) basis.mean_shape[i] = binio::ReadF64(in);
  basis.eigenvalues.resize(d);
  for (uint32_t j = 0; j < d; ++j) basis.eigenvalues[j] = binio::ReadF64(in);
  basis.components.resize(3 * t, d);
  for (uint32_t j = 0; j < d; ++j) {
    for (uint32_t i = 0; i < 3 * t; ++i) {
      basis.components(i, j) = binio::ReadF64(in);
    }
  }
  return basis;
}

}  // namespace voxface
