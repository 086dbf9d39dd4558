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

// Eigenface shape space: a mean shape plus an orthonormal basis of principal
// deformation directions, built from pre-aligned training meshes.

#ifndef VOXFACE_SHAPESPACE_H_
#define VOXFACE_SHAPESPACE_H_

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "voxface/geometry.h"

namespace voxface {

// Row-major per vertex: (x0, y0, z0, x1, ...).
Eigen::VectorXd Flatten(const Mesh& mesh);
Mesh Unflatten(const Eigen::VectorXd& flat, int num_vertices,
               std::string topology_id = {});

struct ShapeBasis {
  Eigen::VectorXd mean_shape;  // 3T
  Eigen::MatrixXd components;  // 3T x d, orthonormal columns
  Eigen::VectorXd eigenvalues;  // d, non-increasing, population covariance

  int dim() const { return static_cast<int>(components.cols()); }
  int num_vertices() const { return static_cast<int>(mean_shape.size() / 3); }

  // P^T (b - mean)
  Eigen::VectorXd Project(const Eigen::VectorXd& flat) const;
  // mean + P beta
  Eigen::VectorXd Reconstruct(const Eigen::VectorXd& beta) const;
};

// Default basis size: min(n - 1, 199).
int DefaultBasisDim(int num_meshes);

// PCA via the n x n Gram matrix of centered samples; the 3T x 3T covariance
// is never formed. Requires n >= 2 and 0 <= d <= n - 1. If the data has
// numerical rank below d, d is reduced to the rank and a warning is issued.
// Each column is signed so its largest-magnitude entry is positive.
ShapeBasis BuildBasis(std::span<const Mesh> meshes, int d);

// "VFBASIS1", u32 T, u32 d, mean (3T f64), eigenvalues (d f64),
// P column-major (3T*d f64).
void WriteBasis(const std::filesystem::path& path, const ShapeBasis& basis);
ShapeBasis ReadBasis(const std::filesystem::path& path);

}  // namespace voxface

#endif  // VOXFACE_SHAPESPACE_H_
