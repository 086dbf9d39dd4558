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

// Landmarked facial meshes and anthropometric measurements (AMs).
//
// Three AM families are supported: the Euclidean distance between two
// landmarks, the ratio of two such distances, and the angle (in degrees) at a
// middle landmark. Every AM comes with an analytic gradient with respect to
// the vertex coordinates of the landmarks it touches.
//
// Coordinates are millimeters. Angles are degrees at this API boundary and
// radians internally.

#ifndef VOXFACE_GEOMETRY_H_
#define VOXFACE_GEOMETRY_H_

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace voxface {

// T x 3, one row per vertex. Row-major so that the flattened layout is
// (x0, y0, z0, x1, y1, z1, ...).
using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

struct Mesh {
  Vertices vertices;
  // Meshes sharing a topology id share vertex ordering.
  std::string topology_id;

  int num_vertices() const { return static_cast<int>(vertices.rows()); }
};

// Throws Error if any coordinate is non-finite.
void ValidateMesh(const Mesh& mesh);

class LandmarkMap {
 public:
  LandmarkMap() = default;

  // Throws on duplicate names or negative indices.
  void Add(const std::string& name, int vertex);
  bool Contains(const std::string& name) const;
  int Index(const std::string& name) const;
  // Throws if any index is >= num_vertices.
  void Validate(int num_vertices) const;

  const std::map<std::string, int>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, int> entries_;
};

enum class AmKind { kDistance, kProportion, kAngle };

std::string_view AmKindName(AmKind kind);
AmKind ParseAmKind(std::string_view name);

// Landmark arity: distance (a, b); proportion dist(a, b) / dist(c, d);
// angle (a, b, c) measured at b.
struct AmDefinition {
  std::string id;
  AmKind kind = AmKind::kDistance;
  std::vector<std::string> landmarks;
};

// An AmDefinition bound to vertex indices.
struct ResolvedAm {
  AmKind kind = AmKind::kDistance;
  std::array<int, 4> vertex{-1, -1, -1, -1};
};

// Validates the definition (arity, distinctness, landmark existence) and
// binds it to vertex indices.
ResolvedAm Resolve(const LandmarkMap& landmarks, const AmDefinition& def);
std::vector<ResolvedAm> ResolveAll(const LandmarkMap& landmarks,
                                   std::span<const AmDefinition> defs);

// Edge length below this is degenerate (mm).
inline constexpr double kMinEdgeLength = 1e-9;
// |cos| at or above 1 - kCosineMargin is a degenerate angle.
inline constexpr double kCosineMargin = 1e-12;

// Value of an AM on a flattened 3T coordinate vector.
double EvaluateAm(std::span<const double> coords, const ResolvedAm& am);

struct VertexGradient {
  int vertex = 0;
  Eigen::Vector3d d = Eigen::Vector3d::Zero();
};
// Nonzero only at the 2-4 involved vertices; a vertex used twice appears
// once with its contributions summed.
using SparseGradient = std::vector<VertexGradient>;

SparseGradient EvaluateAmGradient(std::span<const double> coords,
                                  const ResolvedAm& am);

double ComputeAm(const Mesh& mesh, const LandmarkMap& landmarks,
                 const AmDefinition& def);
SparseGradient ComputeAmGradient(const Mesh& mesh,
                                 const LandmarkMap& landmarks,
                                 const AmDefinition& def);

// K values ordered like the definition list.
struct AmVector {
  Eigen::VectorXd values;
};

// Throws DegenerateMeasurementError naming every failing AM id.
AmVector ComputeAllAms(const Mesh& mesh, const LandmarkMap& landmarks,
                       std::span<const AmDefinition> defs);

// Per-AM affine standardization with the population convention (divide by
// n). Fit on the training split only.
class AmNormalization {
 public:
  AmNormalization() = default;
  AmNormalization(std::vector<std::string> ids, Eigen::VectorXd mean,
                  Eigen::VectorXd stddev);

  // Rows are samples, columns AMs. Needs >= 2 rows and nonzero spread in
  // every column; throws naming the offending AM otherwise.
  static AmNormalization Fit(const Eigen::MatrixXd& train,
                             std::vector<std::string> ids);

  Eigen::VectorXd Apply(const Eigen::VectorXd& v) const;
  Eigen::VectorXd Invert(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd ApplyRows(const Eigen::MatrixXd& m) const;
  Eigen::MatrixXd InvertRows(const Eigen::MatrixXd& m) const;

  const std::vector<std::string>& ids() const { return ids_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& stddev() const { return stddev_; }
  int size() const { return static_cast<int>(mean_.size()); }

 private:
  std::vector<std::string> ids_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd stddev_;
};

}  // namespace voxface

#endif  // VOXFACE_GEOMETRY_H_
