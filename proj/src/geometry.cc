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

#include "voxface/geometry.h"

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include <Eigen/Geometry>

#include "voxface/common.h"

namespace voxface {

namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

Eigen::Vector3d Point(std::span<const double> coords, int v) {
  return {coords[3 * v], coords[3 * v + 1], coords[3 * v + 2]};
}

size_t Arity(AmKind kind) {
  switch (kind) {
    case AmKind::kDistance:
      return 2;
    case AmKind::kProportion:
      return 4;
    case AmKind::kAngle:
      return 3;
  }
  return 0;
}

struct Edge {
  Eigen::Vector3d diff;  // a - b
  double length;
};

Edge MakeEdge(std::span<const double> coords, int a, int b) {
  Edge e;
  e.diff = Point(coords, a) - Point(coords, b);
  e.length = e.diff.norm();
  if (!(e.length >= kMinEdgeLength)) {
    throw DegenerateMeasurementError("coincident landmarks (vertices " +
                                     std::to_string(a) + ", " +
                                     std::to_string(b) + ")");
  }
  return e;
}

struct AngleParts {
  Eigen::Vector3d u_hat, v_hat;
  double u_len, v_len, cos_t, sin_t;
};

AngleParts MakeAngle(std::span<const double> coords, const ResolvedAm& am) {
  Edge u = MakeEdge(coords, am.vertex[0], am.vertex[1]);
  Edge v = MakeEdge(coords, am.vertex[2], am.vertex[1]);
  AngleParts p;
  p.u_len = u.length;
  p.v_len = v.length;
  p.u_hat = u.diff / u.length;
  p.v_hat = v.diff / v.length;
  p.cos_t = p.u_hat.dot(p.v_hat);
  p.sin_t = p.u_hat.cross(p.v_hat).norm();
  if (std::abs(p.cos_t) >= 1.0 - kCosineMargin) {
    throw DegenerateMeasurementError("collinear angle arms at vertex " +
                                     std::to_string(am.vertex[1]));
  }
  return p;
}

void Accumulate(SparseGradient& g, int vertex, const Eigen::Vector3d& d) {
  for (auto& e : g) {
    if (e.vertex == vertex) {
      e.d += d;
      return;
    }
  }
  g.push_back({vertex, d});
}

std::span<const double> Flat(const Mesh& mesh) {
  return {mesh.vertices.data(), static_cast<size_t>(mesh.vertices.size())};
}

}  // namespace

void ValidateMesh(const Mesh& mesh) {
  if (!mesh.vertices.allFinite()) {
    throw Error("mesh has non-finite vertex coordinates");
  }
}

void LandmarkMap::Add(const std::string& name, int vertex) {
  if (vertex < 0) throw Error("landmark '" + name + "' has negative index");
  if (!entries_.emplace(name, vertex).second) {
    throw Error("duplicate landmark name '" + name + "'");
  }
}

bool LandmarkMap::Contains(const std::string& name) const {
  return entries_.count(name) > 0;
}

int LandmarkMap::Index(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown landmark '" + name + "'");
  return it->second;
}

void LandmarkMap::Validate(int num_vertices) const {
  for (const auto& [name, index] : entries_) {
    if (index >= num_vertices) {
      throw Error("landmark '" + name + "' index " + std::to_string(index) +
                  " out of range for " + std::to_string(num_vertices) +
                  " vertices");
    }
  }
}

std::string_view AmKindName(AmKind kind) {
  switch (kind) {
    case AmKind::kDistance:
      return "distance";
    case AmKind::kProportion:
      return "proportion";
    case AmKind::kAngle:
      return "angle";
  }
  return "?";
}

AmKind ParseAmKind(std::string_view name) {
  if (name == "distance") return AmKind::kDistance;
  if (name == "proportion") return AmKind::kProportion;
  if (name == "angle") return AmKind::kAngle;
  throw FormatError("unknown AM kind '" + std::string(name) + "'");
}

ResolvedAm Resolve(const LandmarkMap& landmarks, const AmDefinition& def) {
  const size_t n = Arity(def.kind);
  if (def.landmarks.size() != n) {
    throw Error("AM '" + def.id + "': " + std::string(AmKindName(def.kind)) +
                " needs " + std::to_string(n) + " landmarks");
  }
  ResolvedAm r;
  r.kind = def.kind;
  for (size_t i = 0; i < n; ++i) {
    if (!landmarks.Contains(def.landmarks[i])) {
      throw Error("AM '" + def.id + "' references unknown landmark '" +
                  def.landmarks[i] + "'");
    }
    r.vertex[i] = landmarks.Index(def.landmarks[i]);
  }
  auto distinct = [&](size_t i, size_t j) {
    if (def.landmarks[i] == def.landmarks[j]) {
      throw Error("AM '" + def.id + "' repeats landmark '" + def.landmarks[i] +
                  "'");
    }
  };
  switch (def.kind) {
    case AmKind::kDistance:
      distinct(0, 1);
      break;
    case AmKind::kProportion:
      distinct(0, 1);
      distinct(2, 3);
      break;
    case AmKind::kAngle:
      distinct(0, 1);
      distinct(0, 2);
      distinct(1, 2);
      break;
  }
  return r;
}

std::vector<ResolvedAm> ResolveAll(const LandmarkMap& landmarks,
                                   std::span<const AmDefinition> defs) {
  std::vector<ResolvedAm> out;
  out.reserve(defs.size());
  for (const auto& d : defs) out.push_back(Resolve(landmarks, d));
  return out;
}

double EvaluateAm(std::span<const double> coords, const ResolvedAm& am) {
  switch (am.kind) {
    case AmKind::kDistance:
      return MakeEdge(coords, am.vertex[0], am.vertex[1]).length;
    case AmKind::kProportion: {
      const double num = MakeEdge(coords, am.vertex[0], am.vertex[1]).length;
      const double den = MakeEdge(coords, am.vertex[2], am.vertex[3]).length;
      return num / den;
    }
    case AmKind::kAngle: {
      AngleParts p = MakeAngle(coords, am);
      return std::atan2(p.sin_t, p.cos_t) * kDegPerRad;
    }
  }
  return 0.0;
}

SparseGradient EvaluateAmGradient(std::span<const double> coords,
                                  const ResolvedAm& am) {
  SparseGradient g;
  switch (am.kind) {
    case AmKind::kDistance: {
      Edge e = MakeEdge(coords, am.vertex[0], am.vertex[1]);
      const Eigen::Vector3d unit = e.diff / e.length;
      Accumulate(g, am.vertex[0], unit);
      Accumulate(g, am.vertex[1], -unit);
      break;
    }
    case AmKind::kProportion: {
      Edge num = MakeEdge(coords, am.vertex[0], am.vertex[1]);
      Edge den = MakeEdge(coords, am.vertex[2], am.vertex[3]);
      const Eigen::Vector3d dnum = num.diff / (num.length * den.length);
      const Eigen::Vector3d dden =
          -num.length * den.diff / (den.length * den.length * den.length);
      Accumulate(g, am.vertex[0], dnum);
      Accumulate(g, am.vertex[1], -dnum);
      Accumulate(g, am.vertex[2], dden);
      Accumulate(g, am.vertex[3], -dden);
      break;
    }
    case AmKind::kAngle: {
      AngleParts p = MakeAngle(coords, am);
      // d(theta)/du = -(v_hat - cos u_hat) / (|u| sin), likewise for v.
      const Eigen::Vector3d da =
          -(p.v_hat - p.cos_t * p.u_hat) / (p.u_len * p.sin_t) * kDegPerRad;
      const Eigen::Vector3d dc =
          -(p.u_hat - p.cos_t * p.v_hat) / (p.v_len * p.sin_t) * kDegPerRad;
      Accumulate(g, am.vertex[0], da);
      Accumulate(g, am.vertex[2], dc);
      Accumulate(g, am.vertex[1], -(da + dc));
      break;
    }
  }
  return g;
}

double ComputeAm(const Mesh& mesh, const LandmarkMap& landmarks,
                 const AmDefinition& def) {
  ResolvedAm r = Resolve(landmarks, def);
  landmarks.Validate(mesh.num_vertices());
  return EvaluateAm(Flat(mesh), r);
}

SparseGradient ComputeAmGradient(const Mesh& mesh,
                                 const LandmarkMap& landmarks,
                                 const AmDefinition& def) {
  ResolvedAm r = Resolve(landmarks, def);
  landmarks.Validate(mesh.num_vertices());
  return EvaluateAmGradient(Flat(mesh), r);
}

AmVector ComputeAllAms(const Mesh& mesh, const LandmarkMap& landmarks,
                       std::span<const AmDefinition> defs) {
  landmarks.Validate(mesh.num_vertices());
  std::vector<ResolvedAm> resolved = ResolveAll(landmarks, defs);
  AmVector out;
  out.values.resize(static_cast<Eigen::Index>(defs.size()));
  std::ostringstream failures;
  bool failed = false;
  for (size_t k = 0; k < defs.size(); ++k) {
    try {
      out.values[static_cast<Eigen::Index>(k)] =
          EvaluateAm(Flat(mesh), resolved[k]);
    } catch (const DegenerateMeasurementError& e) {
      failures << (failed ? "; " : "") << defs[k].id << ": " << e.what();
      failed = true;
    }
  }
  if (failed) throw DegenerateMeasurementError(failures.str());
  return out;
}

AmNormalization::AmNormalization(std::vector<std::string> ids,
                                 Eigen::VectorXd mean, Eigen::VectorXd stddev)
    : ids_(std::move(ids)), mean_(std::move(mean)), stddev_(std::move(stddev)) {
  if (mean_.size() != stddev_.size() ||
      static_cast<size_t>(mean_.size()) != ids_.size()) {
    throw Error("AM normalization size mismatch");
  }
}

AmNormalization AmNormalization::Fit(const Eigen::MatrixXd& train,
                                     std::vector<std::string> ids) {
  if (train.rows() < 2) {
    throw Error("AM normalization needs at least 2 samples");
  }
  if (static_cast<size_t>(train.cols()) != ids.size()) {
    throw Error("AM normalization: column count does not match AM ids");
  }
  const double n = static_cast<double>(train.rows());
  Eigen::VectorXd mean = train.colwise().sum().transpose() / n;
  Eigen::VectorXd stddev(train.cols());
  for (Eigen::Index k = 0; k < train.cols(); ++k) {
    const double var = (train.col(k).array() - mean[k]).square().sum() / n;
    if (!(var > 0.0)) {
      throw Error("AM '" + ids[static_cast<size_t>(k)] +
                  "' has zero variance on the training split");
    }
    stddev[k] = std::sqrt(var);
  }
  return AmNormalization(std::move(ids), std::move(mean), std::move(stddev));
}

Eigen::VectorXd AmNormalization::Apply(const Eigen::VectorXd& v) const {
  if (v.size() != mean_.size()) throw Error("AM vector length mismatch");
  return ((v - mean_).array() / stddev_.array()).matrix();
}

Eigen::VectorXd AmNormalization::Invert(const Eigen::VectorXd& v) const {
  if (v.size() != mean_.size()) throw Error("AM vector length mismatch");
  return (v.array() * stddev_.array()).matrix() + mean_;
}

Eigen::MatrixXd AmNormalization::ApplyRows(const Eigen::MatrixXd& m) const {
  if (m.cols() != mean_.size()) throw Error("AM table width mismatch");
  return ((m.rowwise() - mean_.transpose()).array().rowwise() /
          stddev_.transpose().array())
      .matrix();
}

Eigen::MatrixXd AmNormalization::InvertRows(const Eigen::MatrixXd& m) const {
  if (m.cols() != mean_.size()) throw Error("AM table width mismatch");
  return (m.array().rowwise() * stddev_.transpose().array()).matrix().rowwise() +
         mean_.transpose();
}

}  // namespace voxface
