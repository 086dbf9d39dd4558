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

#include "voxface/reconstruction.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Cholesky>

#include "voxface/common.h"
#include "voxface/io.h"

namespace voxface {

namespace {

void CheckProblem(const ShapeBasis& basis, const ReconstructionProblem& p) {
  const auto k = static_cast<Eigen::Index>(p.ams.size());
  if (p.targets.size() != k || p.weights.size() != k) {
    throw Error("reconstruction: " + std::to_string(k) + " AMs but " +
                std::to_string(p.targets.size()) + " targets and " +
                std::to_string(p.weights.size()) + " weights");
  }
  if (!(p.lambda >= 0.0) || !std::isfinite(p.lambda)) {
    throw Error("reconstruction: lambda must be finite and >= 0");
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    if (!(p.weights[i] >= 0.0) || !std::isfinite(p.weights[i])) {
      throw Error("reconstruction: weights must be finite and >= 0");
    }
    if (!std::isfinite(p.targets[i])) {
      throw Error("reconstruction: non-finite target");
    }
  }
  for (const ResolvedAm& am : p.ams) {
    for (int v : am.vertex) {
      if (v >= basis.num_vertices()) {
        throw Error("reconstruction: AM vertex outside the basis mesh");
      }
    }
  }
}

std::span<const double> AsSpan(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<size_t>(v.size())};
}

Eigen::VectorXd Scales(const ShapeBasis& basis, const FitOptions& options) {
  if (!options.whiten) return Eigen::VectorXd::Ones(basis.dim());
  return basis.eigenvalues.cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

Eigen::VectorXd ToBeta(const ShapeBasis& basis, const Eigen::VectorXd& params,
                       const FitOptions& options) {
  return Scales(basis, options).cwiseProduct(params);
}

Eigen::VectorXd ReconstructionResiduals(const ShapeBasis& basis,
                                        const ReconstructionProblem& problem,
                                        const Eigen::VectorXd& params,
                                        const FitOptions& options) {
  const int k = static_cast<int>(problem.ams.size());
  const Eigen::VectorXd shape = basis.Reconstruct(ToBeta(basis, params, options));
  Eigen::VectorXd r(k + params.size());
  for (int i = 0; i < k; ++i) {
    double w = problem.weights[i];
    r[i] = w > 0.0 ? std::sqrt(w) * (EvaluateAm(AsSpan(shape), problem.ams[i]) -
                                     problem.targets[i])
                   : 0.0;
  }
  r.tail(params.size()) = std::sqrt(problem.lambda) * params;
  return r;
}

double ReconstructionObjective(const ShapeBasis& basis,
                               const ReconstructionProblem& problem,
                               const Eigen::VectorXd& params,
                               const FitOptions& options) {
  return ReconstructionResiduals(basis, problem, params, options).squaredNorm();
}

Eigen::MatrixXd ReconstructionJacobian(const ShapeBasis& basis,
                                       const ReconstructionProblem& problem,
                                       const Eigen::VectorXd& params,
                                       const FitOptions& options) {
  const int k = static_cast<int>(problem.ams.size());
  const Eigen::Index d = params.size();
  const Eigen::VectorXd scales = Scales(basis, options);
  const Eigen::VectorXd shape = basis.Reconstruct(scales.cwiseProduct(params));
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(k + d, d);
  for (int i = 0; i < k; ++i) {
    double w = problem.weights[i];
    if (w <= 0.0) continue;
    for (const VertexGradient& g : EvaluateAmGradient(AsSpan(shape), problem.ams[i])) {
      for (int c = 0; c < 3; ++c) {
        jac.row(i) += g.d[c] * basis.components.row(3 * g.vertex + c);
      }
    }
    jac.row(i) = std::sqrt(w) * jac.row(i).cwiseProduct(scales.transpose());
  }
  jac.bottomRows(d).diagonal().setConstant(std::sqrt(problem.lambda));
  return jac;
}

FitResult Fit(const ShapeBasis& basis, const ReconstructionProblem& problem,
              const FitOptions& options) {
  CheckProblem(basis, problem);
  const int d = basis.dim();
  Eigen::VectorXd params = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd r = ReconstructionResiduals(basis, problem, params, options);
  double obj = r.squaredNorm();
  if (!std::isfinite(obj)) throw Error("reconstruction: non-finite objective");

  FitResult result;
  result.objective_trace.push_back(obj);
  double damping = options.initial_damping;
  int stall = 0;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    Eigen::MatrixXd jac = ReconstructionJacobian(basis, problem, params, options);
    Eigen::MatrixXd normal = jac.transpose() * jac;
    Eigen::VectorXd grad = jac.transpose() * r;
    if (grad.norm() == 0.0) {
      result.converged = true;
      break;
    }
    bool accepted = false;
    Eigen::VectorXd step;
    while (damping < 1e20) {
      Eigen::MatrixXd a = normal;
      a.diagonal().array() += damping;
      step = -a.ldlt().solve(grad);
      Eigen::VectorXd trial = params + step;
      Eigen::VectorXd trial_r;
      double trial_obj;
      try {
        trial_r = ReconstructionResiduals(basis, problem, trial, options);
        trial_obj = trial_r.squaredNorm();
      } catch (const DegenerateMeasurementError&) {
        trial_obj = std::numeric_limits<double>::infinity();
      }
      if (std::isfinite(trial_obj) && trial_obj < obj) {
        double decrease = (obj - trial_obj) / std::max(obj, 1e-300);
        params = trial;
        r = std::move(trial_r);
        obj = trial_obj;
        result.objective_trace.push_back(obj);
        damping = std::max(damping / 10.0, 1e-15);
        stall = decrease < options.relative_decrease ? stall + 1 : 0;
        accepted = true;
        break;
      }
      damping *= 10.0;
    }
    if (!accepted) {
      // No descent direction left at machine precision.
      result.converged = true;
      break;
    }
    if (step.norm() < options.step_tolerance ||
        stall >= options.stall_iterations) {
      result.converged = true;
      ++it;
      break;
    }
  }
  result.iterations = it;
  result.beta = ToBeta(basis, params, options);
  result.mesh = Unflatten(basis.Reconstruct(result.beta), basis.num_vertices());
  return result;
}

std::vector<FitResult> FitAll(const ShapeBasis& basis,
                              std::span<const ReconstructionProblem> problems,
                              const FitOptions& options, int jobs) {
  std::vector<FitResult> out(problems.size());
  ParallelFor(static_cast<int>(problems.size()), jobs, [&](int i) {
    out[static_cast<size_t>(i)] =
        Fit(basis, problems[static_cast<size_t>(i)], options);
  });
  return out;
}

Eigen::VectorXd PerVertexError(const Mesh& mesh_hat, const Mesh& truth) {
  if (mesh_hat.num_vertices() != truth.num_vertices()) {
    throw Error("per-vertex error: meshes have " +
                std::to_string(mesh_hat.num_vertices()) + " and " +
                std::to_string(truth.num_vertices()) + " vertices");
  }
  if (!mesh_hat.topology_id.empty() && !truth.topology_id.empty() &&
      mesh_hat.topology_id != truth.topology_id) {
    throw Error("per-vertex error: topology " + mesh_hat.topology_id +
                " differs from " + truth.topology_id);
  }
  return (mesh_hat.vertices - truth.vertices).rowwise().norm();
}

std::vector<Eigen::VectorXd> FilteredErrorMaps(
    std::span<const Eigen::VectorXd> errors,
    std::span<const double> uncertainty,
    std::span<const std::string> speakers, std::span<const double> levels) {
  if (errors.size() != uncertainty.size() || errors.size() != speakers.size()) {
    throw Error("filtered error maps: mismatched input lengths");
  }
  if (errors.empty()) throw Error("filtered error maps: no fits");
  std::vector<Eigen::VectorXd> maps;
  for (double level : levels) {
    std::vector<int> keep = RetainLowestUncertainty(uncertainty, speakers, level);
    if (keep.empty()) throw Error("filtered error maps: empty retained set");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(errors[0].size());
    for (int i : keep) {
      const Eigen::VectorXd& e = errors[static_cast<size_t>(i)];
      if (e.size() != sum.size()) {
        throw Error("filtered error maps: error fields differ in length");
      }
      sum += e;
    }
    maps.push_back(sum / static_cast<double>(keep.size()));
  }
  return maps;
}

Eigen::VectorXd SelectTopAms(const TestReport& report,
                             const std::vector<std::string>& am_ids, int count,
                             double level) {
  if (count < 1) throw Error("select: count must be >= 1");
  std::vector<AmTest> candidates;
  for (const AmTest& t : report.AtLevel(level)) {
    if (t.predictable) candidates.push_back(t);
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const AmTest& a, const AmTest& b) {
              if (a.ci_upper != b.ci_upper) return a.ci_upper < b.ci_upper;
              return a.am_id < b.am_id;
            });
  if (static_cast<int>(candidates.size()) < count) {
    Warn("select: only " + std::to_string(candidates.size()) +
         " predictable AMs, fewer than the requested " + std::to_string(count));
  } else {
    candidates.resize(static_cast<size_t>(count));
  }
  Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(am_ids.size()));
  for (const AmTest& t : candidates) {
    auto pos = std::find(am_ids.begin(), am_ids.end(), t.am_id);
    if (pos == am_ids.end()) {
      throw Error("select: report AM " + t.am_id + " is not in the AM list");
    }
    z[pos - am_ids.begin()] = 1.0;
  }
  return z;
}

Eigen::VectorXd ConfidenceWeights(const Eigen::VectorXd& mask,
                                  const Eigen::VectorXd& variances) {
  if (mask.size() != variances.size()) {
    throw Error("confidence weights: length mismatch");
  }
  Eigen::VectorXd z = Eigen::VectorXd::Zero(mask.size());
  double sum = 0.0;
  int n = 0;
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    if (mask[i] <= 0.0) continue;
    if (!(variances[i] > 0.0)) {
      throw Error("confidence weights: variances must be positive");
    }
    z[i] = mask[i] / variances[i];
    sum += z[i];
    ++n;
  }
  if (n > 0) z *= n / sum;
  return z;
}

void WriteErrorCsv(const std::filesystem::path& path,
                   const Eigen::VectorXd& errors,
                   const std::string& header_comment) {
  std::ostringstream out;
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "vertex,error_mm\n";
  for (Eigen::Index i = 0; i < errors.size(); ++i) {
    out << i << "," << FormatDouble(errors[i]) << "\n";
  }
  WriteFile(path, out.str());
}

void WriteErrorPly(const std::filesystem::path& path, const Mesh& mesh,
                   const Eigen::VectorXd& errors,
                   const std::string& header_comment) {
  if (errors.size() != mesh.num_vertices()) {
    throw Error("error PLY: field length does not match vertex count");
  }
  std::ostringstream out;
  out << "ply\nformat ascii 1.0\n";
  if (!header_comment.empty()) out << "comment " << header_comment << "\n";
  out << "element vertex " << mesh.num_vertices() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "property double error\nend_header\n";
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    out << FormatDouble(mesh.vertices(i, 0)) << " "
        << FormatDouble(mesh.vertices(i, 1)) << " "
        << FormatDouble(mesh.vertices(i, 2)) << " " << FormatDouble(errors[i])
        << "\n";
  }
  WriteFile(path, out.str());
}

}  // namespace voxface
