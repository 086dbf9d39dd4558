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

// Fitting eigenface coefficients to predicted AMs, and per-vertex error
// fields with uncertainty filtering.

#ifndef VOXFACE_RECONSTRUCTION_H_
#define VOXFACE_RECONSTRUCTION_H_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "voxface/geometry.h"
#include "voxface/shapespace.h"
#include "voxface/stats.h"

namespace voxface {

struct ReconstructionProblem {
  std::vector<ResolvedAm> ams;  // K
  Eigen::VectorXd targets;      // K, measurement units
  Eigen::VectorXd weights;      // K, >= 0
  double lambda = 1e-3;
};

struct FitOptions {
  // Solve for alpha with beta = sqrt(eigenvalues) * alpha, so the ridge
  // term is lambda * |alpha|^2. Otherwise the ridge is lambda * |beta|^2.
  bool whiten = true;
  int max_iterations = 500;
  double step_tolerance = 1e-8;
  double relative_decrease = 1e-10;
  int stall_iterations = 5;
  double initial_damping = 1e-3;
};

struct FitResult {
  Eigen::VectorXd beta;
  Mesh mesh;
  // Objective at the initial point and at every accepted step.
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  double objective() const { return objective_trace.back(); }
};

// Solver parameters are alpha when whitening and beta otherwise.
Eigen::VectorXd ToBeta(const ShapeBasis& basis, const Eigen::VectorXd& params,
                       const FitOptions& options = {});

// Residual vector [sqrt(z)(Q(mean + P beta) - target); sqrt(lambda) * params]
// and its squared norm.
double ReconstructionObjective(const ShapeBasis& basis,
                               const ReconstructionProblem& problem,
                               const Eigen::VectorXd& params,
                               const FitOptions& options = {});
Eigen::VectorXd ReconstructionResiduals(const ShapeBasis& basis,
                                        const ReconstructionProblem& problem,
                                        const Eigen::VectorXd& params,
                                        const FitOptions& options = {});
Eigen::MatrixXd ReconstructionJacobian(const ShapeBasis& basis,
                                       const ReconstructionProblem& problem,
                                       const Eigen::VectorXd& params,
                                       const FitOptions& options = {});

// Levenberg-Marquardt from the mean face. Throws on invalid problems, a
// degenerate mean face or a non-finite objective.
FitResult Fit(const ShapeBasis& basis, const ReconstructionProblem& problem,
              const FitOptions& options = {});

// Independent fits, run concurrently.
std::vector<FitResult> FitAll(const ShapeBasis& basis,
                              std::span<const ReconstructionProblem> problems,
                              const FitOptions& options = {}, int jobs = 0);

// Euclidean distance per vertex (mm).
Eigen::VectorXd PerVertexError(const Mesh& mesh_hat, const Mesh& truth);

// Mean error field per level over the retained lowest-uncertainty speakers.
std::vector<Eigen::VectorXd> FilteredErrorMaps(
    std::span<const Eigen::VectorXd> errors,
    std::span<const double> uncertainty,
    std::span<const std::string> speakers, std::span<const double> levels);

// 1 for the `count` AMs with the highest 1 - CI_u among those declared
// predictable at `level` (ties by am_id), 0 elsewhere; ordered like
// `am_ids`. Warns when fewer than `count` are predictable.
Eigen::VectorXd SelectTopAms(const TestReport& report,
                             const std::vector<std::string>& am_ids,
                             int count = 10, double level = 1.0);

// mask / variance, rescaled to mean 1 over the selected AMs.
Eigen::VectorXd ConfidenceWeights(const Eigen::VectorXd& mask,
                                  const Eigen::VectorXd& variances);

// "vertex,error_mm" rows.
void WriteErrorCsv(const std::filesystem::path& path,
                   const Eigen::VectorXd& errors,
                   const std::string& header_comment = {});
// ASCII PLY with an "error" scalar per vertex.
void WriteErrorPly(const std::filesystem::path& path, const Mesh& mesh,
                   const Eigen::VectorXd& errors,
                   const std::string& header_comment = {});

}  // namespace voxface

#endif  // VOXFACE_RECONSTRUCTION_H_
