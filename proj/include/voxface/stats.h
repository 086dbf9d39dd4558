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

// Chance baselines, normalized errors, the one-sided paired t-test upper
// bound, and the repeated-experiment harness.

#ifndef VOXFACE_STATS_H_
#define VOXFACE_STATS_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "voxface/dataset.h"
#include "voxface/experiment.h"
#include "voxface/training.h"

namespace voxface {

struct ChanceEstimator {
  Eigen::VectorXd constant;  // per-AM training mean
};

// Rows are D_t samples, columns AMs.
ChanceEstimator ChanceBaseline(const Eigen::MatrixXd& train_ams);

struct ErrorPair {
  Eigen::VectorXd model_mse;
  Eigen::VectorXd chance_mse;
  Eigen::VectorXd ratio;
};

// Rows of `predictions` and `truth` are the same D_v2 speakers. Any other
// split is rejected: errors on D_t or D_v1 are optimistically biased.
ErrorPair ComputeErrorPair(const Eigen::MatrixXd& predictions,
                           const ChanceEstimator& chance,
                           const Eigen::MatrixXd& truth, Split split);

// Regularized incomplete beta I_x(a, b).
double RegularizedIncompleteBeta(double a, double b, double x);
// Inverse of I_x(a, b) in x.
double InverseRegularizedIncompleteBeta(double a, double b, double p);
// Quantile of Student's t with `dof` degrees of freedom, p in (0, 1).
double StudentQuantile(double p, double dof);

double SampleMean(std::span<const double> v);
// Divides by n - 1.
double SampleStd(std::span<const double> v);

// mean + t_{1-alpha, N-1} * std / sqrt(N). Needs N >= 2.
double CiUpper(std::span<const double> ratios, double alpha);

// H0: mean ratio >= 1 against H1: mean ratio < 1; H0 is rejected, and the
// AM declared predictable, when CI_u < 1.
struct AmTest {
  std::string am_id;
  double level = 1.0;
  std::vector<double> ratios;
  double mean = 0.0;
  double stddev = 0.0;
  double ci_upper = 0.0;
  bool predictable = false;
};

struct TestReport {
  double alpha = 0.05;
  int runs = 0;
  std::vector<double> levels;
  std::vector<std::string> am_ids;
  std::vector<uint64_t> seeds;
  std::vector<AmTest> tests;  // level-major, AM order within a level

  const AmTest& Find(const std::string& am_id, double level) const;
  std::vector<AmTest> AtLevel(double level) const;
};

// ratios[level][run][am].
TestReport BuildReport(const std::vector<std::string>& am_ids,
                       const std::vector<double>& levels,
                       const std::vector<std::vector<Eigen::VectorXd>>& ratios,
                       double alpha, std::vector<uint64_t> seeds = {});

// Number of samples a confidence level keeps out of n (at least 1).
int RetainedCount(int n, double level);
// Indices of the `level` fraction with the lowest uncertainty, ordered by
// (uncertainty, speaker id).
std::vector<int> RetainLowestUncertainty(std::span<const double> uncertainty,
                                         std::span<const std::string> speakers,
                                         double level);

struct HarnessConfig {
  int runs = 100;
  double alpha = 0.05;
  std::vector<double> levels = {1.0, 0.75, 0.5};
  uint64_t seed = 0;
  int jobs = 0;
  TrainingConfig training;
  // Explicit per-run seeds; derived from `seed` when empty.
  std::vector<uint64_t> run_seeds;
};

// Per-run seeds derived from a master seed by a counter scheme.
std::vector<uint64_t> HarnessSeeds(uint64_t master, int runs);

struct RunRecord {
  uint64_t seed = 0;
  int best_iteration = 0;
  Eigen::MatrixXd means;       // D_v2 speakers x K, normalized units
  Eigen::MatrixXd calibrated;  // matching calibrated uncertainties
};

struct HarnessResult {
  TestReport report;
  std::vector<RunRecord> runs;
};

// N independently seeded train + evaluate runs on fixed splits. Runs execute
// concurrently; results do not depend on `jobs`.
HarnessResult RunHarness(const ExperimentData& data, const HarnessConfig& config);

// Per-level ratios of one run.
std::vector<Eigen::VectorXd> RunRatios(const ExperimentData& data,
                                       const RunRecord& run,
                                       const std::vector<double>& levels);

struct PhonemeScore {
  std::string label;
  int speakers = 0;
  double mean_one_minus_ci = 0.0;  // over all AMs at the 100% level
  TestReport report;
};

// One harness per phoneme label, each restricted to that phoneme's spans.
std::vector<PhonemeScore> RunPhonemeHarness(const Dataset& dataset,
                                            const Eigen::MatrixXd& ams,
                                            const HarnessConfig& config,
                                            const std::vector<std::string>& labels);

// Phoneme labels in order of first appearance.
std::vector<std::string> PhonemeLabels(const Dataset& dataset);

// CSV: am_id,level,mean_ratio,std,ci_upper,one_minus_ci_upper,decision
void WriteTestReport(const std::filesystem::path& path, const TestReport& report,
                     const std::string& header_comment = {});
TestReport ReadTestReport(const std::filesystem::path& path);

}  // namespace voxface

#endif  // VOXFACE_STATS_H_
