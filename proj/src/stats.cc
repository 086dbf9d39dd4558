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

#include "voxface/stats.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "voxface/common.h"
#include "voxface/io.h"

namespace voxface {

namespace {

// Continued fraction for I_x(a, b), modified Lentz.
double BetaContinuedFraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw Error("incomplete beta continued fraction did not converge");
}

std::string LevelLabel(double level) { return FormatDouble(level); }

constexpr double kLargeDof = 1e5;

double NormalQuantile(double p) {
  double lo = -40.0;
  double hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

ChanceEstimator ChanceBaseline(const Eigen::MatrixXd& train_ams) {
  if (train_ams.rows() == 0) throw Error("chance baseline needs a nonempty D_t");
  return {train_ams.colwise().mean().transpose()};
}

ErrorPair ComputeErrorPair(const Eigen::MatrixXd& predictions,
                           const ChanceEstimator& chance,
                           const Eigen::MatrixXd& truth, Split split) {
  if (split != Split::kEval) {
    throw Error("error ratios must be computed on D_v2, not " +
                std::string(SplitName(split)));
  }
  if (predictions.rows() != truth.rows() || predictions.cols() != truth.cols() ||
      chance.constant.size() != truth.cols()) {
    throw Error("predictions, chance and ground truth are not aligned");
  }
  if (truth.rows() == 0) throw Error("no D_v2 samples to score");
  ErrorPair out;
  out.model_mse = (predictions - truth).colwise().squaredNorm().transpose() /
                  static_cast<double>(truth.rows());
  out.chance_mse =
      (truth.rowwise() - chance.constant.transpose()).colwise().squaredNorm().transpose() /
      static_cast<double>(truth.rows());
  out.ratio.resize(truth.cols());
  for (Eigen::Index k = 0; k < truth.cols(); ++k) {
    if (out.chance_mse[k] == 0.0) {
      throw Error("AM column " + std::to_string(k) +
                  " has zero chance-level error; the ratio is undefined");
    }
    out.ratio[k] = out.model_mse[k] / out.chance_mse[k];
  }
  return out;
}

double RegularizedIncompleteBeta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw Error("incomplete beta needs x in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * BetaContinuedFraction(a, b, x) / a;
  }
  return 1.0 - front * BetaContinuedFraction(b, a, 1.0 - x) / b;
}

double InverseRegularizedIncompleteBeta(double a, double b, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error("probability must lie in [0, 1]");
  if (p == 0.0 || p == 1.0) return p;
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < 200 && hi - lo > 1e-17; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (RegularizedIncompleteBeta(a, b, mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double StudentQuantile(double p, double dof) {
  if (!(p > 0.0 && p < 1.0)) throw Error("quantile probability must lie in (0, 1)");
  if (!(dof > 0.0)) throw Error("degrees of freedom must be positive");
  if (p == 0.5) return 0.0;
  if (dof > kLargeDof) {
    // Cornish-Fisher around the normal quantile; the continued fraction
    // needs O(sqrt(dof)) terms here.
    const double z = NormalQuantile(p);
    const double z3 = z * z * z;
    const double z5 = z3 * z * z;
    return z + (z3 + z) / (4.0 * dof) + (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * dof * dof);
  }
  // P(|T| > t) = I_{dof/(dof+t^2)}(dof/2, 1/2).
  const double tail = p < 0.5 ? 2.0 * p : 2.0 * (1.0 - p);
  const double x = InverseRegularizedIncompleteBeta(0.5 * dof, 0.5, tail);
  const double t = std::sqrt(dof * (1.0 - x) / x);
  return p < 0.5 ? -t : t;
}

double SampleMean(std::span<const double> v) {
  if (v.empty()) throw Error("mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double SampleStd(std::span<const double> v) {
  if (v.size() < 2) throw Error("sample standard deviation needs N >= 2");
  const double m = SampleMean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double CiUpper(std::span<const double> ratios, double alpha) {
  if (ratios.size() < 2) throw Error("CI_u needs at least 2 runs");
  if (!(alpha > 0.0 && alpha < 0.5)) throw Error("alpha must lie in (0, 0.5)");
  const double n = static_cast<double>(ratios.size());
  const double t = StudentQuantile(1.0 - alpha, n - 1.0);
  return SampleMean(ratios) + t * SampleStd(ratios) / std::sqrt(n);
}

const AmTest& TestReport::Find(const std::string& am_id, double level) const {
  for (const auto& t : tests) {
    if (t.am_id == am_id && t.level == level) return t;
  }
  throw Error("no test for AM '" + am_id + "' at level " + LevelLabel(level));
}

std::vector<AmTest> TestReport::AtLevel(double level) const {
  std::vector<AmTest> out;
  for (const auto& t : tests) {
    if (t.level == level) out.push_back(t);
  }
  return out;
}

TestReport BuildReport(const std::vector<std::string>& am_ids,
                       const std::vector<double>& levels,
                       const std::vector<std::vector<Eigen::VectorXd>>& ratios,
                       double alpha, std::vector<uint64_t> seeds) {
  if (ratios.size() != levels.size()) throw Error("one ratio table per level expected");
  TestReport report;
  report.alpha = alpha;
  report.levels = levels;
  report.am_ids = am_ids;
  report.seeds = std::move(seeds);
  report.runs = ratios.empty() ? 0 : static_cast<int>(ratios[0].size());
  for (size_t l = 0; l < levels.size(); ++l) {
    const auto& runs = ratios[l];
    if (runs.size() < 2) throw Error("the t-test needs N >= 2 runs");
    for (size_t k = 0; k < am_ids.size(); ++k) {
      AmTest t;
      t.am_id = am_ids[k];
      t.level = levels[l];
      for (const auto& r : runs) {
        if (static_cast<size_t>(r.size()) != am_ids.size()) {
          throw Error("ratio vector length does not match the AM list");
        }
        t.ratios.push_back(r[static_cast<Eigen::Index>(k)]);
      }
      t.mean = SampleMean(t.ratios);
      t.stddev = SampleStd(t.ratios);
      t.ci_upper = CiUpper(t.ratios, alpha);
      t.predictable = t.ci_upper < 1.0;
      report.tests.push_back(std::move(t));
    }
  }
  return report;
}

int RetainedCount(int n, double level) {
  if (!(level > 0.0 && level <= 1.0)) throw Error("confidence level must lie in (0, 1]");
  const int k = static_cast<int>(std::ceil(level * n - 1e-9));
  return std::clamp(k, 1, std::max(n, 1));
}

std::vector<int> RetainLowestUncertainty(std::span<const double> uncertainty,
                                         std::span<const std::string> speakers,
                                         double level) {
  if (uncertainty.size() != speakers.size()) {
    throw Error("uncertainties and speaker ids differ in length");
  }
  if (uncertainty.empty()) throw Error("nothing to filter");
  std::vector<int> order(uncertainty.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const auto ua = static_cast<size_t>(a);
    const auto ub = static_cast<size_t>(b);
    if (uncertainty[ua] != uncertainty[ub]) return uncertainty[ua] < uncertainty[ub];
    return speakers[ua] < speakers[ub];
  });
  order.resize(static_cast<size_t>(RetainedCount(static_cast<int>(order.size()), level)));
  return order;
}

std::vector<uint64_t> HarnessSeeds(uint64_t master, int runs) {
  std::vector<uint64_t> out;
  for (int i = 0; i < runs; ++i) {
    out.push_back(DeriveSeed(master, 7, static_cast<uint64_t>(i)));
  }
  return out;
}

std::vector<Eigen::VectorXd> RunRatios(const ExperimentData& data,
                                       const RunRecord& run,
                                       const std::vector<double>& levels) {
  const int n = static_cast<int>(data.eval.size());
  const int k = static_cast<int>(data.am_ids.size());
  Eigen::MatrixXd train(static_cast<Eigen::Index>(data.train.size()), k);
  for (size_t i = 0; i < data.train.size(); ++i) {
    train.row(static_cast<Eigen::Index>(i)) = data.train[i].targets.transpose();
  }
  const ChanceEstimator chance = ChanceBaseline(train);
  Eigen::MatrixXd truth(n, k);
  std::vector<std::string> speakers;
  for (int i = 0; i < n; ++i) {
    truth.row(i) = data.eval[static_cast<size_t>(i)].targets.transpose();
    speakers.push_back(data.eval[static_cast<size_t>(i)].speaker);
  }
  std::vector<Eigen::VectorXd> out;
  for (double level : levels) {
    Eigen::VectorXd ratio(k);
    for (int a = 0; a < k; ++a) {
      std::vector<double> u(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) u[static_cast<size_t>(i)] = run.calibrated(i, a);
      const std::vector<int> keep = RetainLowestUncertainty(u, speakers, level);
      Eigen::MatrixXd p(static_cast<Eigen::Index>(keep.size()), 1);
      Eigen::MatrixXd y(static_cast<Eigen::Index>(keep.size()), 1);
      for (size_t j = 0; j < keep.size(); ++j) {
        p(static_cast<Eigen::Index>(j), 0) = run.means(keep[j], a);
        y(static_cast<Eigen::Index>(j), 0) = truth(keep[j], a);
      }
      ChanceEstimator c{Eigen::VectorXd::Constant(1, chance.constant[a])};
      ratio[a] = ComputeErrorPair(p, c, y, Split::kEval).ratio[0];
    }
    out.push_back(std::move(ratio));
  }
  return out;
}

HarnessResult RunHarness(const ExperimentData& data, const HarnessConfig& config) {
  if (data.train.empty() || data.select.empty() || data.eval.empty()) {
    throw Error("harness needs nonempty D_t, D_v1 and D_v2");
  }
  std::vector<uint64_t> seeds = config.run_seeds.empty()
                                    ? HarnessSeeds(config.seed, config.runs)
                                    : config.run_seeds;
  if (seeds.size() < 2) throw Error("the harness needs at least 2 runs");
  {
    std::vector<uint64_t> sorted = seeds;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw Error("harness runs have duplicate seeds");
    }
  }
  HarnessResult result;
  result.runs.resize(seeds.size());
  const int k = static_cast<int>(data.am_ids.size());
  const int n = static_cast<int>(data.eval.size());
  ParallelFor(static_cast<int>(seeds.size()), config.jobs, [&](int r) {
    TrainingConfig tc = config.training;
    tc.seed = seeds[static_cast<size_t>(r)];
    TrainResult trained = Train(data.train, data.select, tc);
    RunRecord rec;
    rec.seed = tc.seed;
    rec.best_iteration = trained.best_iteration;
    rec.means.resize(n, k);
    rec.calibrated.resize(n, k);
    for (int i = 0; i < n; ++i) {
      const AggregatedPrediction p =
          PredictExample(trained.model, data.eval[static_cast<size_t>(i)], tc);
      rec.means.row(i) = p.mean.transpose();
      rec.calibrated.row(i) = p.calibrated.transpose();
    }
    result.runs[static_cast<size_t>(r)] = std::move(rec);
  });
  std::vector<std::vector<Eigen::VectorXd>> ratios(config.levels.size());
  for (const auto& run : result.runs) {
    auto per_level = RunRatios(data, run, config.levels);
    for (size_t l = 0; l < per_level.size(); ++l) ratios[l].push_back(std::move(per_level[l]));
  }
  result.report = BuildReport(data.am_ids, config.levels, ratios, config.alpha, seeds);
  return result;
}

std::vector<std::string> PhonemeLabels(const Dataset& dataset) {
  std::vector<std::string> labels;
  for (const auto& spans : dataset.phonemes) {
    for (const auto& s : spans) {
      if (std::find(labels.begin(), labels.end(), s.label) == labels.end()) {
        labels.push_back(s.label);
      }
    }
  }
  return labels;
}

std::vector<PhonemeScore> RunPhonemeHarness(const Dataset& dataset,
                                            const Eigen::MatrixXd& ams,
                                            const HarnessConfig& config,
                                            const std::vector<std::string>& labels) {
  std::vector<PhonemeScore> out;
  for (const auto& label : labels) {
    // Speakers carrying the label, per split.
    int counts[4] = {0, 0, 0, 0};
    for (int s = 0; s < dataset.size(); ++s) {
      const auto& spans = dataset.phonemes[static_cast<size_t>(s)];
      if (std::any_of(spans.begin(), spans.end(),
                      [&](const Segment& g) { return g.label == label; })) {
        ++counts[static_cast<int>(dataset.splits[static_cast<size_t>(s)])];
      }
    }
    if (counts[0] < 2 || counts[1] < 1 || counts[2] < 1) {
      Warn("phoneme '" + label + "' skipped: too few annotated speakers in D_t, D_v1 or D_v2");
      continue;
    }
    ExperimentOptions opts;
    opts.phoneme = label;
    ExperimentData data = PrepareExperiment(dataset, ams, opts);
    HarnessConfig hc = config;
    hc.levels = {1.0};
    PhonemeScore score;
    score.label = label;
    score.speakers = static_cast<int>(data.train.size() + data.select.size() +
                                      data.eval.size() + data.test.size());
    score.report = RunHarness(data, hc).report;
    double sum = 0.0;
    for (const auto& t : score.report.tests) sum += 1.0 - t.ci_upper;
    score.mean_one_minus_ci = sum / static_cast<double>(score.report.tests.size());
    out.push_back(std::move(score));
  }
  return out;
}

void WriteTestReport(const std::filesystem::path& path, const TestReport& report,
                     const std::string& header_comment) {
  std::ostringstream out;
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  out << "# alpha=" << FormatDouble(report.alpha)
      << " runs=" << report.runs << '\n';
  out << "am_id,level,mean_ratio,std,ci_upper,one_minus_ci_upper,decision\n";
  for (const auto& t : report.tests) {
    out << t.am_id << ',' << FormatDouble(t.level) << ',' << FormatDouble(t.mean) << ','
        << FormatDouble(t.stddev) << ',' << FormatDouble(t.ci_upper) << ','
        << FormatDouble(1.0 - t.ci_upper) << ','
        << (t.predictable ? "predictable" : "not-shown-predictable") << '\n';
  }
  WriteFile(path, out.str());
}

TestReport ReadTestReport(const std::filesystem::path& path) {
  std::istringstream in(ReadFile(path));
  TestReport report;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    const std::string_view tl = Trim(line);
    if (tl.empty()) continue;
    if (tl.front() == '#') {
      const auto pos = tl.find("alpha=");
      if (pos != std::string_view::npos) {
        report.alpha = std::stod(std::string(tl.substr(pos + 6)));
      }
      const auto rpos = tl.find("runs=");
      if (rpos != std::string_view::npos) {
        report.runs = std::stoi(std::string(tl.substr(rpos + 5)));
      }
      continue;
    }
    if (header) {
      header = false;
      continue;
    }
    auto c = SplitChar(tl, ',');
    if (c.size() != 7) throw FormatError(path.string() + ": malformed report row");
    AmTest t;
    t.am_id = c[0];
    t.level = std::stod(c[1]);
    t.mean = std::stod(c[2]);
    t.stddev = std::stod(c[3]);
    t.ci_upper = std::stod(c[4]);
    t.predictable = c[6] == "predictable";
    if (std::find(report.levels.begin(), report.levels.end(), t.level) == report.levels.end()) {
      report.levels.push_back(t.level);
    }
    if (std::find(report.am_ids.begin(), report.am_ids.end(), t.am_id) == report.am_ids.end()) {
      report.am_ids.push_back(t.am_id);
    }
    report.tests.push_back(std::move(t));
  }
  return report;
}

}  // namespace voxface
