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

#include "voxface/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "voxface/common.h"
#include "voxface/dataset.h"
#include "voxface/experiment.h"
#include "voxface/io.h"
#include "voxface/plots.h"
#include "voxface/shapespace.h"

namespace voxface {

namespace fs = std::filesystem;

namespace {

const std::vector<Setting> kDefaults = {
    {"run.seed", "0", "master seed"},
    {"run.jobs", "0", "worker threads, 0 = all cores"},
    {"paths.output", "voxface_out", "artifact directory"},
    {"paths.dataset", "", "dataset root, default <output>/dataset"},
    {"paths.am_definitions", "", "AM list overriding the dataset's own"},
    {"synth.speakers", "400", "number of speakers"},
    {"synth.vertices", "500", "template vertices"},
    {"synth.latent_dim", "10", "shared shape factors"},
    {"synth.latent_scale_mm", "3", "std of the leading shared factor"},
    {"synth.planted",
     "nose_width:0.8,mouth_width:0.8,alar_base_width:0.8,cranial_width:0.8",
     "planted AMs as id:rho pairs"},
    {"synth.frames", "120", "frames per recording"},
    {"synth.feature_noise", "1", "feature noise scale"},
    {"synth.noisy_fraction", "0.5", "share of noisy recordings"},
    {"synth.planted_spread", "2", "broad planted-field RMS per latent unit"},
    {"synth.mesh_noise_mm", "0", "per-coordinate mesh noise"},
    {"synth.wave_seconds", "0.5", "audio length, 0 disables audio"},
    {"synth.phonemes", "false", "annotate phoneme spans"},
    {"training.preset", "desk", "desk or full"},
    {"training.learning_rate", "", "preset value when empty"},
    {"training.momentum", "", ""},
    {"training.weight_decay", "", ""},
    {"training.clip_norm", "", "0 disables clipping"},
    {"training.batch_size", "", ""},
    {"training.iterations", "", ""},
    {"training.warmup", "", "variance-frozen iterations"},
    {"training.crop_min", "", "frames"},
    {"training.crop_max", "", "frames"},
    {"training.eval_chunk", "", "frames per prediction chunk"},
    {"training.select_every", "", "model-selection cadence"},
    {"phonatory.enabled", "false", "diffusion constraint"},
    {"phonatory.gamma", "0.1", "diffusion loss weight"},
    {"phonatory.steps", "50", "diffusion steps"},
    {"phonatory.beta_start", "0.0001", ""},
    {"phonatory.beta_end", "0.12", ""},
    {"phonatory.pretrain_iterations", "0", ""},
    {"phonatory.learning_rate", "0.01", "denoiser learning rate"},
    {"harness.runs", "100", "independent training runs"},
    {"harness.alpha", "0.05", "one-sided test level"},
    {"harness.levels", "1,0.75,0.5", "uncertainty filtering levels"},
    {"harness.phonemes", "true", "per-phoneme analysis when annotated"},
    {"reconstruction.lambda", "0.001", "ridge weight"},
    {"reconstruction.top_count", "10", "AMs used for fitting"},
    {"reconstruction.confidence_weighting", "false", "weight AMs by 1/w"},
    {"reconstruction.whiten", "true", "ridge in eigenvalue-scaled units"},
    {"reconstruction.basis_dim", "0", "0 = min(n-1, 199)"},
    {"reconstruction.split", "D_e", "split to reconstruct"},
    {"reconstruction.max_iterations", "500", ""},
};

bool Unhashed(const std::string& key) {
  return key == "run.jobs" || key.rfind("paths.", 0) == 0;
}

double ToDouble(const Settings& s, const std::string& key) {
  const std::string& v = s.Get(key);
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error("setting " + key + ": expected a number, got '" + v + "'");
  }
}

long long ToInt(const Settings& s, const std::string& key) {
  const std::string& v = s.Get(key);
  try {
    size_t pos = 0;
    long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error("setting " + key + ": expected an integer, got '" + v + "'");
  }
}

int ToPositive(const Settings& s, const std::string& key, int min = 1) {
  long long v = ToInt(s, key);
  if (v < min || v > 1000000000) {
    throw Error("setting " + key + " must be >= " + std::to_string(min));
  }
  return static_cast<int>(v);
}

bool ToBool(const Settings& s, const std::string& key) {
  std::string v = s.Get(key);
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error("setting " + key + ": expected a boolean, got '" + v + "'");
}

// ---------------------------------------------------------------------------
// Artifacts.

struct Stage {
  const PipelineConfig& config;
  std::string name;
  std::vector<fs::path> written;

  fs::path Out(const fs::path& rel) const { return config.output_dir / rel; }

  void Record(const fs::path& path) { written.push_back(path); }

  void WriteText(const fs::path& rel, const std::string& body) {
    fs::path p = Out(rel);
    fs::create_directories(p.parent_path());
    WriteFile(p, body);
    Record(p);
  }

  void WriteMeta(const fs::path& binary) {
    fs::path meta = binary;
    meta += ".meta";
    WriteFile(meta, "# " + config.Provenance() + "\n");
    Record(binary);
    Record(meta);
  }
};

void Require(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw MissingArtifactError("missing " + path.string() + "; run `voxface " +
                               producer + "` first");
  }
}

std::string HashOf(const std::string& header) {
  std::istringstream in(header);
  std::string tok;
  while (in >> tok) {
    if (tok.rfind("config_hash=", 0) == 0) return tok.substr(12);
  }
  return {};
}

// Text artifact produced upstream: exists and carries this run's hash.
void CheckUpstream(const PipelineConfig& config, const fs::path& path,
                   const std::string& producer) {
  Require(path, producer);
  std::string hash = HashOf(ReadHeaderComment(path));
  if (hash != config.config_hash) {
    throw Error(path.string() + " has config hash '" + hash +
                "' but this run has " + config.config_hash +
                "; rerun `voxface " + producer + "` with the current config");
  }
}

void CheckBinary(const PipelineConfig& config, const fs::path& path,
                 const std::string& producer) {
  Require(path, producer);
  fs::path meta = path;
  meta += ".meta";
  CheckUpstream(config, meta, producer);
}

Dataset LoadDataset(const PipelineConfig& config) {
  Require(config.dataset_dir / "dataset.json", "synth");
  fs::path prov = config.dataset_dir / "provenance.txt";
  if (fs::exists(prov)) CheckUpstream(config, prov, "synth");
  Dataset ds = ReadDataset(config.dataset_dir);
  if (!config.am_definitions.empty()) {
    ds.am_definitions = ReadAmDefinitions(config.am_definitions);
    ds.Validate();
  }
  return ds;
}

Eigen::MatrixXd LoadAms(const PipelineConfig& config, const Dataset& ds) {
  fs::path path = config.output_dir / "ams.csv";
  CheckUpstream(config, path, "compute-ams");
  AmTable table = ReadAmTable(path);
  Eigen::MatrixXd out(ds.size(), static_cast<Eigen::Index>(ds.am_definitions.size()));
  for (size_t k = 0; k < ds.am_definitions.size(); ++k) {
    auto it = std::find(table.am_ids.begin(), table.am_ids.end(),
                        ds.am_definitions[k].id);
    if (it == table.am_ids.end()) {
      throw Error("ams.csv lacks AM " + ds.am_definitions[k].id +
                  "; rerun `voxface compute-ams`");
    }
    Eigen::Index col = it - table.am_ids.begin();
    for (int i = 0; i < ds.size(); ++i) {
      out(i, static_cast<Eigen::Index>(k)) =
          table.values(table.Row(ds.speakers[static_cast<size_t>(i)]), col);
    }
  }
  return out;
}

std::vector<std::string> AmIds(const Dataset& ds) {
  std::vector<std::string> ids;
  for (const AmDefinition& d : ds.am_definitions) ids.push_back(d.id);
  return ids;
}

std::string LevelName(double level) {
  return FormatDouble(level * 100.0) + "%";
}

// ---------------------------------------------------------------------------
// Stages.

void StageSynth(Stage& st) {
  const PipelineConfig& c = st.config;
  SynthConfig sc = c.synth;
  sc.seed = c.seed;
  if (!c.am_definitions.empty()) {
    Warn("synth: paths.am_definitions is ignored; synthetic data uses the "
         "built-in AM list");
  }
  SynthResult res = Generate(sc, c.jobs);
  fs::remove_all(c.dataset_dir);
  WriteDataset(c.dataset_dir, res.dataset);
  WriteFile(c.dataset_dir / "provenance.txt", "# " + c.Provenance() + "\n");
  st.Record(c.dataset_dir);
}

void StageComputeAms(Stage& st) {
  Dataset ds = LoadDataset(st.config);
  AmTable table;
  table.am_ids = AmIds(ds);
  table.speakers = ds.speakers;
  table.values = ComputeDatasetAms(ds);
  fs::path p = st.Out("ams.csv");
  fs::create_directories(p.parent_path());
  WriteAmTable(p, table, st.config.Provenance());
  st.Record(p);
}

void StageBuildBasis(Stage& st) {
  Dataset ds = LoadDataset(st.config);
  std::vector<Mesh> meshes;
  for (int i : ds.Indices(Split::kTrain)) meshes.push_back(ds.meshes[static_cast<size_t>(i)]);
  int d = st.config.basis_dim > 0 ? st.config.basis_dim
                                  : DefaultBasisDim(static_cast<int>(meshes.size()));
  ShapeBasis basis = BuildBasis(meshes, d);
  fs::path p = st.Out("basis.bin");
  fs::create_directories(p.parent_path());
  WriteBasis(p, basis);
  st.WriteMeta(p);
}

void StageTrain(Stage& st) {
  const PipelineConfig& c = st.config;
  Dataset ds = LoadDataset(c);
  Eigen::MatrixXd ams = LoadAms(c, ds);
  ExperimentOptions opts;
  opts.waveforms = c.training.phonatory.enabled;
  ExperimentData data = PrepareExperiment(ds, ams, opts);
  TrainingConfig tc = c.training;
  tc.seed = DeriveSeed(c.seed, 8, 0);
  TrainResult tr = Train(data.train, data.select, tc);
  Checkpoint ckpt;
  ckpt.model = tr.model;
  ckpt.denoiser = tr.denoiser;
  if (tr.denoiser) {
    ckpt.schedule = DiffusionSchedule::Linear(tc.phonatory.steps, tc.phonatory.beta_start,
                                      tc.phonatory.beta_end);
  }
  ckpt.mel_normalizer = data.mel;
  ckpt.am_normalization = data.am_norm;
  ckpt.provenance = c.Provenance();
  fs::path p = st.Out("model.ckpt");
  fs::create_directories(p.parent_path());
  WriteCheckpoint(p, ckpt);
  st.WriteMeta(p);
  std::ostringstream trace;
  trace << "# " << c.Provenance() << " best_iteration=" << tr.best_iteration
        << "\niteration,loss\n";
  for (size_t i = 0; i < tr.loss_trace.size(); ++i) {
    trace << i << "," << FormatDouble(tr.loss_trace[i]) << "\n";
  }
  st.WriteText("training_loss.csv", trace.str());
}

void StagePredict(Stage& st) {
  const PipelineConfig& c = st.config;
  Dataset ds = LoadDataset(c);
  Eigen::MatrixXd ams = LoadAms(c, ds);
  CheckBinary(c, st.Out("model.ckpt"), "train");
  Checkpoint ckpt = ReadCheckpoint(st.Out("model.ckpt"));
  ExperimentOptions opts;
  opts.waveforms = false;
  ExperimentData data = PrepareExperiment(ds, ams, opts);
  for (Split split : {Split::kEval, Split::kTest}) {
    const std::vector<Example>& ex = data.examples(split);
    AmTable means, unc;
    means.am_ids = unc.am_ids = data.am_ids;
    const auto k = static_cast<Eigen::Index>(data.am_ids.size());
    means.values.resize(static_cast<Eigen::Index>(ex.size()), k);
    unc.values.resize(static_cast<Eigen::Index>(ex.size()), k);
    std::vector<AggregatedPrediction> preds(ex.size());
    ParallelFor(static_cast<int>(ex.size()), c.jobs, [&](int i) {
      preds[static_cast<size_t>(i)] =
          PredictExample(ckpt.model, ex[static_cast<size_t>(i)], c.training);
    });
    for (size_t i = 0; i < ex.size(); ++i) {
      means.speakers.push_back(ex[i].speaker);
      unc.speakers.push_back(ex[i].speaker);
      means.values.row(static_cast<Eigen::Index>(i)) =
          ckpt.am_normalization.Invert(preds[i].mean).transpose();
      unc.values.row(static_cast<Eigen::Index>(i)) = preds[i].calibrated.transpose();
    }
    std::string tag(SplitName(split));
    WriteAmTable(st.Out("predictions_" + tag + ".csv"), means, c.Provenance());
    WriteAmTable(st.Out("uncertainty_" + tag + ".csv"), unc, c.Provenance());
    st.Record(st.Out("predictions_" + tag + ".csv"));
    st.Record(st.Out("uncertainty_" + tag + ".csv"));
  }
}

void StageSelect(Stage& st) {
  const PipelineConfig& c = st.config;
  Dataset ds = LoadDataset(c);
  Eigen::MatrixXd ams = LoadAms(c, ds);
  ExperimentOptions opts;
  opts.waveforms = c.training.phonatory.enabled;
  ExperimentData data = PrepareExperiment(ds, ams, opts);
  HarnessConfig hc = c.harness;
  hc.seed = c.seed;
  hc.jobs = c.jobs;
  hc.training = c.training;
  HarnessResult hr = RunHarness(data, hc);
  WriteTestReport(st.Out("test_report.csv"), hr.report, c.Provenance());
  st.Record(st.Out("test_report.csv"));

  std::ostringstream runs;
  runs << "# " << c.Provenance() << "\nrun,seed,best_iteration,level";
  for (const std::string& id : data.am_ids) runs << "," << id;
  runs << "\n";
  for (size_t r = 0; r < hr.runs.size(); ++r) {
    std::vector<Eigen::VectorXd> ratios = RunRatios(data, hr.runs[r], hc.levels);
    for (size_t l = 0; l < hc.levels.size(); ++l) {
      runs << r << "," << hr.runs[r].seed << "," << hr.runs[r].best_iteration
           << "," << FormatDouble(hc.levels[l]);
      for (Eigen::Index k = 0; k < ratios[l].size(); ++k) {
        runs << "," << FormatDouble(ratios[l][k]);
      }
      runs << "\n";
    }
  }
  st.WriteText("harness_runs.csv", runs.str());

  Eigen::VectorXd z = SelectTopAms(hr.report, data.am_ids, c.top_count,
                                   hc.levels.front());
  std::ostringstream sel;
  sel << "# " << c.Provenance() << "\nam_id,weight\n";
  for (size_t k = 0; k < data.am_ids.size(); ++k) {
    sel << data.am_ids[k] << "," << FormatDouble(z[static_cast<Eigen::Index>(k)]) << "\n";
  }
  st.WriteText("selected_ams.csv", sel.str());

  if (c.phoneme_analysis && ds.has_phonemes()) {
    std::vector<PhonemeScore> scores =
        RunPhonemeHarness(ds, ams, hc, PhonemeLabels(ds));
    std::ostringstream ph;
    ph << "# " << c.Provenance() << "\nphoneme,speakers,mean_one_minus_ci_upper\n";
    for (const PhonemeScore& s : scores) {
      ph << s.label << "," << s.speakers << ","
         << FormatDouble(s.mean_one_minus_ci) << "\n";
    }
    st.WriteText("phoneme_report.csv", ph.str());
  }
}

struct Selection {
  std::vector<std::string> am_ids;
  Eigen::VectorXd weights;
};

Selection ReadSelection(const PipelineConfig& c) {
  fs::path p = c.output_dir / "selected_ams.csv";
  CheckUpstream(c, p, "select");
  Selection s;
  std::vector<double> w;
  std::istringstream in(ReadFile(p));
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<std::string> f = SplitChar(line, ',');
    if (f.size() != 2) throw FormatError(p.string() + ": malformed row '" + line + "'");
    s.am_ids.push_back(f[0]);
    w.push_back(std::stod(f[1]));
  }
  s.weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  return s;
}

void StageFit(Stage& st) {
  const PipelineConfig& c = st.config;
  Selection sel = ReadSelection(c);
  CheckBinary(c, st.Out("basis.bin"), "build-basis");
  std::string tag(SplitName(c.fit_split));
  fs::path pred_path = st.Out("predictions_" + tag + ".csv");
  fs::path unc_path = st.Out("uncertainty_" + tag + ".csv");
  CheckUpstream(c, pred_path, "predict");
  CheckUpstream(c, unc_path, "predict");
  Dataset ds = LoadDataset(c);
  ShapeBasis basis = ReadBasis(st.Out("basis.bin"));
  AmTable preds = ReadAmTable(pred_path);
  AmTable unc = ReadAmTable(unc_path);
  if (preds.am_ids != sel.am_ids || unc.am_ids != sel.am_ids) {
    throw Error("fit: AM columns of predictions and selection differ");
  }
  if (sel.weights.sum() <= 0.0) {
    throw Error("fit: no AM was selected as predictable; nothing to fit");
  }
  std::vector<AmDefinition> defs;
  for (const std::string& id : sel.am_ids) {
    auto it = std::find_if(ds.am_definitions.begin(), ds.am_definitions.end(),
                           [&](const AmDefinition& d) { return d.id == id; });
    if (it == ds.am_definitions.end()) throw Error("fit: unknown AM " + id);
    defs.push_back(*it);
  }
  std::vector<ResolvedAm> resolved = ResolveAll(ds.landmarks, defs);

  const int n = static_cast<int>(preds.speakers.size());
  std::vector<ReconstructionProblem> problems(static_cast<size_t>(n));
  std::vector<double> uncertainty(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    ReconstructionProblem& p = problems[static_cast<size_t>(i)];
    p.ams = resolved;
    p.targets = preds.values.row(i).transpose();
    Eigen::VectorXd w = unc.values.row(unc.Row(preds.speakers[static_cast<size_t>(i)])).transpose();
    p.weights = c.confidence_weighting ? ConfidenceWeights(sel.weights, w) : sel.weights;
    p.lambda = c.lambda;
    double sum = 0.0;
    for (Eigen::Index k = 0; k < w.size(); ++k) sum += sel.weights[k] > 0 ? w[k] : 0.0;
    uncertainty[static_cast<size_t>(i)] = sum / sel.weights.cwiseMin(1.0).cwiseMax(0.0).sum();
  }
  std::vector<FitResult> fits = FitAll(basis, problems, c.fit, c.jobs);
  std::ostringstream table;
  table << "# " << c.Provenance() << "\nspeaker,converged,iterations,objective,"
        << "uncertainty\n";
  fs::create_directories(st.Out("fits"));
  for (int i = 0; i < n; ++i) {
    const std::string& spk = preds.speakers[static_cast<size_t>(i)];
    const FitResult& f = fits[static_cast<size_t>(i)];
    table << spk << "," << (f.converged ? 1 : 0) << "," << f.iterations << ","
          << FormatDouble(f.objective()) << ","
          << FormatDouble(uncertainty[static_cast<size_t>(i)]) << "\n";
    WriteObj(st.Out("fits/" + spk + ".obj"), f.mesh);
    st.Record(st.Out("fits/" + spk + ".obj"));
  }
  st.WriteText("fits.csv", table.str());
}

void StageEvaluate(Stage& st) {
  const PipelineConfig& c = st.config;
  CheckUpstream(c, st.Out("fits.csv"), "fit");
  CheckBinary(c, st.Out("basis.bin"), "build-basis");
  Dataset ds = LoadDataset(c);
  ShapeBasis basis = ReadBasis(st.Out("basis.bin"));
  std::vector<std::string> speakers;
  std::vector<double> uncertainty;
  std::vector<Eigen::VectorXd> errors;
  std::istringstream in(ReadFile(st.Out("fits.csv")));
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<std::string> f = SplitChar(line, ',');
    if (f.size() != 5) throw FormatError("fits.csv: malformed row '" + line + "'");
    auto it = std::find(ds.speakers.begin(), ds.speakers.end(), f[0]);
    if (it == ds.speakers.end()) throw Error("evaluate: unknown speaker " + f[0]);
    fs::path mesh_path = st.Out("fits/" + f[0] + ".obj");
    Require(mesh_path, "fit");
    Mesh fitted = ReadObj(mesh_path);
    errors.push_back(PerVertexError(fitted, ds.meshes[static_cast<size_t>(it - ds.speakers.begin())]));
    speakers.push_back(f[0]);
    uncertainty.push_back(std::stod(f[4]));
  }
  const std::vector<double>& levels = c.harness.levels;
  std::vector<Eigen::VectorXd> maps =
      FilteredErrorMaps(errors, uncertainty, speakers, levels);
  std::ostringstream csv, summary;
  csv << "# " << c.Provenance() << "\nvertex";
  summary << "# " << c.Provenance() << "\nlevel,retained,mean_error_mm\n";
  for (size_t l = 0; l < levels.size(); ++l) {
    csv << ",level_" << FormatDouble(levels[l]);
    summary << FormatDouble(levels[l]) << ","
            << RetainedCount(static_cast<int>(errors.size()), levels[l]) << ","
            << FormatDouble(maps[l].mean()) << "\n";
  }
  csv << "\n";
  for (Eigen::Index v = 0; v < maps[0].size(); ++v) {
    csv << v;
    for (const Eigen::VectorXd& m : maps) csv << "," << FormatDouble(m[v]);
    csv << "\n";
  }
  st.WriteText("error_maps.csv", csv.str());
  st.WriteText("evaluation.csv", summary.str());
  Mesh mean_face = Unflatten(basis.mean_shape, basis.num_vertices());
  for (size_t l = 0; l < levels.size(); ++l) {
    fs::path p = st.Out("error_level_" + FormatDouble(levels[l]) + ".ply");
    WriteErrorPly(p, mean_face, maps[l], c.Provenance());
    st.Record(p);
  }
}

void StageReport(Stage& st) {
  const PipelineConfig& c = st.config;
  fs::path report_path = st.Out("test_report.csv");
  CheckUpstream(c, report_path, "select");
  TestReport report = ReadTestReport(report_path);
  std::ostringstream text;
  text << "# " << c.Provenance() << "\n";
  text << "alpha " << FormatDouble(report.alpha) << ", " << report.runs
       << " runs\n";

  BarChart am_chart;
  am_chart.title = "AM predictability (1 - CI_u)";
  am_chart.y_label = "1 - CI_u";
  am_chart.labels = report.am_ids;
  am_chart.reference = 0.0;
  for (double level : report.levels) {
    BarSeries s{LevelName(level), {}};
    for (const AmTest& t : report.AtLevel(level)) s.values.push_back(1.0 - t.ci_upper);
    am_chart.series.push_back(std::move(s));
  }
  st.WriteText("report/am_predictability.svg", RenderBarChart(am_chart));

  const double top_level = report.levels.front();
  text << "predictable at " << LevelName(top_level) << ":";
  std::vector<std::string> flagged;
  for (const AmTest& t : report.AtLevel(top_level)) {
    if (t.predictable) flagged.push_back(t.am_id);
  }
  for (const std::string& id : flagged) text << " " << id;
  if (flagged.empty()) text << " none";
  text << "\n";
  for (double level : report.levels) {
    double sum = 0.0;
    std::vector<AmTest> tests = report.AtLevel(level);
    for (const AmTest& t : tests) sum += t.mean;
    text << "mean ratio at " << LevelName(level) << ": "
         << FormatDouble(sum / std::max<size_t>(1, tests.size())) << "\n";
  }

  fs::path planted = c.dataset_dir / "planted.csv";
  if (fs::exists(planted)) {
    for (const PlantedAm& p : ReadPlanted(planted)) {
      bool hit = std::find(flagged.begin(), flagged.end(), p.am_id) != flagged.end();
      text << "planted " << p.am_id << " rho=" << FormatDouble(p.rho) << ": "
           << (hit ? "flagged" : "missed") << "\n";
    }
  }

  if (fs::exists(st.Out("evaluation.csv"))) {
    CheckUpstream(c, st.Out("evaluation.csv"), "evaluate");
    CheckUpstream(c, st.Out("error_maps.csv"), "evaluate");
    CheckBinary(c, st.Out("basis.bin"), "build-basis");
    ShapeBasis basis = ReadBasis(st.Out("basis.bin"));
    std::istringstream in(ReadFile(st.Out("error_maps.csv")));
    std::string line;
    std::vector<std::string> names;
    std::vector<std::vector<double>> cols;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::vector<std::string> f = SplitChar(line, ',');
      if (names.empty()) {
        names.assign(f.begin() + 1, f.end());
        cols.resize(names.size());
        continue;
      }
      for (size_t j = 1; j < f.size() && j - 1 < cols.size(); ++j) {
        cols[j - 1].push_back(std::stod(f[j]));
      }
    }
    std::vector<Eigen::VectorXd> fields;
    for (auto& col : cols) {
      fields.push_back(Eigen::Map<Eigen::VectorXd>(col.data(), static_cast<Eigen::Index>(col.size())));
    }
    Mesh mean_face = Unflatten(basis.mean_shape, basis.num_vertices());
    st.WriteText("report/error_maps.svg",
                 RenderErrorMaps(mean_face, names, fields,
                                 "Per-vertex reconstruction error"));
    text << "reconstruction mean error (mm) by level:";
    for (size_t l = 0; l < fields.size(); ++l) {
      text << " " << names[l] << "=" << FormatDouble(fields[l].mean());
    }
    text << "\n";
  }

  fs::path phon = st.Out("phoneme_report.csv");
  if (fs::exists(phon)) {
    CheckUpstream(c, phon, "select");
    BarChart chart;
    chart.title = "Mean 1 - CI_u per phoneme";
    chart.y_label = "mean 1 - CI_u";
    chart.reference = 0.0;
    BarSeries s{"phoneme", {}};
    std::istringstream in(ReadFile(phon));
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      if (!header) {
        header = true;
        continue;
      }
      std::vector<std::string> f = SplitChar(line, ',');
      if (f.size() != 3) throw FormatError("phoneme_report.csv: malformed row");
      chart.labels.push_back(f[0]);
      s.values.push_back(std::stod(f[2]));
    }
    chart.series.push_back(std::move(s));
    st.WriteText("report/phonemes.svg", RenderBarChart(chart));
  }
  st.WriteText("report/summary.txt", text.str());
}

void WriteRunLog(const Stage& st, double seconds) {
  nlohmann::ordered_json log;
  log["stage"] = st.name;
  log["version"] = VOXFACE_VERSION;
  log["config_hash"] = st.config.config_hash;
  log["seed"] = st.config.seed;
  log["jobs"] = ResolveJobs(st.config.jobs);
  log["seconds"] = seconds;
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const fs::path& p : st.written) {
    nlohmann::ordered_json f;
    f["path"] = fs::relative(p, st.config.output_dir).generic_string();
    if (fs::is_regular_file(p)) f["fnv1a64"] = HexDigest(Fnv1a64(ReadFile(p)));
    files.push_back(f);
  }
  log["artifacts"] = files;
  fs::path path = st.config.output_dir / "logs" / (st.name + ".json");
  fs::create_directories(path.parent_path());
  WriteFile(path, log.dump(2) + "\n");
}

}  // namespace

const std::vector<Setting>& DefaultSettings() { return kDefaults; }

Settings::Settings() {
  for (const Setting& s : kDefaults) values_[s.key] = s.value;
}

void Settings::Set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error("unknown setting '" + key + "'");
  it->second = std::string(Trim(value));
}

const std::string& Settings::Get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error("unknown setting '" + key + "'");
  return it->second;
}

void Settings::LoadIni(const fs::path& path) {
  if (!fs::exists(path)) throw FormatError("config file not found: " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw FormatError("config " + path.string() + ": " + e.message() +
                      " at line " + std::to_string(e.line()));
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw FormatError("config " + path.string() + ": key '" + section +
                        "' outside a section");
    }
    for (const auto& [key, value] : body) {
      Set(section + "." + key, value.data());
    }
  }
}

std::string EnvironmentName(const std::string& key) {
  std::string name = "VOXFACE_";
  for (char ch : key) {
    name += ch == '.' ? '_' : static_cast<char>(::toupper(static_cast<unsigned char>(ch)));
  }
  return name;
}

void Settings::LoadEnvironment() {
  for (auto& [key, value] : values_) {
    if (const char* v = std::getenv(EnvironmentName(key).c_str())) {
      value = std::string(Trim(v));
    }
  }
}

std::string Settings::Canonical() const {
  std::string out;
  for (const auto& [key, value] : values_) {
    if (Unhashed(key)) continue;
    out += key + "=" + value + "\n";
  }
  return out;
}

std::string Settings::Hash() const { return HexDigest(Fnv1a64(Canonical())); }

std::string PipelineConfig::Provenance() const {
  return "config_hash=" + config_hash + " seed=" + std::to_string(seed);
}

PipelineConfig BuildPipelineConfig(const Settings& s) {
  PipelineConfig c;
  long long seed = ToInt(s, "run.seed");
  if (seed < 0) throw Error("run.seed must be >= 0");
  c.seed = static_cast<uint64_t>(seed);
  c.jobs = ToPositive(s, "run.jobs", 0);
  c.output_dir = s.Get("paths.output");
  if (c.output_dir.empty()) throw Error("paths.output must be set");
  c.dataset_dir = s.Get("paths.dataset").empty() ? c.output_dir / "dataset"
                                                 : fs::path(s.Get("paths.dataset"));
  c.am_definitions = s.Get("paths.am_definitions");

  SynthConfig& sc = c.synth;
  sc.num_speakers = ToPositive(s, "synth.speakers");
  sc.num_vertices = ToPositive(s, "synth.vertices");
  sc.latent_dim = ToPositive(s, "synth.latent_dim", 0);
  sc.latent_scale_mm = ToDouble(s, "synth.latent_scale_mm");
  sc.planted.clear();
  for (const std::string& item : SplitChar(s.Get("synth.planted"), ',')) {
    std::string_view t = Trim(item);
    if (t.empty()) continue;
    std::vector<std::string> kv = SplitChar(t, ':');
    if (kv.size() != 2) {
      throw Error("synth.planted: expected id:rho, got '" + std::string(t) + "'");
    }
    PlantSpec p;
    p.am_id = std::string(Trim(kv[0]));
    try {
      p.rho = std::stod(kv[1]);
    } catch (const std::exception&) {
      throw Error("synth.planted: bad rho in '" + std::string(t) + "'");
    }
    sc.planted.push_back(p);
  }
  sc.num_frames = ToPositive(s, "synth.frames");
  sc.feature_noise = ToDouble(s, "synth.feature_noise");
  sc.noisy_fraction = ToDouble(s, "synth.noisy_fraction");
  sc.planted_spread = ToDouble(s, "synth.planted_spread");
  sc.mesh_noise_mm = ToDouble(s, "synth.mesh_noise_mm");
  sc.wave_seconds = ToDouble(s, "synth.wave_seconds");
  if (ToBool(s, "synth.phonemes")) sc.phonemes = DefaultPhonemeInventory();
  sc.seed = c.seed;

  const std::string& preset = s.Get("training.preset");
  if (preset == "desk") {
    c.training = DeskScaleTrainingConfig();
  } else if (preset == "full") {
    c.training = TrainingConfig{};
  } else {
    throw Error("training.preset must be desk or full, got '" + preset + "'");
  }
  TrainingConfig& tc = c.training;
  auto given = [&](const char* key) { return !s.Get(key).empty(); };
  if (given("training.learning_rate")) tc.sgd.learning_rate = ToDouble(s, "training.learning_rate");
  if (given("training.momentum")) tc.sgd.momentum = ToDouble(s, "training.momentum");
  if (given("training.weight_decay")) tc.sgd.weight_decay = ToDouble(s, "training.weight_decay");
  if (given("training.clip_norm")) tc.sgd.clip_norm = ToDouble(s, "training.clip_norm");
  if (given("training.batch_size")) tc.batch_size = ToPositive(s, "training.batch_size");
  if (given("training.iterations")) tc.iterations = ToPositive(s, "training.iterations");
  if (given("training.warmup")) tc.warmup_iterations = ToPositive(s, "training.warmup", 0);
  if (given("training.crop_min")) tc.crop.min_frames = ToPositive(s, "training.crop_min");
  if (given("training.crop_max")) tc.crop.max_frames = ToPositive(s, "training.crop_max");
  if (given("training.eval_chunk")) tc.eval_chunk_frames = ToPositive(s, "training.eval_chunk");
  if (given("training.select_every")) tc.select_every = ToPositive(s, "training.select_every");
  if (tc.crop.min_frames > tc.crop.max_frames) {
    throw Error("training.crop_min exceeds training.crop_max");
  }
  if (!(tc.sgd.learning_rate > 0.0)) throw Error("training.learning_rate must be > 0");
  PhonatoryConfig& pc = tc.phonatory;
  pc.enabled = ToBool(s, "phonatory.enabled");
  pc.gamma = ToDouble(s, "phonatory.gamma");
  pc.steps = ToPositive(s, "phonatory.steps");
  pc.beta_start = ToDouble(s, "phonatory.beta_start");
  pc.beta_end = ToDouble(s, "phonatory.beta_end");
  pc.pretrain_iterations = ToPositive(s, "phonatory.pretrain_iterations", 0);
  pc.sgd.learning_rate = ToDouble(s, "phonatory.learning_rate");
  if (pc.gamma < 0.0) throw Error("phonatory.gamma must be >= 0");

  HarnessConfig& hc = c.harness;
  hc.runs = ToPositive(s, "harness.runs", 2);
  hc.alpha = ToDouble(s, "harness.alpha");
  if (!(hc.alpha > 0.0 && hc.alpha < 0.5)) {
    throw Error("harness.alpha must lie in (0, 0.5)");
  }
  hc.levels.clear();
  for (const std::string& item : SplitChar(s.Get("harness.levels"), ',')) {
    double v;
    try {
      v = std::stod(item);
    } catch (const std::exception&) {
      throw Error("harness.levels: bad value '" + item + "'");
    }
    if (!(v > 0.0 && v <= 1.0)) throw Error("harness.levels must lie in (0, 1]");
    hc.levels.push_back(v);
  }
  if (hc.levels.empty()) throw Error("harness.levels is empty");
  c.phoneme_analysis = ToBool(s, "harness.phonemes");

  c.lambda = ToDouble(s, "reconstruction.lambda");
  if (c.lambda < 0.0) throw Error("reconstruction.lambda must be >= 0");
  c.top_count = ToPositive(s, "reconstruction.top_count");
  c.confidence_weighting = ToBool(s, "reconstruction.confidence_weighting");
  c.fit.whiten = ToBool(s, "reconstruction.whiten");
  c.fit.max_iterations = ToPositive(s, "reconstruction.max_iterations");
  c.basis_dim = ToPositive(s, "reconstruction.basis_dim", 0);
  c.fit_split = ParseSplit(s.Get("reconstruction.split"));
  if (c.fit_split == Split::kTrain) {
    throw Error("reconstruction.split must be a held-out split");
  }
  c.config_hash = s.Hash();
  return c;
}

void RunStage(const std::string& stage, const PipelineConfig& config) {
  Stage st{config, stage, {}};
  auto start = std::chrono::steady_clock::now();
  fs::create_directories(config.output_dir);
  if (stage == "synth") {
    StageSynth(st);
  } else if (stage == "compute-ams") {
    StageComputeAms(st);
  } else if (stage == "build-basis") {
    StageBuildBasis(st);
  } else if (stage == "train") {
    StageTrain(st);
  } else if (stage == "predict") {
    StagePredict(st);
  } else if (stage == "select") {
    StageSelect(st);
  } else if (stage == "fit") {
    StageFit(st);
  } else if (stage == "evaluate") {
    StageEvaluate(st);
  } else if (stage == "report") {
    StageReport(st);
  } else {
    throw Error("unknown stage '" + stage + "'");
  }
  double seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - start).count();
  WriteRunLog(st, seconds);
}

}  // namespace voxface
