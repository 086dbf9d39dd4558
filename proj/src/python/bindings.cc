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

// Python module voxface._core.

#include <map>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "voxface/common.h"
#include "voxface/dataset.h"
#include "voxface/estimator.h"
#include "voxface/features.h"
#include "voxface/geometry.h"
#include "voxface/io.h"
#include "voxface/pipeline.h"
#include "voxface/reconstruction.h"
#include "voxface/shapespace.h"
#include "voxface/stats.h"
#include "voxface/synthdata.h"

namespace py = pybind11;

namespace voxface {
namespace {

Mesh ToMesh(const Vertices& v) {
  Mesh m;
  m.vertices = v;
  return m;
}

LandmarkMap ToLandmarks(const std::map<std::string, int>& entries) {
  LandmarkMap lm;
  for (const auto& [name, index] : entries) lm.Add(name, index);
  return lm;
}

AmDefinition ToDefinition(const std::string& id, const std::string& kind,
                          const std::vector<std::string>& landmarks) {
  return AmDefinition{id, ParseAmKind(kind), landmarks};
}

}  // namespace
}  // namespace voxface

PYBIND11_MODULE(_core, m) {
  using namespace voxface;
  m.doc() = "Voice-to-face anthropometric estimation core";
  m.attr("__version__") = VOXFACE_VERSION;

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DegenerateMeasurementError>(m, "DegenerateMeasurementError",
                                                     PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);

  py::class_<AmDefinition>(m, "AmDefinition")
      .def(py::init(&ToDefinition), py::arg("id"), py::arg("kind"), py::arg("landmarks"))
      .def_readonly("id", &AmDefinition::id)
      .def_property_readonly("kind",
                             [](const AmDefinition& d) { return std::string(AmKindName(d.kind)); })
      .def_readonly("landmarks", &AmDefinition::landmarks)
      .def("__repr__", [](const AmDefinition& d) {
        return "AmDefinition('" + d.id + "', '" + std::string(AmKindName(d.kind)) + "')";
      });

  m.def(
      "compute_am",
      [](const Vertices& v, const std::map<std::string, int>& lm, const AmDefinition& def) {
        return ComputeAm(ToMesh(v), ToLandmarks(lm), def);
      },
      py::arg("vertices"), py::arg("landmarks"), py::arg("definition"),
      "AM value of a T x 3 vertex array (mm, angles in degrees).");
  m.def(
      "compute_am_gradient",
      [](const Vertices& v, const std::map<std::string, int>& lm, const AmDefinition& def) {
        Vertices g = Vertices::Zero(v.rows(), 3);
        for (const auto& e : ComputeAmGradient(ToMesh(v), ToLandmarks(lm), def)) {
          g.row(e.vertex) += e.d.transpose();
        }
        return g;
      },
      py::arg("vertices"), py::arg("landmarks"), py::arg("definition"),
      "Dense T x 3 gradient of one AM.");
  m.def(
      "compute_all_ams",
      [](const Vertices& v, const std::map<std::string, int>& lm,
         const std::vector<AmDefinition>& defs) {
        return ComputeAllAms(ToMesh(v), ToLandmarks(lm), defs).values;
      },
      py::arg("vertices"), py::arg("landmarks"), py::arg("definitions"));
  m.def("default_am_definitions", &DefaultAmDefinitions);

  py::class_<ShapeBasis>(m, "ShapeBasis")
      .def_readonly("mean_shape", &ShapeBasis::mean_shape)
      .def_readonly("components", &ShapeBasis::components)
      .def_readonly("eigenvalues", &ShapeBasis::eigenvalues)
      .def_property_readonly("dim", &ShapeBasis::dim)
      .def("project", &ShapeBasis::Project, py::arg("flat"))
      .def("reconstruct", &ShapeBasis::Reconstruct, py::arg("beta"));
  m.def(
      "build_basis",
      [](const std::vector<Vertices>& meshes, int d) {
        std::vector<Mesh> ms;
        for (const auto& v : meshes) ms.push_back(ToMesh(v));
        return BuildBasis(ms, d);
      },
      py::arg("meshes"), py::arg("dim"));
  m.def(
      "flatten", [](const Vertices& v) { return Flatten(ToMesh(v)); }, py::arg("vertices"));

  m.def(
      "log_mel",
      [](const std::vector<double>& samples, int sample_rate) {
        Waveform w;
        w.samples = samples;
        w.sample_rate = sample_rate;
        return ComputeLogMel(w).frames;
      },
      py::arg("samples"), py::arg("sample_rate") = kCanonicalSampleRate,
      "64-bin log-mel spectrogram (frames x bins).");

  m.def("loss_plain", &LossPlain, py::arg("mean"), py::arg("target"));
  m.def("loss_uncertainty", &LossUncertainty, py::arg("mean"), py::arg("variance"),
        py::arg("target"));
  m.def(
      "aggregate",
      [](const Eigen::MatrixXd& means, const Eigen::MatrixXd& variances) {
        AggregatedPrediction a = Aggregate(means, variances);
        py::dict d;
        d["mean"] = a.mean;
        d["variance"] = a.variance;
        d["calibrated"] = a.calibrated;
        d["num_segments"] = a.num_segments;
        return d;
      },
      py::arg("means"), py::arg("variances"),
      "Inverse-variance fusion of segment predictions (rows) per AM (columns).");

  m.def("student_quantile", &StudentQuantile, py::arg("p"), py::arg("dof"));
  m.def(
      "ci_upper", [](const std::vector<double>& r, double alpha) { return CiUpper(r, alpha); },
      py::arg("ratios"), py::arg("alpha") = 0.05);

  m.def(
      "fit_shape",
      [](const ShapeBasis& basis, const std::map<std::string, int>& lm,
         const std::vector<AmDefinition>& defs, const Eigen::VectorXd& targets,
         const Eigen::VectorXd& weights, double lambda) {
        ReconstructionProblem p{ResolveAll(ToLandmarks(lm), defs), targets, weights, lambda};
        FitResult r = Fit(basis, p);
        py::dict d;
        d["beta"] = r.beta;
        d["vertices"] = r.mesh.vertices;
        d["objective"] = r.objective();
        d["iterations"] = r.iterations;
        d["converged"] = r.converged;
        return d;
      },
      py::arg("basis"), py::arg("landmarks"), py::arg("definitions"), py::arg("targets"),
      py::arg("weights"), py::arg("lambda_") = 1e-3,
      "Eigenface coefficients whose mesh matches the target AMs.");

  m.def(
      "generate_synthetic",
      [](int speakers, uint64_t seed) {
        SynthConfig c;
        c.num_speakers = speakers;
        c.wave_seconds = 0.0;
        c.seed = seed;
        SynthResult r = Generate(c);
        py::dict d;
        std::vector<Vertices> meshes;
        for (const auto& mesh : r.dataset.meshes) meshes.push_back(mesh.vertices);
        d["speakers"] = r.dataset.speakers;
        d["meshes"] = meshes;
        d["features"] = r.dataset.features;
        d["landmarks"] = r.dataset.landmarks.entries();
        d["am_definitions"] = r.dataset.am_definitions;
        d["ams"] = ComputeDatasetAms(r.dataset);
        std::vector<std::string> splits, planted;
        for (Split s : r.dataset.splits) splits.emplace_back(SplitName(s));
        for (const auto& p : r.dataset.planted) planted.push_back(p.am_id);
        d["splits"] = splits;
        d["planted"] = planted;
        return d;
      },
      py::arg("speakers") = 400, py::arg("seed") = 0,
      "Synthetic faces and voice features with planted AM dependence.");

  m.def("stage_names", &StageNames);
  m.def(
      "run_stage",
      [](const std::string& stage, const std::map<std::string, std::string>& settings) {
        Settings s;
        for (const auto& [k, v] : settings) s.Set(k, v);
        py::gil_scoped_release release;
        RunStage(stage, BuildPipelineConfig(s));
      },
      py::arg("stage"), py::arg("settings"),
      "Runs one pipeline stage with 'section.key' settings.");
}
