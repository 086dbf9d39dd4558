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

#ifndef VOXFACE_TESTS_TEST_UTIL_H_
#define VOXFACE_TESTS_TEST_UTIL_H_

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Core>

#include "voxface/common.h"
#include "voxface/experiment.h"
#include "voxface/geometry.h"
#include "voxface/synthdata.h"

namespace voxface::testing {

// Collects warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture() {
    SetWarningSink([this](std::string_view m) { messages.emplace_back(m); });
  }
  ~WarningCapture() { SetWarningSink(nullptr); }
  std::vector<std::string> messages;
};

inline Mesh RandomMesh(int t, std::mt19937_64& rng, double scale = 10.0) {
  std::normal_distribution<double> g(0.0, scale);
  Mesh m;
  m.vertices.resize(t, 3);
  for (int i = 0; i < t; ++i)
    for (int c = 0; c < 3; ++c) m.vertices(i, c) = g(rng);
  return m;
}

inline double RelErr(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path TempDir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() /
           ("voxface_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Small synthetic experiment for training-level checks.
inline SynthConfig SmallSynth(uint64_t seed, int speakers = 120) {
  SynthConfig c;
  c.num_speakers = speakers;
  c.num_vertices = 500;
  c.num_frames = 60;
  c.wave_seconds = 0.0;
  c.seed = seed;
  return c;
}

inline ExperimentData SmallExperiment(uint64_t seed, int speakers = 120) {
  SynthResult r = Generate(SmallSynth(seed, speakers));
  return PrepareExperiment(r.dataset, ComputeDatasetAms(r.dataset));
}

}  // namespace voxface::testing

#endif  // VOXFACE_TESTS_TEST_UTIL_H_
