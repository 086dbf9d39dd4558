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

// Pipeline stages behind the command-line tool.
//
// Settings are "section.key" strings resolved with the precedence
//   built-in defaults < config file (INI) < VOXFACE_SECTION_KEY environment
//   variables < command-line overrides.
// The config hash covers every resolved setting except run.jobs and the
// paths section. Text artifacts start with "# config_hash=<hex> seed=<n>";
// binary artifacts carry the same line in a ".meta" sidecar. A stage refuses
// upstream artifacts whose hash differs from its own. Timings live only in
// the run logs under logs/, so every other artifact is byte-stable.

#ifndef VOXFACE_PIPELINE_H_
#define VOXFACE_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "voxface/common.h"
#include "voxface/reconstruction.h"
#include "voxface/stats.h"
#include "voxface/synthdata.h"
#include "voxface/training.h"

namespace voxface {

struct Setting {
  std::string key;
  std::string value;
  std::string help;
};

// Built-in defaults in documentation order.
const std::vector<Setting>& DefaultSettings();

class Settings {
 public:
  Settings();

  // Unknown keys throw.
  void Set(const std::string& key, const std::string& value);
  const std::string& Get(const std::string& key) const;
  // INI sections map to key prefixes.
  void LoadIni(const std::filesystem::path& path);
  // VOXFACE_<SECTION>_<KEY>, upper case.
  void LoadEnvironment();

  std::string Canonical() const;  // sorted "key=value" lines, hashed part
  std::string Hash() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::string EnvironmentName(const std::string& key);

struct PipelineConfig {
  std::filesystem::path output_dir;
  std::filesystem::path dataset_dir;
  std::filesystem::path am_definitions;  // empty: the dataset's own list
  uint64_t seed = 0;
  int jobs = 0;
  SynthConfig synth;
  TrainingConfig training;
  HarnessConfig harness;
  bool phoneme_analysis = true;
  FitOptions fit;
  double lambda = 1e-3;
  int top_count = 10;
  bool confidence_weighting = false;
  int basis_dim = 0;  // 0: default size
  Split fit_split = Split::kTest;
  std::string config_hash;

  // "config_hash=<hex> seed=<n>"
  std::string Provenance() const;
};

// Validates values (alpha in (0, 0.5), positive counts, known presets).
PipelineConfig BuildPipelineConfig(const Settings& settings);

inline const std::vector<std::string>& StageNames() {
  static const std::vector<std::string> names = {
      "synth", "compute-ams", "build-basis", "train", "predict",
      "select", "fit", "evaluate", "report"};
  return names;
}

// Raised when an input artifact is absent; names the stage that makes it.
class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

// Runs one stage and writes logs/<stage>.json. Throws MissingArtifactError,
// or Error on a config-hash mismatch or invalid data.
void RunStage(const std::string& stage, const PipelineConfig& config);

}  // namespace voxface

#endif  // VOXFACE_PIPELINE_H_
