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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <map>

#include "test_util.h"
#include "voxface/io.h"
#include "voxface/pipeline.h"

namespace voxface {
namespace {

namespace fs = std::filesystem;

Settings Tiny(const fs::path& out) {
  Settings s;
  s.Set("paths.output", out.string());
  s.Set("synth.speakers", "40");
  s.Set("synth.frames", "60");
  s.Set("synth.wave_seconds", "0.1");
  s.Set("synth.phonemes", "true");
  s.Set("harness.runs", "3");
  s.Set("training.iterations", "20");
  s.Set("run.jobs", "2");
  return s;
}

void RunAll(const PipelineConfig& c) {
  testing::WarningCapture quiet;
  for (const auto& stage : StageNames()) RunStage(stage, c);
}

// Relative path -> contents for every file outside logs/.
std::map<std::string, std::string> Snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::string rel = fs::relative(e.path(), root).string();
    if (rel.rfind("logs/", 0) == 0) continue;
    out[rel] = ReadFile(e.path());
  }
  return out;
}

TEST_CASE("settings precedence and validation") {
  auto dir = testing::TempDir("settings");
  Settings s;
  CHECK(s.Get("harness.runs") == "100");
  CHECK_THROWS(s.Set("harness.nope", "1"));
  CHECK_THROWS(s.Get("nope"));

  WriteFile(dir / "c.ini", "[harness]\nruns = 7\nalpha = 0.01\n[synth]\nspeakers = 50\n");
  s.LoadIni(dir / "c.ini");
  CHECK(s.Get("harness.runs") == "7");
  CHECK(s.Get("synth.speakers") == "50");

  CHECK(EnvironmentName("harness.runs") == "VOXFACE_HARNESS_RUNS");
  ::setenv("VOXFACE_HARNESS_RUNS", "9", 1);
  s.LoadEnvironment();
  ::unsetenv("VOXFACE_HARNESS_RUNS");
  CHECK(s.Get("harness.runs") == "9");
  CHECK(s.Get("harness.alpha") == "0.01");
  s.Set("harness.runs", "11");
  CHECK(s.Get("harness.runs") == "11");

  WriteFile(dir / "bad.ini", "[harness]\nbogus = 1\n");
  CHECK_THROWS(s.LoadIni(dir / "bad.ini"));

  Settings a, b;
  b.Set("run.jobs", "3");
  b.Set("paths.output", "elsewhere");
  CHECK(a.Hash() == b.Hash());
  b.Set("harness.runs", "5");
  CHECK(a.Hash() != b.Hash());

  Settings v;
  v.Set("harness.alpha", "0.7");
  CHECK_THROWS(BuildPipelineConfig(v));
  v = Settings();
  v.Set("harness.levels", "1,0");
  CHECK_THROWS(BuildPipelineConfig(v));
  v = Settings();
  v.Set("training.preset", "huge");
  CHECK_THROWS(BuildPipelineConfig(v));
  v = Settings();
  v.Set("synth.speakers", "ten");
  CHECK_THROWS(BuildPipelineConfig(v));
  v = Settings();
  v.Set("reconstruction.split", "D_t");
  CHECK_THROWS(BuildPipelineConfig(v));

  PipelineConfig full = [] {
    Settings p;
    p.Set("training.preset", "full");
    return BuildPipelineConfig(p);
  }();
  CHECK(full.training.sgd.learning_rate == 0.1);
  CHECK(full.training.batch_size == 64);
  CHECK(full.training.iterations == 5000);
  fs::remove_all(dir);
}

TEST_CASE("stages out of order name the missing producer") {
  auto dir = testing::TempDir("order");
  PipelineConfig c = BuildPipelineConfig(Tiny(dir));
  try {
    RunStage("fit", c);
    FAIL("expected a missing-artifact error");
  } catch (const MissingArtifactError& e) {
    CHECK(std::string(e.what()).find("voxface select") != std::string::npos);
  }
  try {
    RunStage("compute-ams", c);
    FAIL("expected a missing-artifact error");
  } catch (const MissingArtifactError& e) {
    CHECK(std::string(e.what()).find("voxface synth") != std::string::npos);
  }
  {
    testing::WarningCapture quiet;
    for (const char* s : {"synth", "compute-ams", "build-basis", "train", "predict"}) {
      RunStage(s, c);
    }
  }
  try {
    RunStage("fit", c);
    FAIL("expected a missing-artifact error");
  } catch (const MissingArtifactError& e) {
    CHECK(std::string(e.what()).find("voxface select") != std::string::npos);
  }
  CHECK_THROWS(RunStage("nonsense", c));
  fs::remove_all(dir);
}

TEST_CASE("full pipeline is byte-identical across runs and worker counts") {
  auto d1 = testing::TempDir("det1");
  auto d2 = testing::TempDir("det2");
  Settings s1 = Tiny(d1), s2 = Tiny(d2);
  s2.Set("run.jobs", "1");
  PipelineConfig c1 = BuildPipelineConfig(s1), c2 = BuildPipelineConfig(s2);
  CHECK(c1.config_hash == c2.config_hash);
  RunAll(c1);
  RunAll(c2);
  auto a = Snapshot(d1), b = Snapshot(d2);
  CHECK(a.size() == b.size());
  for (const auto& [name, content] : a) {
    auto it = b.find(name);
    REQUIRE_MESSAGE(it != b.end(), name);
    CHECK_MESSAGE(it->second == content, name);
  }
  for (const char* f : {"test_report.csv", "selected_ams.csv", "fits.csv", "evaluation.csv",
                        "report/summary.txt", "report/am_predictability.svg",
                        "report/error_maps.svg", "error_level_1.ply", "logs/fit.json"}) {
    CHECK_MESSAGE(fs::exists(d1 / f), f);
  }
  CHECK(ReadHeaderComment(d1 / "test_report.csv").find("config_hash=" + c1.config_hash) !=
        std::string::npos);

  // A changed upstream setting invalidates downstream stages.
  Settings changed = Tiny(d1);
  changed.Set("harness.runs", "4");
  PipelineConfig cc = BuildPipelineConfig(changed);
  CHECK_THROWS_AS(RunStage("fit", cc), Error);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

}  // namespace
}  // namespace voxface
