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

#include <random>

#include "test_util.h"
#include "voxface/dataset.h"
#include "voxface/io.h"
#include "voxface/synthdata.h"
#include "voxface/training.h"

namespace voxface {
namespace {

using testing::TempDir;

TEST_CASE("mesh files round-trip") {
  auto dir = TempDir("io_mesh");
  std::mt19937_64 rng(1);
  Mesh m = testing::RandomMesh(17, rng);
  WriteMesh(dir / "m.obj", m);
  WriteMesh(dir / "m.bin", m);
  CHECK(ReadMesh(dir / "m.obj").vertices == m.vertices);
  CHECK(ReadMesh(dir / "m.bin").vertices == m.vertices);
  CHECK(ReadMesh(dir / "m.obj").topology_id == ReadMesh(dir / "m.bin").topology_id);
  WriteFile(dir / "f.obj", "# comment\nv 1 2 3\n\nvn 0 0 1\nv 4 5 6\nf 1 2 1\n");
  Mesh f = ReadObj(dir / "f.obj");
  REQUIRE(f.num_vertices() == 2);
  CHECK(f.vertices(1, 2) == 6);
  WriteFile(dir / "bad.obj", "v 1 2\n");
  CHECK_THROWS_AS(ReadObj(dir / "bad.obj"), FormatError);
  CHECK_THROWS_AS(ReadMesh(dir / "missing.obj"), FormatError);
  CHECK_THROWS(ReadMesh(dir / "m.ply"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("landmarks, definitions and AM tables round-trip") {
  auto dir = TempDir("io_text");
  LandmarkMap lm;
  lm.Add("nose_tip", 3);
  lm.Add("chin", 9);
  WriteLandmarks(dir / "l.txt", lm);
  LandmarkMap back = ReadLandmarks(dir / "l.txt");
  CHECK(back.Index("chin") == 9);
  CHECK(back.size() == 2);

  std::vector<AmDefinition> defs = {{"a", AmKind::kDistance, {"nose_tip", "chin"}},
                                    {"b", AmKind::kAngle, {"x", "y", "z"}}};
  WriteAmDefinitions(dir / "d.txt", defs);
  auto dback = ReadAmDefinitions(dir / "d.txt");
  REQUIRE(dback.size() == 2);
  CHECK(dback[1].kind == AmKind::kAngle);
  CHECK(dback[1].landmarks == defs[1].landmarks);
  WriteFile(dir / "bad.txt", "a cube x y\n");
  CHECK_THROWS_AS(ReadAmDefinitions(dir / "bad.txt"), FormatError);

  AmTable t;
  t.am_ids = {"a", "b"};
  t.speakers = {"s1", "s2"};
  t.values.resize(2, 2);
  t.values << 1.25, 0.1, -3, 1e-17;
  WriteAmTable(dir / "t.csv", t, "config_hash=abc seed=1");
  AmTable tb = ReadAmTable(dir / "t.csv");
  CHECK(tb.values == t.values);
  CHECK(tb.Row("s2") == 1);
  CHECK_THROWS(tb.Row("s3"));
  CHECK(ReadHeaderComment(dir / "t.csv") == "config_hash=abc seed=1");
  std::filesystem::remove_all(dir);
}

TEST_CASE("datasets round-trip through the on-disk layout") {
  auto dir = TempDir("io_dataset");
  SynthConfig c = testing::SmallSynth(3, 30);
  c.wave_seconds = 0.05;
  c.phonemes = DefaultPhonemeInventory();
  Dataset d = Generate(c).dataset;
  WriteDataset(dir, d);
  Dataset r = ReadDataset(dir);
  CHECK(r.speakers == d.speakers);
  CHECK(r.splits == d.splits);
  CHECK(r.am_definitions.size() == d.am_definitions.size());
  CHECK(r.planted.size() == d.planted.size());
  CHECK(r.planted[0].bins == d.planted[0].bins);
  for (int s = 0; s < d.size(); ++s) {
    CHECK(r.meshes[s].vertices == d.meshes[s].vertices);
    CHECK((r.features[s] - d.features[s]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.waveforms[s] == d.waveforms[s]);
    REQUIRE(r.phonemes[s].size() == d.phonemes[s].size());
    CHECK(r.phonemes[s][0].label == d.phonemes[s][0].label);
  }
  CHECK(ComputeDatasetAms(r) == ComputeDatasetAms(d));
  std::filesystem::remove_all(dir);
}

TEST_CASE("split assignment") {
  auto s = AssignSplits(100, 4);
  int counts[4] = {0, 0, 0, 0};
  for (Split x : s) ++counts[static_cast<int>(x)];
  CHECK(counts[0] == 70);
  CHECK(counts[1] == 10);
  CHECK(counts[2] == 10);
  CHECK(counts[3] == 10);
  CHECK(AssignSplits(100, 4) == s);
  CHECK_THROWS(AssignSplits(19, 4));
  CHECK(ParseSplit(SplitName(Split::kEval)) == Split::kEval);
  CHECK_THROWS(ParseSplit("D_x"));
}

TEST_CASE("checkpoints round-trip") {
  auto dir = TempDir("io_ckpt");
  Checkpoint c;
  c.model = EstimatorModel(5);
  c.model.Initialize(9);
  Eigen::MatrixXd train = Eigen::MatrixXd::Random(10, 5);
  c.am_normalization = AmNormalization::Fit(train, {"a", "b", "c", "d", "e"});
  c.mel_normalizer = MelNormalizer(Eigen::VectorXd::Ones(64), Eigen::VectorXd::Constant(64, 2));
  c.provenance = "config_hash=1 seed=2";
  WriteCheckpoint(dir / "m.ckpt", c);
  Checkpoint r = ReadCheckpoint(dir / "m.ckpt");
  CHECK(std::vector<double>(r.model.params().begin(), r.model.params().end()) ==
        std::vector<double>(c.model.params().begin(), c.model.params().end()));
  CHECK(r.model.num_ams() == 5);
  CHECK(r.am_normalization.mean() == c.am_normalization.mean());
  CHECK(r.mel_normalizer.stddev() == c.mel_normalizer.stddev());
  CHECK(r.provenance == c.provenance);
  WriteFile(dir / "bad.ckpt", "VFCKPT01");
  CHECK_THROWS_AS(ReadCheckpoint(dir / "bad.ckpt"), FormatError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace voxface
