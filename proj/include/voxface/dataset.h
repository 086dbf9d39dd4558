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

// On-disk dataset layout shared by the generator and the pipeline stages,
// plus the split protocol.

#ifndef VOXFACE_DATASET_H_
#define VOXFACE_DATASET_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "voxface/features.h"
#include "voxface/geometry.h"

namespace voxface {

// D_t trains, D_v1 selects checkpoints, D_v2 scores predictability,
// D_e evaluates reconstruction.
enum class Split { kTrain, kSelect, kEval, kTest };
std::string_view SplitName(Split split);
Split ParseSplit(std::string_view name);

// Ground-truth record of an AM whose value drives feature channels.
struct PlantedAm {
  std::string am_id;
  double rho = 0.0;
  std::vector<int> bins;
};

struct Dataset {
  std::string name;
  LandmarkMap landmarks;
  std::vector<AmDefinition> am_definitions;
  std::vector<std::string> speakers;
  std::vector<Split> splits;
  std::vector<Mesh> meshes;
  std::vector<Eigen::MatrixXd> features;  // raw log-mel, F x bins
  // Per speaker; empty when the dataset has no audio.
  std::vector<std::vector<double>> waveforms;
  int sample_rate = kCanonicalSampleRate;
  // Per speaker; empty when no phoneme annotation exists.
  std::vector<std::vector<Segment>> phonemes;
  std::vector<PlantedAm> planted;

  int size() const { return static_cast<int>(speakers.size()); }
  std::vector<int> Indices(Split split) const;
  bool has_waveforms() const;
  bool has_phonemes() const;
  // Consistent sizes, speaker-disjoint splits, shared topology, resolvable
  // AM definitions.
  void Validate() const;
};

// Assigns splits 7/1/1/1 after a seeded shuffle. Needs >= 20 speakers.
std::vector<Split> AssignSplits(int num_speakers, uint64_t seed);

// Layout under `root`:
//   dataset.json            name, sample rate, speaker list with splits
//   landmarks.txt, am_definitions.txt, planted.csv
//   meshes/<id>.obj, features/<id>.mel, waves/<id>.wav,
//   phonemes/<id>.txt
void WriteDataset(const std::filesystem::path& root, const Dataset& dataset);
Dataset ReadDataset(const std::filesystem::path& root);

void WritePlanted(const std::filesystem::path& path,
                  const std::vector<PlantedAm>& planted);
std::vector<PlantedAm> ReadPlanted(const std::filesystem::path& path);

// AM values of every speaker (speakers x K).
Eigen::MatrixXd ComputeDatasetAms(const Dataset& dataset);

}  // namespace voxface

#endif  // VOXFACE_DATASET_H_
