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

#include "voxface/dataset.h"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "voxface/common.h"
#include "voxface/io.h"

namespace voxface {

namespace {

constexpr int kMinSpeakers = 20;

std::filesystem::path MeshPath(const std::filesystem::path& root,
                               const std::string& id) {
  return root / "meshes" / (id + ".obj");
}
std::filesystem::path FeaturePath(const std::filesystem::path& root,
                                  const std::string& id) {
  return root / "features" / (id + ".mel");
}
std::filesystem::path WavePath(const std::filesystem::path& root,
                               const std::string& id) {
  return root / "waves" / (id + ".wav");
}
std::filesystem::path PhonemePath(const std::filesystem::path& root,
                                  const std::string& id) {
  return root / "phonemes" / (id + ".txt");
}

}  // namespace

std::string_view SplitName(Split split) {
  switch (split) {
    case Split::kTrain: return "D_t";
    case Split::kSelect: return "D_v1";
    case Split::kEval: return "D_v2";
    case Split::kTest: return "D_e";
  }
  return "?";
}

Split ParseSplit(std::string_view name) {
  for (Split s : {Split::kTrain, Split::kSelect, Split::kEval, Split::kTest}) {
    if (SplitName(s) == name) return s;
  }
  throw FormatError("unknown split '" + std::string(name) + "'");
}

std::vector<int> Dataset::Indices(Split split) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (splits[static_cast<size_t>(i)] == split) out.push_back(i);
  }
  return out;
}

bool Dataset::has_waveforms() const {
  return !waveforms.empty() &&
         std::all_of(waveforms.begin(), waveforms.end(),
                     [](const auto& w) { return !w.empty(); });
}

bool Dataset::has_phonemes() const {
  return !phonemes.empty() &&
         std::all_of(phonemes.begin(), phonemes.end(),
                     [](const auto& p) { return !p.empty(); });
}

void Dataset::Validate() const {
  const size_t n = speakers.size();
  if (splits.size() != n || meshes.size() != n || features.size() != n) {
    throw Error("dataset arrays disagree on the number of speakers");
  }
  if (!waveforms.empty() && waveforms.size() != n) {
    throw Error("dataset waveform list has the wrong length");
  }
  if (!phonemes.empty() && phonemes.size() != n) {
    throw Error("dataset phoneme list has the wrong length");
  }
  std::set<std::string> seen;
  for (const auto& s : speakers) {
    if (!seen.insert(s).second) throw Error("duplicate speaker id '" + s + "'");
  }
  if (n == 0) throw Error("dataset has no speakers");
  const int t = meshes[0].num_vertices();
  for (size_t i = 0; i < n; ++i) {
    ValidateMesh(meshes[i]);
    if (meshes[i].num_vertices() != t) {
      throw Error("speaker '" + speakers[i] + "' mesh has " +
                  std::to_string(meshes[i].num_vertices()) +
                  " vertices, expected " + std::to_string(t));
    }
    if (features[i].rows() < 1 || !features[i].allFinite()) {
      throw Error("speaker '" + speakers[i] + "' has invalid features");
    }
    if (features[i].cols() != features[0].cols()) {
      throw Error("speaker '" + speakers[i] + "' has a different mel bin count");
    }
  }
  landmarks.Validate(t);
  ResolveAll(landmarks, am_definitions);
  std::set<std::string> ids;
  for (const auto& d : am_definitions) ids.insert(d.id);
  for (const auto& p : planted) {
    if (!ids.count(p.am_id)) {
      throw Error("planted AM '" + p.am_id + "' is not in the AM definitions");
    }
  }
}

std::vector<Split> AssignSplits(int num_speakers, uint64_t seed) {
  if (num_speakers < kMinSpeakers) {
    throw Error("need at least " + std::to_string(kMinSpeakers) +
                " speakers for 7/1/1/1 splits, got " +
                std::to_string(num_speakers));
  }
  std::vector<int> order(static_cast<size_t>(num_speakers));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  const int n_select = num_speakers / 10;
  const int n_eval = num_speakers / 10;
  const int n_test = num_speakers / 10;
  const int n_train = num_speakers - n_select - n_eval - n_test;
  std::vector<Split> out(static_cast<size_t>(num_speakers));
  for (int r = 0; r < num_speakers; ++r) {
    Split s = r < n_train                      ? Split::kTrain
              : r < n_train + n_select         ? Split::kSelect
              : r < n_train + n_select + n_eval ? Split::kEval
                                                : Split::kTest;
    out[static_cast<size_t>(order[static_cast<size_t>(r)])] = s;
  }
  return out;
}

void WritePlanted(const std::filesystem::path& path,
                  const std::vector<PlantedAm>& planted) {
  std::string out = "am_id,rho,bins\n";
  for (const auto& p : planted) {
    std::string bins;
    for (size_t i = 0; i < p.bins.size(); ++i) {
      if (i) bins += ';';
      bins += std::to_string(p.bins[i]);
    }
    out += p.am_id + "," + FormatDouble(p.rho) + "," + bins + "\n";
  }
  WriteFile(path, out);
}

std::vector<PlantedAm> ReadPlanted(const std::filesystem::path& path) {
  std::istringstream in(ReadFile(path));
  std::string line;
  std::vector<PlantedAm> out;
  bool header = true;
  while (std::getline(in, line)) {
    if (Trim(line).empty() || Trim(line).front() == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    auto cells = SplitChar(line, ',');
    if (cells.size() != 3) {
      throw FormatError(path.string() + ": expected am_id,rho,bins");
    }
    PlantedAm p;
    p.am_id = std::string(Trim(cells[0]));
    p.rho = std::stod(cells[1]);
    for (const auto& b : SplitChar(cells[2], ';')) {
      if (!Trim(b).empty()) p.bins.push_back(std::stoi(b));
    }
    out.push_back(std::move(p));
  }
  return out;
}

void WriteDataset(const std::filesystem::path& root, const Dataset& dataset) {
  dataset.Validate();
  std::filesystem::create_directories(root);
  nlohmann::ordered_json j;
  j["format"] = "voxface-dataset-1";
  j["name"] = dataset.name;
  j["sample_rate"] = dataset.sample_rate;
  j["has_waveforms"] = dataset.has_waveforms();
  j["has_phonemes"] = dataset.has_phonemes();
  auto& spk = j["speakers"] = nlohmann::ordered_json::array();
  for (int i = 0; i < dataset.size(); ++i) {
    spk.push_back({{"id", dataset.speakers[static_cast<size_t>(i)]},
                   {"split", SplitName(dataset.splits[static_cast<size_t>(i)])}});
  }
  WriteFile(root / "dataset.json", j.dump(2) + "\n");
  WriteLandmarks(root / "landmarks.txt", dataset.landmarks);
  WriteAmDefinitions(root / "am_definitions.txt", dataset.am_definitions);
  WritePlanted(root / "planted.csv", dataset.planted);
  for (int i = 0; i < dataset.size(); ++i) {
    const auto u = static_cast<size_t>(i);
    const std::string& id = dataset.speakers[u];
    WriteObj(MeshPath(root, id), dataset.meshes[u]);
    WriteFeatureCache(FeaturePath(root, id), dataset.features[u]);
    if (dataset.has_waveforms()) {
      WriteWav(WavePath(root, id), Waveform{dataset.waveforms[u], dataset.sample_rate});
    }
    if (dataset.has_phonemes()) {
      WritePhonemeSpans(PhonemePath(root, id), dataset.phonemes[u]);
    }
  }
}

Dataset ReadDataset(const std::filesystem::path& root) {
  const auto manifest = root / "dataset.json";
  if (!std::filesystem::exists(manifest)) {
    throw FormatError("no dataset at '" + root.string() +
                      "' (dataset.json missing; run the synth stage)");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ReadFile(manifest));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest.string() + ": " + e.what());
  }
  Dataset ds;
  ds.name = j.value("name", "");
  ds.sample_rate = j.value("sample_rate", kCanonicalSampleRate);
  const bool waves = j.value("has_waveforms", false);
  const bool phonemes = j.value("has_phonemes", false);
  ds.landmarks = ReadLandmarks(root / "landmarks.txt");
  ds.am_definitions = ReadAmDefinitions(root / "am_definitions.txt");
  if (std::filesystem::exists(root / "planted.csv")) {
    ds.planted = ReadPlanted(root / "planted.csv");
  }
  for (const auto& s : j.at("speakers")) {
    const std::string id = s.at("id").get<std::string>();
    ds.speakers.push_back(id);
    ds.splits.push_back(ParseSplit(s.at("split").get<std::string>()));
    ds.meshes.push_back(ReadMesh(MeshPath(root, id)));
    const auto fpath = FeaturePath(root, id);
    if (std::filesystem::exists(fpath)) {
      ds.features.push_back(ReadFeatureCache(fpath));
    } else {
      Waveform w = ReadWav(WavePath(root, id));
      if (w.sample_rate != kCanonicalSampleRate) {
        w = Resample(w, kCanonicalSampleRate);
      }
      ds.features.push_back(ComputeLogMel(w).frames);
    }
    if (waves) {
      Waveform w = ReadWav(WavePath(root, id));
      ds.sample_rate = w.sample_rate;
      ds.waveforms.push_back(std::move(w.samples));
    }
    if (phonemes) ds.phonemes.push_back(ReadPhonemeSpans(PhonemePath(root, id), id));
  }
  ds.Validate();
  return ds;
}

Eigen::MatrixXd ComputeDatasetAms(const Dataset& dataset) {
  Eigen::MatrixXd out(dataset.size(),
                      static_cast<Eigen::Index>(dataset.am_definitions.size()));
  for (int i = 0; i < dataset.size(); ++i) {
    try {
      out.row(i) = ComputeAllAms(dataset.meshes[static_cast<size_t>(i)],
                                 dataset.landmarks, dataset.am_definitions)
                       .values.transpose();
    } catch (const Error& e) {
      throw Error("speaker '" + dataset.speakers[static_cast<size_t>(i)] +
                  "': " + e.what());
    }
  }
  return out;
}

}  // namespace voxface
