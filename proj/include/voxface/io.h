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

// File formats shared by the pipeline stages.
//
//   Mesh (OBJ subset): one "v x y z" line per vertex in fixed order; other
//     lines are ignored.
//   Mesh (binary): "VFMESH01", u32 T, then T*3 little-endian f64.
//   Landmarks: "name index" per line.
//   AM definitions: "id kind landmark..." per line; kind is distance,
//     proportion or angle.
//   AM tables: CSV whose header row is "speaker" followed by AM ids.
//
// Text formats accept '#' comment lines and blank lines.

#ifndef VOXFACE_IO_H_
#define VOXFACE_IO_H_

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "voxface/geometry.h"

namespace voxface {

Mesh ReadObj(const std::filesystem::path& path);
void WriteObj(const std::filesystem::path& path, const Mesh& mesh);
Mesh ReadMeshBinary(const std::filesystem::path& path);
void WriteMeshBinary(const std::filesystem::path& path, const Mesh& mesh);
// Dispatches on extension: ".obj" or ".bin".
Mesh ReadMesh(const std::filesystem::path& path);
void WriteMesh(const std::filesystem::path& path, const Mesh& mesh);

LandmarkMap ReadLandmarks(const std::filesystem::path& path);
void WriteLandmarks(const std::filesystem::path& path, const LandmarkMap& map);

std::vector<AmDefinition> ReadAmDefinitions(const std::filesystem::path& path);
void WriteAmDefinitions(const std::filesystem::path& path,
                        const std::vector<AmDefinition>& defs);

struct AmTable {
  std::vector<std::string> am_ids;
  std::vector<std::string> speakers;
  Eigen::MatrixXd values;  // speakers x AMs

  // Row index of a speaker; throws if absent.
  int Row(const std::string& speaker) const;
};

// `header_comment`, when non-empty, is written as a leading "# ..." line.
void WriteAmTable(const std::filesystem::path& path, const AmTable& table,
                  const std::string& header_comment = {});
AmTable ReadAmTable(const std::filesystem::path& path);

// Reads the leading "# key=value key=value" comment of a text artifact;
// returns an empty string if there is none.
std::string ReadHeaderComment(const std::filesystem::path& path);

// Whole-file helpers.
std::string ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, const std::string& content);

}  // namespace voxface

#endif  // VOXFACE_IO_H_
