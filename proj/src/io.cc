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

#include "voxface/io.h"

#include <charconv>
#include <fstream>
#include <sstream>

#include "voxface/common.h"

namespace voxface {

namespace {

constexpr std::string_view kMeshMagic = "VFMESH01";

std::ifstream OpenIn(const std::filesystem::path& path,
                     std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream OpenOut(const std::filesystem::path& path,
                      std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  return out;
}

double ParseDouble(std::string_view s, const std::filesystem::path& path,
                   int line) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError(path.string() + ":" + std::to_string(line) +
                      ": bad number '" + std::string(s) + "'");
  }
  return v;
}

bool SkipLine(std::string_view line) {
  line = Trim(line);
  return line.empty() || line.front() == '#';
}

std::string MeshTopologyId(const std::filesystem::path& path, int t) {
  (void)path;
  return "T" + std::to_string(t);
}

}  // namespace

Mesh ReadObj(const std::filesystem::path& path) {
  std::ifstream in = OpenIn(path);
  std::vector<double> coords;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto tok = SplitWhitespace(line);
    if (tok.empty() || tok[0] != "v") continue;
    if (tok.size() < 4) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": vertex line needs 3 coordinates");
    }
    for (int i = 1; i <= 3; ++i) coords.push_back(ParseDouble(tok[i], path, lineno));
  }
  Mesh mesh;
  const int t = static_cast<int>(coords.size() / 3);
  mesh.vertices = Eigen::Map<const Vertices>(coords.data(), t, 3);
  mesh.topology_id = MeshTopologyId(path, t);
  ValidateMesh(mesh);
  return mesh;
}

void WriteObj(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream out = OpenOut(path);
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    out << "v " << FormatDouble(mesh.vertices(i, 0)) << ' '
        << FormatDouble(mesh.vertices(i, 1)) << ' '
        << FormatDouble(mesh.vertices(i, 2)) << '\n';
  }
}

Mesh ReadMeshBinary(const std::filesystem::path& path) {
  std::ifstream in = OpenIn(path, std::ios::binary);
  binio::ExpectMagic(in, kMeshMagic, "binary mesh");
  const uint32_t t = binio::ReadU32(in);
  Mesh mesh;
  mesh.vertices.resize(t, 3);
  for (uint32_t i = 0; i < t; ++i) {
    for (int c = 0; c < 3; ++c) mesh.vertices(i, c) = binio::ReadF64(in);
  }
  mesh.topology_id = MeshTopologyId(path, static_cast<int>(t));
  ValidateMesh(mesh);
  return mesh;
}

void WriteMeshBinary(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream out = OpenOut(path, std::ios::binary);
  binio::WriteBytes(out, kMeshMagic);
  binio::WriteU32(out, static_cast<uint32_t>(mesh.num_vertices()));
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    for (int c = 0; c < 3; ++c) binio::WriteF64(out, mesh.vertices(i, c));
  }
}

Mesh ReadMesh(const std::filesystem::path& path) {
  if (path.extension() == ".bin") return ReadMeshBinary(path);
  return ReadObj(path);
}

void WriteMesh(const std::filesystem::path& path, const Mesh& mesh) {
  if (path.extension() == ".bin") {
    WriteMeshBinary(path, mesh);
  } else {
    WriteObj(path, mesh);
  }
}

LandmarkMap ReadLandmarks(const std::filesystem::path& path) {
  std::ifstream in = OpenIn(path);
  LandmarkMap map;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (SkipLine(line)) continue;
    auto tok = SplitWhitespace(line);
    if (tok.size() != 2) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected 'name index'");
    }
    map.Add(tok[0], static_cast<int>(ParseDouble(tok[1], path, lineno)));
  }
  return map;
}

void WriteLandmarks(const std::filesystem::path& path, const LandmarkMap& map) {
  std::ofstream out = OpenOut(path);
  for (const auto& [name, index] : map.entries()) {
    out << name << ' ' << index << '\n';
  }
}

std::vector<AmDefinition> ReadAmDefinitions(const std::filesystem::path& path) {
  std::ifstream in = OpenIn(path);
  std::vector<AmDefinition> defs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (SkipLine(line)) continue;
    auto tok = SplitWhitespace(line);
    if (tok.size() < 3) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected 'id kind landmark...'");
    }
    AmDefinition def;
    def.id = tok[0];
    def.kind = ParseAmKind(tok[1]);
    def.landmarks.assign(tok.begin() + 2, tok.end());
    defs.push_back(std::move(def));
  }
  return defs;
}

void WriteAmDefinitions(const std::filesystem::path& path,
                        const std::vector<AmDefinition>& defs) {
  std::ofstream out = OpenOut(path);
  for (const auto& d : defs) {
    out << d.id << ' ' << AmKindName(d.kind);
    for (const auto& l : d.landmarks) out << ' ' << l;
    out << '\n';
  }
}

int AmTable::Row(const std::string& speaker) const {
  for (size_t i = 0; i < speakers.size(); ++i) {
    if (speakers[i] == speaker) return static_cast<int>(i);
  }
  throw Error("speaker '" + speaker + "' not in AM table");
}

void WriteAmTable(const std::filesystem::path& path, const AmTable& table,
                  const std::string& header_comment) {
  std::ofstream out = OpenOut(path);
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  out << "speaker";
  for (const auto& id : table.am_ids) out << ',' << id;
  out << '\n';
  for (size_t i = 0; i < table.speakers.size(); ++i) {
    out << table.speakers[i];
    for (Eigen::Index k = 0; k < table.values.cols(); ++k) {
      out << ',' << FormatDouble(table.values(static_cast<Eigen::Index>(i), k));
    }
    out << '\n';
  }
}

AmTable ReadAmTable(const std::filesystem::path& path) {
  std::ifstream in = OpenIn(path);
  AmTable table;
  std::string line;
  int lineno = 0;
  std::vector<std::vector<double>> rows;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (SkipLine(line)) continue;
    auto cells = SplitChar(Trim(line), ',');
    if (!have_header) {
      if (cells.empty() || cells[0] != "speaker") {
        throw FormatError(path.string() + ": AM table must start with 'speaker'");
      }
      table.am_ids.assign(cells.begin() + 1, cells.end());
      have_header = true;
      continue;
    }
    if (cells.size() != table.am_ids.size() + 1) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": wrong number of cells");
    }
    table.speakers.push_back(cells[0]);
    std::vector<double> row;
    for (size_t k = 1; k < cells.size(); ++k) {
      row.push_back(ParseDouble(cells[k], path, lineno));
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw FormatError(path.string() + ": empty AM table");
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.am_ids.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t k = 0; k < rows[i].size(); ++k) {
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          rows[i][k];
    }
  }
  return table;
}

std::string ReadHeaderComment(const std::filesystem::path& path) {
  std::ifstream in = OpenIn(path);
  std::string line;
  if (std::getline(in, line) && line.rfind("# ", 0) == 0) {
    return line.substr(2);
  }
  return {};
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in = OpenIn(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out = OpenOut(path, std::ios::binary);
  out << content;
}

}  // namespace voxface
