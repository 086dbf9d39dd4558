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

#ifndef VOXFACE_COMMON_H_
#define VOXFACE_COMMON_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace voxface {

// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A measurement is undefined for the given geometry (coincident points,
// collinear angle arms).
class DegenerateMeasurementError : public Error {
 public:
  using Error::Error;
};

// An input file is missing or malformed.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Warnings are routed through a process-wide sink; the default writes to
// stderr. Tests install a capturing sink.
using WarningSink = std::function<void(std::string_view)>;
void SetWarningSink(WarningSink sink);
void Warn(std::string_view message);

// SplitMix64 step; used to derive independent per-run and per-speaker seeds
// from a master seed and a counter.
uint64_t SplitMix64(uint64_t x);
uint64_t DeriveSeed(uint64_t master, uint64_t stream, uint64_t counter);

// Stable 64-bit FNV-1a hash, independent of the standard library.
uint64_t Fnv1a64(std::string_view bytes, uint64_t seed = 0xcbf29ce484222325ull);
std::string HexDigest(uint64_t value);

// Little-endian binary helpers. Readers throw FormatError on short reads.
namespace binio {
void WriteU32(std::ostream& out, uint32_t v);
void WriteU64(std::ostream& out, uint64_t v);
void WriteF64(std::ostream& out, double v);
void WriteF32(std::ostream& out, float v);
void WriteBytes(std::ostream& out, std::string_view bytes);
uint32_t ReadU32(std::istream& in);
uint64_t ReadU64(std::istream& in);
double ReadF64(std::istream& in);
float ReadF32(std::istream& in);
std::string ReadBytes(std::istream& in, size_t n);
void ExpectMagic(std::istream& in, std::string_view magic, std::string_view what);
}  // namespace binio

// Splits on ASCII whitespace.
std::vector<std::string> SplitWhitespace(std::string_view line);
std::vector<std::string> SplitChar(std::string_view line, char sep);
std::string_view Trim(std::string_view s);

// Shortest round-trip text for a double ("%.17g"), used by every CSV writer
// so outputs are byte-stable.
std::string FormatDouble(double v);

// Runs fn(i) for i in [0, n) on up to `jobs` threads (0 = hardware
// concurrency). The first exception thrown is rethrown after all workers
// finish.
void ParallelFor(int n, int jobs, const std::function<void(int)>& fn);
int ResolveJobs(int jobs);

}  // namespace voxface

#endif  // VOXFACE_COMMON_H_
