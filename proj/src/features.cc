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

#include "voxface/features.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "voxface/common.h"
#include "voxface/io.h"

namespace voxface {

namespace {

constexpr std::string_view kMelMagic = "VFMEL001";

uint16_t ReadU16(std::istream& in) {
  unsigned char b[2];
  if (!in.read(reinterpret_cast<char*>(b), 2)) {
    throw FormatError("truncated WAV file");
  }
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

void WriteU16(std::ostream& out, uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

int NextPowerOfTwo(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

Waveform ReadWav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  binio::ExpectMagic(in, "RIFF", "WAV");
  binio::ReadU32(in);
  binio::ExpectMagic(in, "WAVE", "WAV");
  Waveform wave;
  bool have_fmt = false;
  while (in.peek() != std::char_traits<char>::eof()) {
    const std::string id = binio::ReadBytes(in, 4);
    const uint32_t size = binio::ReadU32(in);
    if (id == "fmt ") {
      const uint16_t format = ReadU16(in);
      const uint16_t channels = ReadU16(in);
      wave.sample_rate = static_cast<int>(binio::ReadU32(in));
      binio::ReadU32(in);  // byte rate
      ReadU16(in);         // block align
      const uint16_t bits = ReadU16(in);
      if (format != 1 || channels != 1 || bits != 16) {
        throw FormatError(path.string() + ": only PCM-16 mono WAV is supported");
      }
      if (wave.sample_rate <= 0) throw FormatError("WAV sample rate must be > 0");
      in.ignore(size - 16 + (size & 1));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError(path.string() + ": data before fmt");
      wave.samples.resize(size / 2);
      for (auto& s : wave.samples) {
        s = static_cast<int16_t>(ReadU16(in)) / 32768.0;
      }
      return wave;
    } else {
      in.ignore(size + (size & 1));
    }
  }
  throw FormatError(path.string() + ": no data chunk");
}

void WriteWav(const std::filesystem::path& path, const Waveform& wave) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  const uint32_t data_bytes = static_cast<uint32_t>(wave.samples.size() * 2);
  binio::WriteBytes(out, "RIFF");
  binio::WriteU32(out, 36 + data_bytes);
  binio::WriteBytes(out, "WAVEfmt ");
  binio::WriteU32(out, 16);
  WriteU16(out, 1);
  WriteU16(out, 1);
  binio::WriteU32(out, static_cast<uint32_t>(wave.sample_rate));
  binio::WriteU32(out, static_cast<uint32_t>(wave.sample_rate) * 2);
  WriteU16(out, 2);
  WriteU16(out, 16);
  binio::WriteBytes(out, "data");
  binio::WriteU32(out, data_bytes);
  for (double s : wave.samples) {
    const double clamped = std::clamp(s, -1.0, 32767.0 / 32768.0);
    WriteU16(out, static_cast<uint16_t>(
                      static_cast<int16_t>(std::lround(clamped * 32768.0))));
  }
}

Waveform Resample(const Waveform& wave, int target_rate) {
  if (target_rate <= 0 || wave.sample_rate <= 0) {
    throw Error("sample rates must be positive");
  }
  if (target_rate == wave.sample_rate) return wave;
  const int g = std::gcd(wave.sample_rate, target_rate);
  const long up = target_rate / g;
  const long down = wave.sample_rate / g;
  // Filter designed at the upsampled rate; cutoff at the lower Nyquist.
  const double cutoff =
      0.5 * std::min(1.0, static_cast<double>(up) / down) / up;  // cycles/sample
  constexpr int kZeroCrossings = 16;
  constexpr double kKaiserBeta = 8.0;
  const long half = static_cast<long>(std::ceil(kZeroCrossings / (2.0 * cutoff)));
  std::vector<double> taps(static_cast<size_t>(2 * half + 1));
  const double norm = std::cyl_bessel_i(0.0, kKaiserBeta);
  for (long j = -half; j <= half; ++j) {
    const double x = 2.0 * cutoff * j;
    const double sinc =
        j == 0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
    const double r = static_cast<double>(j) / half;
    const double kaiser =
        std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(std::max(0.0, 1 - r * r))) /
        norm;
    taps[static_cast<size_t>(j + half)] = 2.0 * cutoff * sinc * kaiser * up;
  }
  const long n_in = static_cast<long>(wave.samples.size());
  const long n_out = (n_in * up) / down;
  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<size_t>(n_out));
  for (long n = 0; n < n_out; ++n) {
    const long pos = n * down;
    const long lo = std::max(0L, (pos - half + up - 1) / up);
    const long hi = std::min(n_in - 1, (pos + half) / up);
    double acc = 0.0;
    for (long i = lo; i <= hi; ++i) {
      acc += wave.samples[static_cast<size_t>(i)] *
             taps[static_cast<size_t>(pos - i * up + half)];
    }
    out.samples[static_cast<size_t>(n)] = acc;
  }
  return out;
}

void Fft(std::span<std::complex<double>> data) {
  const size_t n = data.size();
  if (n == 0 || (n & (n - 1)) != 0) throw Error("FFT size must be a power of 2");
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (size_t i = 0; i < n; i += len) {
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w = std::polar(1.0, ang * static_cast<double>(k));
        const std::complex<double> a = data[i + k];
        const std::complex<double> b = data[i + k + len / 2] * w;
        data[i + k] = a + b;
        data[i + k + len / 2] = a - b;
      }
    }
  }
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelFilterbank::MelFilterbank(int num_bins, int fft_size, int sample_rate,
                             double low_hz, double high_hz) {
  if (num_bins <= 0 || fft_size <= 0 || sample_rate <= 0) {
    throw Error("invalid mel filterbank parameters");
  }
  if (high_hz <= 0.0) high_hz = sample_rate / 2.0;
  const int n_freq = fft_size / 2 + 1;
  const double mel_lo = HzToMel(low_hz);
  const double mel_hi = HzToMel(high_hz);
  std::vector<double> edges(static_cast<size_t>(num_bins + 2));
  for (int i = 0; i < num_bins + 2; ++i) {
    edges[i] = MelToHz(mel_lo + (mel_hi - mel_lo) * i / (num_bins + 1));
  }
  weights_ = Eigen::MatrixXd::Zero(num_bins, n_freq);
  centers_hz_.resize(static_cast<size_t>(num_bins));
  for (int b = 0; b < num_bins; ++b) {
    const double left = edges[b], center = edges[b + 1], right = edges[b + 2];
    centers_hz_[b] = center;
    for (int f = 0; f < n_freq; ++f) {
      const double hz = static_cast<double>(f) * sample_rate / fft_size;
      double w = 0.0;
      if (hz > left && hz <= center) {
        w = (hz - left) / (center - left);
      } else if (hz > center && hz < right) {
        w = (right - hz) / (right - center);
      }
      weights_(b, f) = w;
    }
  }
}

Eigen::VectorXd MelFilterbank::Apply(std::span<const double> power) const {
  if (static_cast<Eigen::Index>(power.size()) != weights_.cols()) {
    throw Error("power spectrum size does not match filterbank");
  }
  return weights_ *
         Eigen::Map<const Eigen::VectorXd>(power.data(), weights_.cols());
}

FrameGeometry FrameGeometryFor(const LogMelConfig& config, int sample_rate) {
  FrameGeometry g;
  g.window_samples =
      static_cast<int>(std::lround(config.window_seconds * sample_rate));
  g.hop_samples = static_cast<int>(std::lround(config.hop_seconds * sample_rate));
  if (g.window_samples <= 0 || g.hop_samples <= 0) {
    throw Error("window and hop must be at least one sample");
  }
  g.fft_size = NextPowerOfTwo(g.window_samples);
  return g;
}

int NumFrames(int num_samples, int window_samples, int hop_samples) {
  if (num_samples < window_samples) return 0;
  return (num_samples - window_samples) / hop_samples + 1;
}

MelSpectrogram ComputeLogMel(const Waveform& wave, const LogMelConfig& config) {
  if (wave.sample_rate <= 0) throw Error("sample rate must be > 0");
  for (double s : wave.samples) {
    if (!std::isfinite(s)) throw Error("waveform has non-finite samples");
  }
  const FrameGeometry g = FrameGeometryFor(config, wave.sample_rate);
  const int n_frames = NumFrames(static_cast<int>(wave.samples.size()),
                                 g.window_samples, g.hop_samples);
  if (n_frames < 1) {
    throw Error("waveform shorter than one analysis window");
  }
  MelFilterbank bank(config.num_mel_bins, g.fft_size, wave.sample_rate,
                     config.low_hz, config.high_hz);
  std::vector<double> hann(static_cast<size_t>(g.window_samples));
  for (int i = 0; i < g.window_samples; ++i) {
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / g.window_samples);
  }
  MelSpectrogram out;
  out.frame_hop = static_cast<double>(g.hop_samples) / wave.sample_rate;
  out.window = static_cast<double>(g.window_samples) / wave.sample_rate;
  out.frames.resize(n_frames, config.num_mel_bins);
  std::vector<std::complex<double>> buf(static_cast<size_t>(g.fft_size));
  std::vector<double> power(static_cast<size_t>(g.fft_size / 2 + 1));
  for (int f = 0; f < n_frames; ++f) {
    std::fill(buf.begin(), buf.end(), std::complex<double>());
    const size_t start = static_cast<size_t>(f) * g.hop_samples;
    for (int i = 0; i < g.window_samples; ++i) {
      buf[i] = wave.samples[start + i] * hann[i];
    }
    Fft(buf);
    for (size_t k = 0; k < power.size(); ++k) power[k] = std::norm(buf[k]);
    const Eigen::VectorXd mel = bank.Apply(power);
    for (int b = 0; b < config.num_mel_bins; ++b) {
      out.frames(f, b) = std::log(std::max(mel[b], config.power_floor));
    }
  }
  return out;
}

MelNormalizer::MelNormalizer(Eigen::VectorXd mean, Eigen::VectorXd stddev)
    : mean_(std::move(mean)), stddev_(std::move(stddev)) {}

MelNormalizer MelNormalizer::Fit(std::span<const MelSpectrogram> corpus) {
  std::vector<Eigen::MatrixXd> frames;
  frames.reserve(corpus.size());
  for (const auto& s : corpus) frames.push_back(s.frames);
  return Fit(std::span<const Eigen::MatrixXd>(frames));
}

MelNormalizer MelNormalizer::Fit(std::span<const Eigen::MatrixXd> corpus) {
  if (corpus.empty()) throw Error("mel normalization needs a training corpus");
  const Eigen::Index bins = corpus[0].cols();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(bins);
  double count = 0.0;
  for (const auto& m : corpus) {
    if (m.cols() != bins) throw Error("spectrograms differ in bin count");
    sum += m.colwise().sum().transpose();
    count += static_cast<double>(m.rows());
  }
  if (count < 2) throw Error("mel normalization needs at least 2 frames");
  const Eigen::VectorXd mean = sum / count;
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(bins);
  for (const auto& m : corpus) {
    sq += (m.rowwise() - mean.transpose()).array().square().matrix()
              .colwise().sum().transpose();
  }
  Eigen::VectorXd stddev(bins);
  for (Eigen::Index b = 0; b < bins; ++b) {
    const double var = sq[b] / count;
    if (!(var > 0.0)) {
      throw Error("mel bin " + std::to_string(b) +
                  " has zero variance on the training corpus");
    }
    stddev[b] = std::sqrt(var);
  }
  return MelNormalizer(mean, stddev);
}

Eigen::MatrixXd MelNormalizer::Apply(const Eigen::MatrixXd& frames) const {
  if (frames.cols() != mean_.size()) throw Error("mel bin count mismatch");
  return ((frames.rowwise() - mean_.transpose()).array().rowwise() /
          stddev_.transpose().array())
      .matrix();
}

Eigen::MatrixXd MelNormalizer::Invert(const Eigen::MatrixXd& frames) const {
  if (frames.cols() != mean_.size()) throw Error("mel bin count mismatch");
  return (frames.array().rowwise() * stddev_.transpose().array())
             .matrix()
             .rowwise() +
         mean_.transpose();
}

SegmentSet SegmentRecording(const std::string& recording_id, int num_frames,
                            const TrainRandom& mode, std::mt19937_64& rng) {
  if (mode.min_frames < 1 || mode.max_frames < mode.min_frames) {
    throw Error("invalid training segment length range");
  }
  if (num_frames < mode.min_frames) {
    throw Error("recording '" + recording_id + "' has " +
                std::to_string(num_frames) +
                " frames, shorter than the minimum training segment of " +
                std::to_string(mode.min_frames));
  }
  const int max_len = std::min(mode.max_frames, num_frames);
  std::uniform_int_distribution<int> len_dist(mode.min_frames, max_len);
  const int len = len_dist(rng);
  std::uniform_int_distribution<int> off_dist(0, num_frames - len);
  const int begin = off_dist(rng);
  return SegmentSet{{Segment{recording_id, begin, begin + len, {}}}};
}

SegmentSet SegmentRecording(const std::string& recording_id, int num_frames,
                            const EvalFull&) {
  if (num_frames < 1) throw Error("empty recording '" + recording_id + "'");
  return SegmentSet{{Segment{recording_id, 0, num_frames, {}}}};
}

SegmentSet SegmentRecording(const std::string& recording_id, int num_frames,
                            const Annotated& mode) {
  SegmentSet out;
  for (const auto& span : mode.spans) {
    if (span.begin < 0 || span.end > num_frames || span.begin >= span.end) {
      throw Error("annotated span [" + std::to_string(span.begin) + ", " +
                  std::to_string(span.end) + ") outside recording '" +
                  recording_id + "' of " + std::to_string(num_frames) +
                  " frames");
    }
    Segment s = span;
    s.recording_id = recording_id;
    out.segments.push_back(std::move(s));
  }
  return out;
}

std::vector<Segment> ConsecutiveSpans(const std::string& recording_id,
                                      int num_frames, int chunk,
                                      int min_frames) {
  if (chunk < 1) throw Error("chunk length must be positive");
  std::vector<Segment> out;
  for (int b = 0; b < num_frames; b += chunk) {
    const int e = std::min(num_frames, b + chunk);
    if (e - b < min_frames && !out.empty()) {
      out.back().end = e;
    } else {
      out.push_back(Segment{recording_id, b, e, {}});
    }
  }
  return out;
}

Eigen::MatrixXd SliceFrames(const Eigen::MatrixXd& frames,
                            const Segment& segment) {
  if (segment.begin < 0 || segment.end > frames.rows() ||
      segment.begin >= segment.end) {
    throw Error("segment outside spectrogram");
  }
  return frames.middleRows(segment.begin, segment.length());
}

void WriteFeatureCache(const std::filesystem::path& path,
                       const Eigen::MatrixXd& frames) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  binio::WriteBytes(out, kMelMagic);
  binio::WriteU32(out, static_cast<uint32_t>(frames.rows()));
  binio::WriteU32(out, static_cast<uint32_t>(frames.cols()));
  for (Eigen::Index f = 0; f < frames.rows(); ++f) {
    for (Eigen::Index b = 0; b < frames.cols(); ++b) {
      binio::WriteF32(out, static_cast<float>(frames(f, b)));
    }
  }
}

Eigen::MatrixXd ReadFeatureCache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  binio::ExpectMagic(in, kMelMagic, "feature cache");
  const uint32_t rows = binio::ReadU32(in);
  const uint32_t cols = binio::ReadU32(in);
  Eigen::MatrixXd frames(rows, cols);
  for (uint32_t f = 0; f < rows; ++f) {
    for (uint32_t b = 0; b < cols; ++b) frames(f, b) = binio::ReadF32(in);
  }
  return frames;
}

std::vector<Segment> ReadPhonemeSpans(const std::filesystem::path& path,
                                      const std::string& recording_id) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::vector<Segment> out;
  std::string line;
  while (std::getline(in, line)) {
    auto tok = SplitWhitespace(line);
    if (tok.empty() || tok[0][0] == '#') continue;
    if (tok.size() != 3) {
      throw FormatError(path.string() + ": expected 'begin end label'");
    }
    out.push_back(Segment{recording_id, std::stoi(tok[0]), std::stoi(tok[1]),
                          tok[2]});
  }
  return out;
}

void WritePhonemeSpans(const std::filesystem::path& path,
                       std::span<const Segment> spans) {
  std::string text;
  for (const auto& s : spans) {
    text += std::to_string(s.begin) + ' ' + std::to_string(s.end) + ' ' +
            s.label + '\n';
  }
  WriteFile(path, text);
}

}  // namespace voxface
