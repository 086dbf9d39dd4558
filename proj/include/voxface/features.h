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

// Voice front end: PCM-16 WAV input, rational resampling, log-mel
// spectrograms, per-bin normalization and segmentation.
//
// The log-mel recipe: Hann-windowed frames (25 ms window, 10 ms hop by
// default), zero-padded to the next power of two, power spectrum, 64
// triangular HTK-mel filters spanning 0 Hz to Nyquist, natural log with the
// power floored at 1e-10.

#ifndef VOXFACE_FEATURES_H_
#define VOXFACE_FEATURES_H_

#include <complex>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace voxface {

inline constexpr int kCanonicalSampleRate = 16000;
inline constexpr int kNumMelBins = 64;

struct Waveform {
  std::vector<double> samples;  // mono, nominally in [-1, 1]
  int sample_rate = kCanonicalSampleRate;

  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// PCM-16 mono only.
Waveform ReadWav(const std::filesystem::path& path);
void WriteWav(const std::filesystem::path& path, const Waveform& wave);

// Linear-phase polyphase resampling by the rational factor out/in with a
// Kaiser-windowed sinc low-pass at the lower Nyquist frequency.
Waveform Resample(const Waveform& wave, int target_rate);

// In-place radix-2 FFT; size must be a power of two.
void Fft(std::span<std::complex<double>> data);

struct LogMelConfig {
  double window_seconds = 0.025;
  double hop_seconds = 0.010;
  int num_mel_bins = kNumMelBins;
  double low_hz = 0.0;
  double high_hz = 0.0;  // 0 means Nyquist
  double power_floor = 1e-10;
};

double HzToMel(double hz);
double MelToHz(double mel);

// Triangular filters with unit peak, centers equally spaced on the HTK mel
// scale.
class MelFilterbank {
 public:
  MelFilterbank(int num_bins, int fft_size, int sample_rate, double low_hz,
                double high_hz);

  // power has fft_size / 2 + 1 entries.
  Eigen::VectorXd Apply(std::span<const double> power) const;
  double CenterHz(int bin) const { return centers_hz_[bin]; }
  int num_bins() const { return static_cast<int>(weights_.rows()); }

 private:
  Eigen::MatrixXd weights_;  // bins x (fft_size / 2 + 1)
  std::vector<double> centers_hz_;
};

struct MelSpectrogram {
  Eigen::MatrixXd frames;  // F x bins
  double frame_hop = 0.010;
  double window = 0.025;

  int num_frames() const { return static_cast<int>(frames.rows()); }
};

struct FrameGeometry {
  int window_samples;
  int hop_samples;
  int fft_size;
};
FrameGeometry FrameGeometryFor(const LogMelConfig& config, int sample_rate);

// floor((S - W) / H) + 1 for S >= W.
int NumFrames(int num_samples, int window_samples, int hop_samples);

MelSpectrogram ComputeLogMel(const Waveform& wave,
                             const LogMelConfig& config = {});

// Per-bin mean/variance normalization, fit over every frame of a training
// corpus.
class MelNormalizer {
 public:
  MelNormalizer() = default;
  MelNormalizer(Eigen::VectorXd mean, Eigen::VectorXd stddev);

  static MelNormalizer Fit(std::span<const MelSpectrogram> corpus);
  static MelNormalizer Fit(std::span<const Eigen::MatrixXd> corpus);

  Eigen::MatrixXd Apply(const Eigen::MatrixXd& frames) const;
  Eigen::MatrixXd Invert(const Eigen::MatrixXd& frames) const;

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& stddev() const { return stddev_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd stddev_;
};

// Half-open frame span [begin, end) of a recording.
struct Segment {
  std::string recording_id;
  int begin = 0;
  int end = 0;
  std::string label;  // phoneme label for annotated segments, else empty

  int length() const { return end - begin; }
};

struct SegmentSet {
  std::vector<Segment> segments;
};

struct TrainRandom {
  int min_frames = 600;  // 6 s at a 10 ms hop
  int max_frames = 800;  // 8 s
};
struct EvalFull {};
struct Annotated {
  std::vector<Segment> spans;
};

// One random crop for TrainRandom, one whole-recording segment for EvalFull,
// the given spans for Annotated. Throws on spans outside [0, F) or when the
// recording is shorter than TrainRandom::min_frames.
SegmentSet SegmentRecording(const std::string& recording_id, int num_frames,
                            const TrainRandom& mode, std::mt19937_64& rng);
SegmentSet SegmentRecording(const std::string& recording_id, int num_frames,
                            const EvalFull& mode);
SegmentSet SegmentRecording(const std::string& recording_id, int num_frames,
                            const Annotated& mode);

// Consecutive non-overlapping spans of `chunk` frames; a trailing remainder
// shorter than `min_frames` is merged into the previous span.
std::vector<Segment> ConsecutiveSpans(const std::string& recording_id,
                                      int num_frames, int chunk,
                                      int min_frames);

Eigen::MatrixXd SliceFrames(const Eigen::MatrixXd& frames,
                            const Segment& segment);

// "VFMEL001", u32 F, u32 bins, F*bins row-major little-endian f32.
void WriteFeatureCache(const std::filesystem::path& path,
                       const Eigen::MatrixXd& frames);
Eigen::MatrixXd ReadFeatureCache(const std::filesystem::path& path);

// "begin end label" per line.
std::vector<Segment> ReadPhonemeSpans(const std::filesystem::path& path,
                                      const std::string& recording_id);
void WritePhonemeSpans(const std::filesystem::path& path,
                       std::span<const Segment> spans);

}  // namespace voxface

#endif  // VOXFACE_FEATURES_H_
