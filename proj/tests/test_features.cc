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

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "test_util.h"
#include "voxface/features.h"

namespace voxface {
namespace {

using testing::TempDir;

Waveform Sine(double hz, double amp, double seconds, int rate = 16000) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(static_cast<size_t>(seconds * rate));
  for (size_t i = 0; i < w.samples.size(); ++i) {
    w.samples[i] = amp * std::sin(2 * std::numbers::pi * hz * i / rate);
  }
  return w;
}

Waveform Noise(double seconds, uint64_t seed, double amp = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, amp);
  Waveform w;
  w.samples.resize(static_cast<size_t>(seconds * 16000));
  for (double& s : w.samples) s = g(rng);
  return w;
}

TEST_CASE("framing arithmetic") {
  MelSpectrogram m = ComputeLogMel(Noise(1.0, 1));
  CHECK(m.num_frames() == 98);
  CHECK(m.frames.cols() == 64);
  CHECK(m.frame_hop == doctest::Approx(0.010));
  CHECK(m.window == doctest::Approx(0.025));
  for (int s = 400; s < 2000; s += 37) {
    CHECK(NumFrames(s, 400, 160) == (s - 400) / 160 + 1);
    Waveform w;
    w.samples.assign(static_cast<size_t>(s), 0.1);
    CHECK(ComputeLogMel(w).num_frames() == NumFrames(s, 400, 160));
  }
  Waveform tiny;
  tiny.samples.assign(399, 0.0);
  CHECK_THROWS(ComputeLogMel(tiny));
  Waveform bad = Noise(0.1, 2);
  bad.samples[5] = NAN;
  CHECK_THROWS(ComputeLogMel(bad));
}

TEST_CASE("digital silence sits at the log floor") {
  Waveform w;
  w.samples.assign(16000, 0.0);
  MelSpectrogram m = ComputeLogMel(w);
  CHECK((m.frames.array() == std::log(1e-10)).all());
}

TEST_CASE("FFT matches a naive DFT") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<std::complex<double>> x(64), y;
  for (auto& v : x) v = {g(rng), g(rng)};
  y = x;
  Fft(y);
  for (int k = 0; k < 64; ++k) {
    std::complex<double> s;
    for (int n = 0; n < 64; ++n) {
      s += x[n] * std::polar(1.0, -2 * std::numbers::pi * k * n / 64);
    }
    CHECK(std::abs(s - y[k]) < 1e-10);
  }
  std::vector<std::complex<double>> odd(6);
  CHECK_THROWS(Fft(odd));
}

TEST_CASE("1 kHz sine peaks in the mel bin nearest 1 kHz") {
  Waveform w = Sine(1000.0, 0.5, 0.5);
  MelSpectrogram m = ComputeLogMel(w);
  MelFilterbank bank(64, 512, 16000, 0.0, 8000.0);
  int nearest = 0;
  for (int b = 1; b < 64; ++b) {
    if (std::abs(bank.CenterHz(b) - 1000) < std::abs(bank.CenterHz(nearest) - 1000))
      nearest = b;
  }
  for (int f = 0; f < m.num_frames(); ++f) {
    Eigen::Index arg;
    m.frames.row(f).maxCoeff(&arg);
    CHECK(arg == nearest);
  }
  // Frame 0 recomputed with a direct DFT of the windowed samples.
  std::vector<double> power(257);
  for (int k = 0; k <= 256; ++k) {
    std::complex<double> s;
    for (int n = 0; n < 400; ++n) {
      double hann = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * n / 400);
      s += w.samples[n] * hann * std::polar(1.0, -2 * std::numbers::pi * k * n / 512);
    }
    power[k] = std::norm(s);
  }
  Eigen::VectorXd mel = bank.Apply(power);
  for (int b = 0; b < 64; ++b) {
    CHECK(m.frames(0, b) ==
          doctest::Approx(std::log(std::max(mel[b], 1e-10))).epsilon(1e-9));
  }
}

TEST_CASE("doubling amplitude adds ln 4 above the floor") {
  Waveform w = Noise(0.5, 4);
  Waveform w2 = w;
  for (double& s : w2.samples) s *= 2;
  MelSpectrogram a = ComputeLogMel(w), b = ComputeLogMel(w2);
  const double floor = std::log(1e-10);
  int checked = 0;
  for (Eigen::Index i = 0; i < a.frames.size(); ++i) {
    if (a.frames.data()[i] > floor + 1e-9) {
      CHECK(std::abs(b.frames.data()[i] - a.frames.data()[i] - std::log(4.0)) < 1e-6);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("mel scale and filterbank shape") {
  CHECK(HzToMel(0) == 0);
  CHECK(HzToMel(700) == doctest::Approx(2595 * std::log10(2.0)));
  CHECK(MelToHz(HzToMel(1234.5)) == doctest::Approx(1234.5));
  MelFilterbank bank(64, 512, 16000, 0.0, 8000.0);
  CHECK(bank.num_bins() == 64);
  for (int b = 1; b < 64; ++b) CHECK(bank.CenterHz(b) > bank.CenterHz(b - 1));
  CHECK(bank.CenterHz(0) > 0);
  CHECK(bank.CenterHz(63) < 8000);
}

TEST_CASE("normalizer centers the corpus and round-trips") {
  std::vector<MelSpectrogram> corpus;
  for (int i = 0; i < 3; ++i) corpus.push_back(ComputeLogMel(Noise(0.4, 10 + i)));
  MelNormalizer n = MelNormalizer::Fit(corpus);
  Eigen::MatrixXd all(0, 64);
  for (const auto& m : corpus) {
    Eigen::MatrixXd z = n.Apply(m.frames);
    Eigen::MatrixXd grown(all.rows() + z.rows(), 64);
    grown << all, z;
    all = grown;
    CHECK((n.Invert(z) - m.frames).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK(all.colwise().mean().cwiseAbs().maxCoeff() < 1e-8);
  Eigen::RowVectorXd var =
      (all.rowwise() - all.colwise().mean()).array().square().colwise().mean();
  CHECK((var.array() - 1.0).abs().maxCoeff() < 1e-8);

  Eigen::MatrixXd flat = corpus[0].frames;
  flat.col(17).setConstant(2.0);
  std::vector<Eigen::MatrixXd> bad = {flat};
  try {
    MelNormalizer::Fit(std::span<const Eigen::MatrixXd>(bad));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("17") != std::string::npos);
  }
}

TEST_CASE("segmentation modes") {
  SegmentSet full = SegmentRecording("r", 98, EvalFull{});
  REQUIRE(full.segments.size() == 1);
  CHECK(full.segments[0].begin == 0);
  CHECK(full.segments[0].length() == 98);

  std::mt19937_64 a(5), b(5);
  TrainRandom mode;
  SegmentSet s1 = SegmentRecording("r", 1000, mode, a);
  SegmentSet s2 = SegmentRecording("r", 1000, mode, b);
  REQUIRE(s1.segments.size() == 1);
  CHECK(s1.segments[0].begin == s2.segments[0].begin);
  CHECK(s1.segments[0].end == s2.segments[0].end);
  for (int i = 0; i < 50; ++i) {
    Segment s = SegmentRecording("r", 1000, mode, a).segments[0];
    CHECK(s.length() >= 600);
    CHECK(s.length() <= 800);
    CHECK(s.begin >= 0);
    CHECK(s.end <= 1000);
  }
  CHECK_THROWS(SegmentRecording("r", 500, mode, a));

  Annotated ann{{{"r", 0, 10, "a"}, {"r", 10, 20, "b"}}};
  SegmentSet two = SegmentRecording("r", 98, ann);
  REQUIRE(two.segments.size() == 2);
  CHECK(two.segments[0].length() == 10);
  CHECK(two.segments[1].length() == 10);
  CHECK(two.segments[1].label == "b");
  Annotated out{{{"r", 90, 99, "a"}}};
  CHECK_THROWS(SegmentRecording("r", 98, out));

  std::vector<Segment> spans = ConsecutiveSpans("r", 98, 40, 20);
  REQUIRE(spans.size() == 2);
  CHECK(spans[1].end == 98);
  CHECK(ConsecutiveSpans("r", 130, 40, 20).size() == 3);
}

TEST_CASE("features are deterministic") {
  Waveform w = Noise(0.3, 6);
  CHECK(ComputeLogMel(w).frames == ComputeLogMel(w).frames);
}

TEST_CASE("wav, resampling and cache files") {
  auto dir = TempDir("features");
  Waveform w = Sine(440, 0.5, 0.2);
  WriteWav(dir / "a.wav", w);
  Waveform r = ReadWav(dir / "a.wav");
  REQUIRE(r.samples.size() == w.samples.size());
  for (size_t i = 0; i < w.samples.size(); ++i) {
    CHECK(std::abs(r.samples[i] - w.samples[i]) < 1.0 / 32767);
  }
  Waveform at8 = Sine(440, 0.5, 0.2, 8000);
  Waveform up = Resample(at8, 16000);
  CHECK(up.sample_rate == 16000);
  CHECK(std::abs(static_cast<int>(up.samples.size()) - 3200) <= 1);
  double err = 0.0;
  for (size_t i = 400; i + 400 < up.samples.size(); ++i) {
    err = std::max(err, std::abs(up.samples[i] - w.samples[i]));
  }
  CHECK(err < 1e-2);

  Eigen::MatrixXd frames = ComputeLogMel(w).frames;
  WriteFeatureCache(dir / "f.bin", frames);
  Eigen::MatrixXd back = ReadFeatureCache(dir / "f.bin");
  CHECK((back - frames).cwiseAbs().maxCoeff() < 1e-4);

  std::vector<Segment> spans = {{"x", 0, 5, "aa"}, {"x", 5, 9, "b"}};
  WritePhonemeSpans(dir / "p.txt", spans);
  auto read = ReadPhonemeSpans(dir / "p.txt", "x");
  REQUIRE(read.size() == 2);
  CHECK(read[1].begin == 5);
  CHECK(read[1].label == "b");
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace voxface
