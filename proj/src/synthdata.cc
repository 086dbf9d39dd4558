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

#include "voxface/synthdata.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "voxface/common.h"

namespace voxface {

namespace {

// Seed streams.
constexpr uint64_t kStreamFace = 1;
constexpr uint64_t kStreamVoice = 2;
constexpr uint64_t kStreamWave = 3;
constexpr uint64_t kStreamPhoneme = 4;
constexpr uint64_t kStreamSplit = 5;
constexpr uint64_t kStreamGlobal = 6;

constexpr int kWavePeriod = 256;

struct LandmarkSpot {
  const char* name;
  double col;  // on a 25 x 20 reference grid
  double row;
};

constexpr LandmarkSpot kLandmarks[] = {
    {"g", 12, 14},    {"n", 12, 13},    {"prn", 12, 10},  {"sn", 12, 8},
    {"al_l", 10, 9},  {"al_r", 14, 9},  {"ac_l", 10, 8},  {"ac_r", 14, 8},
    {"ch_l", 8, 6},   {"ch_r", 16, 6},  {"ls", 12, 7},    {"sto", 12, 6},
    {"li", 12, 5},    {"sl", 12, 4},    {"pg", 12, 2},    {"gn", 12, 1},
    {"zy_l", 2, 11},  {"zy_r", 22, 11}, {"go_l", 4, 4},   {"go_r", 20, 4},
    {"en_l", 10, 12}, {"en_r", 14, 12}, {"ex_l", 7, 12},  {"ex_r", 17, 12},
    {"ft_l", 5, 16},  {"ft_r", 19, 16}, {"eu_l", 0, 13},  {"eu_r", 24, 13},
};

struct Grid {
  int rows = 0;
  int cols = 0;
  double U(int c) const { return -1.0 + 2.0 * c / (cols - 1); }
  double V(int r) const { return -1.0 + 2.0 * r / (rows - 1); }
  int Index(int r, int c) const { return r * cols + c; }
};

Grid MakeGrid(int num_vertices) {
  Grid g;
  g.rows = static_cast<int>(std::floor(std::sqrt(num_vertices * 0.8)));
  if (g.rows < 1) throw Error("too few vertices for the face template");
  g.cols = num_vertices / g.rows;
  if (g.rows * g.cols != num_vertices || g.rows < 20 || g.cols < 25) {
    throw Error("num_vertices " + std::to_string(num_vertices) +
                " does not factor into a face grid of at least 25 x 20 "
                "(try 500, 2000 or 4500)");
  }
  return g;
}

Eigen::Vector3d TemplatePoint(double u, double v) {
  const double shell = 60.0 * std::sqrt(std::max(0.05, 1.0 - 0.7 * u * u - 0.4 * v * v));
  const double nose = 22.0 * std::exp(-(u * u / 0.012 + (v - 0.02) * (v - 0.02) / 0.05));
  const double lips = 6.0 * std::exp(-(u * u / 0.06 + (v + 0.37) * (v + 0.37) / 0.008));
  const double chin = 8.0 * std::exp(-(u * u / 0.04 + (v + 0.8) * (v + 0.8) / 0.02));
  return {70.0 * u, 100.0 * v, shell + nose + lips + chin};
}

// Compactly supported bump: 1 at d = 0, 0 for d >= r.
double Wendland(double d, double r) {
  if (d >= r) return 0.0;
  const double q = d / r;
  return std::pow(1.0 - q, 4) * (4.0 * q + 1.0);
}

double Legendre(int order, double t) {
  switch (order) {
    case 0: return 1.0;
    case 1: return t;
    case 2: return t * t - 1.0 / 3.0;
    default: return t * t * t - 0.6 * t;
  }
}

std::vector<double> QuantizePcm16(std::vector<double> s) {
  for (double& x : s) {
    x = std::round(std::clamp(x, -1.0, 32767.0 / 32768.0) * 32768.0) / 32768.0;
  }
  return s;
}

struct Plant {
  PlantSpec spec;
  int a = 0;  // vertex indices of the two landmarks
  int b = 0;
  std::vector<int> bins;
  int harmonic = 0;
};

std::vector<Plant> ResolvePlants(const SynthConfig& config,
                                 const std::vector<AmDefinition>& defs,
                                 const LandmarkMap& landmarks) {
  std::map<std::string, const AmDefinition*> by_id;
  std::map<std::string, int> landmark_use;
  for (const auto& d : defs) {
    by_id[d.id] = &d;
    for (const auto& l : std::set<std::string>(d.landmarks.begin(), d.landmarks.end())) {
      ++landmark_use[l];
    }
  }
  std::vector<Plant> plants;
  std::set<std::string> seen;
  const int n = static_cast<int>(config.planted.size());
  if (n * config.bins_per_plant > config.num_mel_bins) {
    throw Error("not enough mel bins for " + std::to_string(n) + " planted AMs");
  }
  for (int p = 0; p < n; ++p) {
    const PlantSpec& spec = config.planted[static_cast<size_t>(p)];
    if (!(spec.rho >= 0.0 && spec.rho <= 1.0)) {
      throw Error("planted AM '" + spec.am_id + "': rho must lie in [0, 1]");
    }
    if (!seen.insert(spec.am_id).second) {
      throw Error("AM '" + spec.am_id + "' planted twice");
    }
    auto it = by_id.find(spec.am_id);
    if (it == by_id.end()) {
      throw Error("planted AM '" + spec.am_id + "' is not in the AM definitions");
    }
    const AmDefinition& def = *it->second;
    if (def.kind != AmKind::kDistance) {
      throw Error("planted AM '" + spec.am_id + "' must be a distance AM");
    }
    for (const auto& l : def.landmarks) {
      if (landmark_use[l] != 1) {
        throw Error("planted AM '" + spec.am_id + "' shares landmark '" + l +
                    "' with another AM");
      }
    }
    Plant plant;
    plant.spec = spec;
    plant.a = landmarks.Index(def.landmarks[0]);
    plant.b = landmarks.Index(def.landmarks[1]);
    const int center = static_cast<int>(
        std::lround((p + 0.5) * config.num_mel_bins / n));
    const int first = std::clamp(center - config.bins_per_plant / 2, 0,
                                 config.num_mel_bins - config.bins_per_plant);
    for (int k = 0; k < config.bins_per_plant; ++k) plant.bins.push_back(first + k);
    plant.harmonic = 4 + 5 * p;
    plants.push_back(std::move(plant));
  }
  return plants;
}

}  // namespace

std::vector<PhonemeClass> DefaultPhonemeInventory() {
  return {{"a", 1.0}, {"i", 1.0}, {"m", 0.7}, {"s", 0.3}, {"t", 0.0}};
}

std::vector<AmDefinition> DefaultAmDefinitions() {
  using K = AmKind;
  return {
      {"nose_width", K::kDistance, {"al_l", "al_r"}},
      {"nose_height", K::kDistance, {"n", "sn"}},
      {"nose_protrusion", K::kDistance, {"sn", "prn"}},
      {"alar_base_width", K::kDistance, {"ac_l", "ac_r"}},
      {"mouth_width", K::kDistance, {"ch_l", "ch_r"}},
      {"upper_lip_height", K::kDistance, {"sn", "sto"}},
      {"lower_lip_height", K::kDistance, {"sto", "sl"}},
      {"vermilion_height", K::kDistance, {"ls", "li"}},
      {"face_width", K::kDistance, {"zy_l", "zy_r"}},
      {"mandible_width", K::kDistance, {"go_l", "go_r"}},
      {"lower_face_height", K::kDistance, {"sn", "gn"}},
      {"face_height", K::kDistance, {"n", "gn"}},
      {"intercanthal_width", K::kDistance, {"en_l", "en_r"}},
      {"biocular_width", K::kDistance, {"ex_l", "ex_r"}},
      {"forehead_width", K::kDistance, {"ft_l", "ft_r"}},
      {"cranial_width", K::kDistance, {"eu_l", "eu_r"}},
      {"chin_height", K::kDistance, {"sl", "gn"}},
      {"lip_height_ratio", K::kProportion, {"sto", "sl", "sn", "sto"}},
      {"lower_face_ratio", K::kProportion, {"sn", "gn", "n", "gn"}},
      {"mandible_face_ratio", K::kProportion, {"go_l", "go_r", "zy_l", "zy_r"}},
      {"eye_forehead_ratio", K::kProportion, {"ex_l", "ex_r", "ft_l", "ft_r"}},
      {"nasofrontal_angle", K::kAngle, {"g", "n", "prn"}},
      {"nasolabial_angle", K::kAngle, {"prn", "sn", "ls"}},
      {"mentolabial_angle", K::kAngle, {"li", "sl", "pg"}},
  };
}

SynthResult Generate(const SynthConfig& config, int jobs) {
  const int n = config.num_speakers;
  const std::vector<Split> splits =
      AssignSplits(n, DeriveSeed(config.seed, kStreamSplit, 0));
  if (config.latent_dim < 0) throw Error("latent_dim must be nonnegative");
  if (config.num_frames < 1) throw Error("num_frames must be positive");
  if (!(config.noisy_fraction >= 0.0 && config.noisy_fraction <= 1.0)) {
    throw Error("noisy_fraction must lie in [0, 1]");
  }
  if (config.clean_quality < 0.0 || config.noisy_quality < 0.0 ||
      config.feature_noise < 0.0 || config.mesh_noise_mm < 0.0 ||
      config.planted_spread < 0.0) {
    throw Error("noise scales must be nonnegative");
  }
  if (config.num_mel_bins < 1 || config.bins_per_plant < 1) {
    throw Error("mel bin counts must be positive");
  }
  const Grid grid = MakeGrid(config.num_vertices);
  const int t = config.num_vertices;

  // Template and landmarks.
  Vertices base(t, 3);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      base.row(grid.Index(r, c)) = TemplatePoint(grid.U(c), grid.V(r)).transpose();
    }
  }
  LandmarkMap landmarks;
  std::vector<int> landmark_vertices;
  for (const auto& spot : kLandmarks) {
    const int c = static_cast<int>(std::lround(spot.col / 24.0 * (grid.cols - 1)));
    const int r = static_cast<int>(std::lround(spot.row / 19.0 * (grid.rows - 1)));
    landmarks.Add(spot.name, grid.Index(r, c));
    landmark_vertices.push_back(grid.Index(r, c));
  }
  std::vector<AmDefinition> defs = DefaultAmDefinitions();
  const std::vector<Plant> plants = ResolvePlants(config, defs, landmarks);
  const int np = static_cast<int>(plants.size());

  // Support radius of each planted landmark: just short of its nearest
  // other landmark.
  auto radius = [&](int v) {
    double best = std::numeric_limits<double>::infinity();
    for (int w : landmark_vertices) {
      if (w != v) best = std::min(best, (base.row(w) - base.row(v)).norm());
    }
    return 0.9 * best;
  };

  const int nf = config.latent_dim + np;
  Eigen::MatrixXd fields = Eigen::MatrixXd::Zero(3 * t, nf);
  std::vector<double> mask(static_cast<size_t>(t), 1.0);
  for (const Plant& p : plants) {
    for (int v : {p.a, p.b}) {
      const double r = radius(v);
      for (int i = 0; i < t; ++i) {
        mask[static_cast<size_t>(i)] *= 1.0 - Wendland((base.row(i) - base.row(v)).norm(), r);
      }
    }
  }
  std::mt19937_64 global(DeriveSeed(config.seed, kStreamGlobal, 0));
  std::normal_distribution<double> normal;
  for (int j = 0; j < config.latent_dim; ++j) {
    double coef[3][4][4];
    for (auto& axis : coef)
      for (auto& row : axis)
        for (double& c : row) c = normal(global);
    for (int r = 0; r < grid.rows; ++r) {
      for (int c = 0; c < grid.cols; ++c) {
        const int i = grid.Index(r, c);
        for (int axis = 0; axis < 3; ++axis) {
          double d = 0.0;
          for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
              d += coef[axis][a][b] * Legendre(a, grid.U(c)) * Legendre(b, grid.V(r));
          fields(3 * i + axis, j) = mask[static_cast<size_t>(i)] * d;
        }
      }
    }
    const double rms = fields.col(j).norm() / std::sqrt(static_cast<double>(t));
    if (rms > 0.0) fields.col(j) /= rms;
  }
  for (int p = 0; p < np; ++p) {
    const Plant& plant = plants[static_cast<size_t>(p)];
    const Eigen::Vector3d axis =
        (base.row(plant.b) - base.row(plant.a)).transpose().normalized();
    const double ra = radius(plant.a);
    const double rb = radius(plant.b);
    for (int i = 0; i < t; ++i) {
      const Eigen::Vector3d d =
          -Wendland((base.row(i) - base.row(plant.a)).norm(), ra) * axis +
          Wendland((base.row(i) - base.row(plant.b)).norm(), rb) * axis;
      fields.block<3, 1>(3 * i, config.latent_dim + p) = d;
    }
  }
  if (config.planted_spread > 0.0 && np > 0) {
    // Broad component of each planted field, vanishing at every landmark so
    // no AM other than the planted one moves.
    std::vector<double> quiet(static_cast<size_t>(t), 1.0);
    for (int v : landmark_vertices) {
      double near = std::numeric_limits<double>::infinity();
      for (int i = 0; i < t; ++i) {
        if (i != v) near = std::min(near, (base.row(i) - base.row(v)).norm());
      }
      for (int i = 0; i < t; ++i) {
        quiet[static_cast<size_t>(i)] *= 1.0 - Wendland((base.row(i) - base.row(v)).norm(), 2.0 * near);
      }
    }
    for (int p = 0; p < np; ++p) {
      double coef[3][4][4];
      for (auto& axis : coef)
        for (auto& row : axis)
          for (double& c : row) c = normal(global);
      Eigen::VectorXd broad(3 * t);
      for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
          const int i = grid.Index(r, c);
          for (int axis = 0; axis < 3; ++axis) {
            double d = 0.0;
            for (int a = 0; a < 4; ++a)
              for (int b = 0; b < 4; ++b)
                d += coef[axis][a][b] * Legendre(a, grid.U(c)) * Legendre(b, grid.V(r));
            broad[3 * i + axis] = quiet[static_cast<size_t>(i)] * d;
          }
        }
      }
      const double rms = broad.norm() / std::sqrt(static_cast<double>(t));
      if (rms > 0.0) fields.col(config.latent_dim + p) += config.planted_spread / rms * broad;
    }
  }
  std::vector<double> phases;
  for (int k = 0; k < np + 6; ++k) {
    phases.push_back(std::uniform_real_distribution<double>(0.0, 2.0 * M_PI)(global));
  }

  SynthResult result;
  Dataset& ds = result.dataset;
  ds.name = "synthetic-" + std::to_string(config.seed);
  ds.landmarks = landmarks;
  ds.am_definitions = defs;
  ds.splits = splits;
  for (const Plant& p : plants) ds.planted.push_back({p.spec.am_id, p.spec.rho, p.bins});
  ds.speakers.resize(static_cast<size_t>(n));
  ds.meshes.resize(static_cast<size_t>(n));
  ds.features.resize(static_cast<size_t>(n));
  const bool waves = config.wave_seconds > 0.0;
  const bool phon = !config.phonemes.empty();
  if (waves) ds.waveforms.resize(static_cast<size_t>(n));
  if (phon) ds.phonemes.resize(static_cast<size_t>(n));
  if (phon && config.phoneme_frames < 1) throw Error("phoneme_frames must be positive");
  result.truth.fields = fields;
  result.truth.latents.resize(n, nf);
  result.truth.quality.resize(n);

  const int num_spans = phon ? std::max(1, config.num_frames / config.phoneme_frames) : 0;
  const int frames = phon ? num_spans * config.phoneme_frames : config.num_frames;
  const int bins = config.num_mel_bins;
  const int wave_len = static_cast<int>(std::lround(config.wave_seconds * kCanonicalSampleRate));

  ParallelFor(n, jobs, [&](int s) {
    const auto su = static_cast<size_t>(s);
    char id[16];
    std::snprintf(id, sizeof(id), "spk%04d", s);
    ds.speakers[su] = id;
    std::normal_distribution<double> gauss;

    // Face.
    std::mt19937_64 face(DeriveSeed(config.seed, kStreamFace, static_cast<uint64_t>(s)));
    Eigen::VectorXd latent(nf);
    Eigen::VectorXd planted_z(np);
    for (int j = 0; j < config.latent_dim; ++j) {
      latent[j] = gauss(face) * config.latent_scale_mm * std::pow(config.latent_decay, j);
    }
    for (int p = 0; p < np; ++p) {
      planted_z[p] = gauss(face);
      latent[config.latent_dim + p] = planted_z[p] * config.planted_scale_mm;
    }
    Eigen::VectorXd flat = fields * latent;
    Mesh mesh;
    mesh.vertices = base;
    mesh.topology_id = "T" + std::to_string(t);
    for (int i = 0; i < t; ++i) {
      for (int a = 0; a < 3; ++a) {
        mesh.vertices(i, a) += flat[3 * i + a];
        if (config.mesh_noise_mm > 0.0) mesh.vertices(i, a) += config.mesh_noise_mm * gauss(face);
      }
    }
    ds.meshes[su] = std::move(mesh);
    result.truth.latents.row(s) = latent.transpose();

    // Phoneme layout.
    std::vector<double> retention(static_cast<size_t>(frames), 1.0);
    std::vector<int> span_of(static_cast<size_t>(frames), 0);
    if (phon) {
      std::mt19937_64 prng(DeriveSeed(config.seed, kStreamPhoneme, static_cast<uint64_t>(s)));
      std::vector<int> order;
      const int nc = static_cast<int>(config.phonemes.size());
      while (static_cast<int>(order.size()) < num_spans) {
        std::vector<int> block(static_cast<size_t>(nc));
        for (int c = 0; c < nc; ++c) block[static_cast<size_t>(c)] = c;
        for (size_t i = block.size(); i > 1; --i) {
          std::swap(block[i - 1], block[std::uniform_int_distribution<size_t>(0, i - 1)(prng)]);
        }
        order.insert(order.end(), block.begin(), block.end());
      }
      for (int k = 0; k < num_spans; ++k) {
        const PhonemeClass& pc = config.phonemes[static_cast<size_t>(order[static_cast<size_t>(k)])];
        const int b0 = k * config.phoneme_frames;
        ds.phonemes[su].push_back({id, b0, b0 + config.phoneme_frames, pc.label});
        for (int f = b0; f < b0 + config.phoneme_frames; ++f) {
          retention[static_cast<size_t>(f)] = std::clamp(pc.retention, 0.0, 1.0);
          span_of[static_cast<size_t>(f)] = k;
        }
      }
    }

    // Voice features.
    std::mt19937_64 voice(DeriveSeed(config.seed, kStreamVoice, static_cast<uint64_t>(s)));
    const double quality =
        std::uniform_real_distribution<double>(0.0, 1.0)(voice) < config.noisy_fraction
            ? config.noisy_quality
            : config.clean_quality;
    result.truth.quality[s] = quality;
    Eigen::VectorXd envelope(bins);
    double env_coef[4];
    for (double& c : env_coef) c = 0.25 * gauss(voice);
    for (int b = 0; b < bins; ++b) {
      double e = -6.0 - 0.04 * b;
      for (int j = 0; j < 4; ++j) {
        e += config.feature_noise * env_coef[j] * std::cos(M_PI * (j + 1) * (b + 0.5) / bins);
      }
      envelope[b] = e;
    }
    Eigen::VectorXd speaker_noise(np);
    for (int p = 0; p < np; ++p) speaker_noise[p] = gauss(voice);
    Eigen::MatrixXd span_noise(std::max(1, num_spans), np);
    for (Eigen::Index i = 0; i < span_noise.size(); ++i) span_noise.data()[i] = gauss(voice);
    Eigen::MatrixXd feat(frames, bins);
    for (int f = 0; f < frames; ++f) {
      for (int b = 0; b < bins; ++b) {
        feat(f, b) = envelope[b] + config.feature_noise * 0.5 * quality * gauss(voice);
      }
      const double ret = retention[static_cast<size_t>(f)];
      for (int p = 0; p < np; ++p) {
        const Plant& plant = plants[static_cast<size_t>(p)];
        const double rho = plant.spec.rho;
        const double signal = ret * planted_z[p] +
                              std::sqrt(1.0 - ret * ret) * span_noise(span_of[static_cast<size_t>(f)], p);
        const double value =
            config.channel_gain *
            (rho * signal + (1.0 - rho) * quality *
                                (speaker_noise[p] + config.frame_jitter * gauss(voice)));
        for (int b : plant.bins) feat(f, b) += value;
      }
    }
    ds.features[su] = feat.cast<float>().cast<double>();

    // Audio: a 256-sample periodic signal whose planted harmonics follow the
    // planted latents, plus speaker-specific harmonics and noise.
    if (waves) {
      std::mt19937_64 wrng(DeriveSeed(config.seed, kStreamWave, static_cast<uint64_t>(s)));
      double other[6];
      for (double& o : other) o = gauss(wrng);
      std::vector<double> w(static_cast<size_t>(wave_len));
      for (int i = 0; i < wave_len; ++i) {
        const double ph = 2.0 * M_PI * i / kWavePeriod;
        double x = 0.0;
        for (int p = 0; p < np; ++p) {
          x += planted_z[p] * std::sin(plants[static_cast<size_t>(p)].harmonic * ph + phases[static_cast<size_t>(p)]);
        }
        for (int q = 0; q < 6; ++q) {
          x += other[q] * std::sin((6 + 5 * q) * ph + phases[static_cast<size_t>(np + q)]);
        }
        w[static_cast<size_t>(i)] = 0.06 * x + config.wave_noise * gauss(wrng);
      }
      ds.waveforms[su] = QuantizePcm16(std::move(w));
    }
  });
  ds.Validate();
  return result;
}

std::vector<PlantedAm> GroundTruthManifest(const Dataset& dataset) {
  return dataset.planted;
}

}  // namespace voxface
