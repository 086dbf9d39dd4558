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

// Synthetic paired face/voice datasets with planted AM-to-feature
// dependence.
//
// Faces are a face-like template plus smooth shared deformation fields
// driven by speaker latents. Each planted AM (a distance AM whose landmarks
// no other AM uses) gets a dedicated field that moves only its two
// landmarks apart along their axis, so its value is affine in one latent.
// Shared fields vanish at planted landmarks, which makes every unplanted AM
// independent of the planted latents and hence of the feature channels.

#ifndef VOXFACE_SYNTHDATA_H_
#define VOXFACE_SYNTHDATA_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "voxface/dataset.h"

namespace voxface {

struct PlantSpec {
  std::string am_id;
  double rho = 0.8;
};

struct PhonemeClass {
  std::string label;
  // Fraction of the planted signal a segment of this class carries.
  double retention = 1.0;
};

struct SynthConfig {
  int num_speakers = 400;
  int num_vertices = 500;
  int latent_dim = 10;
  std::vector<PlantSpec> planted = {{"nose_width", 0.8},
                                    {"mouth_width", 0.8},
                                    {"alar_base_width", 0.8},
                                    {"cranial_width", 0.8}};
  double latent_scale_mm = 3.0;   // std of the leading shared latent
  double latent_decay = 0.85;     // per-index std ratio
  double planted_scale_mm = 1.5;  // half the std of a planted distance
  // RMS of the broad part of a planted field per unit of planted latent;
  // the part is zero at every landmark.
  double planted_spread = 2.0;
  double mesh_noise_mm = 0.0;     // i.i.d. per-coordinate noise
  // Features.
  int num_frames = 120;
  int num_mel_bins = kNumMelBins;
  int bins_per_plant = 3;
  double feature_noise = 1.0;   // scales envelope variation and frame noise
  double channel_gain = 1.0;
  // Recording quality: a noisy_fraction of speakers get noise scale
  // noisy_quality, the rest clean_quality. The scale multiplies both the
  // frame noise (observable) and the speaker-level corruption of planted
  // channels (not observable).
  double clean_quality = 0.5;
  double noisy_quality = 3.0;
  double noisy_fraction = 0.5;
  double frame_jitter = 0.0;  // extra per-frame planted-channel noise
  // Audio for the diffusion constraint; 0 disables.
  double wave_seconds = 0.5;
  double wave_noise = 0.005;
  // Phoneme annotation; empty disables.
  std::vector<PhonemeClass> phonemes;
  int phoneme_frames = 24;
  uint64_t seed = 0;
};

// Vowels carry the planted signal, plosives none.
std::vector<PhonemeClass> DefaultPhonemeInventory();

std::vector<AmDefinition> DefaultAmDefinitions();

// Exact generative quantities, for checks against the pipeline.
struct SynthTruth {
  Eigen::MatrixXd fields;   // 3T x (latent_dim + planted), column per field
  Eigen::MatrixXd latents;  // speakers x (latent_dim + planted)
  Eigen::VectorXd quality;  // per-speaker noise scale
};

struct SynthResult {
  Dataset dataset;
  SynthTruth truth;
};

// Deterministic given config.seed; `jobs` only affects speed.
SynthResult Generate(const SynthConfig& config, int jobs = 1);

// The planted AMs of a dataset.
std::vector<PlantedAm> GroundTruthManifest(const Dataset& dataset);

}  // namespace voxface

#endif  // VOXFACE_SYNTHDATA_H_
