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

// Training and inference for the AM estimator, optionally with the
// diffusion constraint, plus model checkpoints.

#ifndef VOXFACE_TRAINING_H_
#define VOXFACE_TRAINING_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "voxface/estimator.h"
#include "voxface/features.h"
#include "voxface/geometry.h"
#include "voxface/nn.h"
#include "voxface/phonatory.h"

namespace voxface {

// One speaker's recording with its normalized AM targets.
struct Example {
  std::string speaker;
  std::shared_ptr<const Eigen::MatrixXd> frames;  // normalized log-mel
  Eigen::VectorXd targets;                        // normalized AMs
  // Fixed spans (e.g. one phoneme's segments). When set, training draws
  // from these and prediction aggregates over them; otherwise training uses
  // random crops and prediction uses consecutive chunks.
  std::vector<Segment> spans;
  // Audio of the same speaker for the diffusion constraint.
  std::shared_ptr<const std::vector<double>> waveform;
};

struct PhonatoryConfig {
  bool enabled = false;
  double gamma = 0.1;
  int steps = 50;
  double beta_start = 1e-4;
  double beta_end = 0.12;
  // Diffusion-only steps on encoder + denoiser before estimator training.
  int pretrain_iterations = 0;
  nn::SgdConfig sgd{0.01, 0.9, 0.0, 1.0};
};

struct TrainingConfig {
  nn::SgdConfig sgd{0.1, 0.9, 0.0005, 0.0};
  int batch_size = 64;
  int iterations = 5000;
  // Mean heads only (variance fixed at 1) for the first iterations.
  int warmup_iterations = 200;
  TrainRandom crop{600, 800};
  int min_frames = kDefaultMinFrames;
  // Chunk length used to split a recording for aggregated prediction.
  int eval_chunk_frames = 800;
  // D_v1 model-selection cadence; the final iterate is always evaluated.
  int select_every = 500;
  uint64_t seed = 0;
  PhonatoryConfig phonatory;
};

// Reduced schedule for short synthetic recordings on a single machine:
// 20-26 frame crops, batch 16, 100 iterations, learning rate 0.01 with
// gradient clipping.
TrainingConfig DeskScaleTrainingConfig();

// Estimator objective summed over AMs and averaged over segments: the
// uncertainty loss, or the plain squared error during warm-up.
struct EstimatorLoss {
  double value = 0.0;
  Eigen::MatrixXd d_means;
  Eigen::MatrixXd d_log_variances;
};
EstimatorLoss ComputeEstimatorLoss(const HeadOutputs& out,
                                   const Eigen::MatrixXd& targets,
                                   bool variance_frozen);

struct BatchItem {
  const Example* voice = nullptr;
  Segment span;
  // Supplies the clean waveform window; must share the voice's speaker.
  const Example* partner = nullptr;
  size_t window_offset = 0;
};

struct StepResult {
  double total = 0.0;
  double estimator_loss = 0.0;
  double diffusion_loss = 0.0;
  std::vector<double> model_grads;
  std::vector<double> denoiser_grads;
};

// total = estimator loss + gamma * diffusion loss, with gradients of both
// flowing into the shared encoder. `denoiser` may be null (gamma ignored).
// Throws if a batch item's partner speaker differs from its voice speaker.
StepResult JointStep(const EstimatorModel& model, const Denoiser* denoiser,
                     const DiffusionSchedule* schedule,
                     std::span<const BatchItem> batch, double gamma,
                     bool variance_frozen, std::mt19937_64& rng,
                     bool estimator_terms = true);

struct TrainResult {
  EstimatorModel model;
  std::optional<Denoiser> denoiser;
  int best_iteration = 0;
  double best_select_error = 0.0;
  std::vector<double> loss_trace;  // estimator loss per iteration
};

// Trains on `train`, selecting the checkpoint with the lowest mean
// normalized error on `select`. Deterministic given config.seed.
TrainResult Train(std::span<const Example> train,
                  std::span<const Example> select,
                  const TrainingConfig& config);

// Recording-level prediction in normalized AM units.
AggregatedPrediction PredictExample(const EstimatorModel& model,
                                    const Example& example,
                                    const TrainingConfig& config);

// Mean over AMs of MSE(pred) / MSE(train mean) on a labelled set.
double MeanNormalizedError(const EstimatorModel& model,
                           std::span<const Example> examples,
                           const Eigen::VectorXd& chance,
                           const TrainingConfig& config);

struct Checkpoint {
  EstimatorModel model{1};
  std::optional<Denoiser> denoiser;
  std::optional<DiffusionSchedule> schedule;
  MelNormalizer mel_normalizer;
  AmNormalization am_normalization;
  std::string provenance;  // e.g. "config_hash=... seed=..."
};

// "VFCKPT01", architecture hash, parameters, optional denoiser + schedule,
// feature and AM normalization statistics, provenance string.
void WriteCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint ReadCheckpoint(const std::filesystem::path& path);

}  // namespace voxface

#endif  // VOXFACE_TRAINING_H_
