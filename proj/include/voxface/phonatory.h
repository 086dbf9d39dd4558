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

// Training-only diffusion constraint. A small denoiser predicts the noise
// added to a waveform window of the same speaker, conditioned on the voice
// code; its loss flows back into the shared encoder.
//
// Forward noising is the closed form
//   x_t = sqrt(alpha_bar_t) x_0 + sqrt(1 - alpha_bar_t) eps
// of the per-step transition x_t = sqrt(1 - beta_t) x_{t-1} + sqrt(beta_t) n.

#ifndef VOXFACE_PHONATORY_H_
#define VOXFACE_PHONATORY_H_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "voxface/nn.h"

namespace voxface {

inline constexpr int kWaveWindow = 256;
inline constexpr int kTimeEmbeddingDim = 16;
inline constexpr int kDenoiserHidden = 512;

class DiffusionSchedule {
 public:
  // Linear betas from beta_start to beta_end over `steps` steps.
  static DiffusionSchedule Linear(int steps = 50, double beta_start = 1e-4,
                                  double beta_end = 0.12);
  explicit DiffusionSchedule(std::vector<double> betas);

  int steps() const { return static_cast<int>(betas_.size()); }
  // 1-based step index t in [1, steps].
  double beta(int t) const { return betas_.at(Index(t)); }
  double alpha(int t) const { return 1.0 - beta(t); }
  double alpha_bar(int t) const { return alpha_bars_.at(Index(t)); }
  const std::vector<double>& betas() const { return betas_; }

 private:
  size_t Index(int t) const;

  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
};

Eigen::VectorXd ForwardSample(const DiffusionSchedule& schedule,
                              const Eigen::VectorXd& x0, int t,
                              const Eigen::VectorXd& noise);

// One Markov step x_{t-1} -> x_t.
Eigen::VectorXd MarkovStep(const DiffusionSchedule& schedule,
                           const Eigen::VectorXd& previous, int t,
                           const Eigen::VectorXd& noise);

// Sinusoidal embedding of the step index.
Eigen::VectorXd TimeEmbedding(int t);

// Zero-mean, unit-variance window of kWaveWindow samples starting at
// `offset`; a constant window maps to zeros.
Eigen::VectorXd NormalizedWindow(std::span<const double> samples, size_t offset);

// eps_theta(x_t, t, e): [x_t | embed(t) | e] -> 512 -> 512 -> 256 (ReLU
// hidden layers).
class Denoiser {
 public:
  explicit Denoiser(int code_dim = 64);

  void Initialize(uint64_t seed);

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  size_t num_params() const { return params_.size(); }
  int code_dim() const { return code_dim_; }
  const nn::Layout& layout() const { return layout_; }

  // Rows are examples.
  Eigen::MatrixXd Forward(const Eigen::MatrixXd& noisy,
                          std::span<const int> steps,
                          const Eigen::MatrixXd& codes) const;

  struct Slots {
    int w1, b1, w2, b2, w3, b3;
  };

  // Forward pass retaining activations for Backward.
  class Pass {
   public:
    Pass(const Denoiser& model, const Eigen::MatrixXd& noisy,
         std::span<const int> steps, const Eigen::MatrixXd& codes);
    const Eigen::MatrixXd& output() const { return out_; }
    // Accumulates parameter gradients; returns d(loss)/d(codes).
    Eigen::MatrixXd Backward(const Eigen::MatrixXd& d_out,
                             std::span<double> grads) const;

   private:
    const Denoiser& model_;
    Eigen::MatrixXd input_, z1_, a1_, z2_, a2_, out_;
  };

 private:
  int code_dim_;
  nn::Layout layout_;
  Slots slots_{};
  std::vector<double> params_;
};

struct DiffusionLossResult {
  double loss = 0.0;
  Eigen::MatrixXd d_codes;  // B x code_dim
};

// Mean |eps - eps_theta(x_t, t, e)| over a batch of clean windows (rows of
// x0), one uniformly drawn step and one Gaussian noise draw per row. When
// `grads` is non-empty, denoiser gradients are accumulated into it and the
// code gradient is returned.
DiffusionLossResult DiffusionLoss(const Denoiser& denoiser,
                                  const DiffusionSchedule& schedule,
                                  const Eigen::MatrixXd& x0,
                                  const Eigen::MatrixXd& codes,
                                  std::mt19937_64& rng,
                                  std::span<double> grads = {});

// Same loss with caller-chosen steps and noise (deterministic).
DiffusionLossResult DiffusionLossFixed(const Denoiser& denoiser,
                                       const DiffusionSchedule& schedule,
                                       const Eigen::MatrixXd& x0,
                                       const Eigen::MatrixXd& codes,
                                       std::span<const int> steps,
                                       const Eigen::MatrixXd& noise,
                                       std::span<double> grads = {});

}  // namespace voxface

#endif  // VOXFACE_PHONATORY_H_
