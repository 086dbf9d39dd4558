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

// Voice-code encoder with per-AM mean and variance heads.
//
// Architecture (fixed):
//   per-frame linear lift 64 -> 128
//   conv1d 128 -> 128, kernel 5, stride 2, no padding, ReLU   (x2)
//   mean + std pooling over time -> 256
//   fc 256 -> 128, ReLU; fc 128 -> 64, ReLU  => voice code e
//   mean head k:     F_k = w_k . e + b_k
//   variance head k: G_k = exp(clamp(u_k . e + c_k, -15, 15))
//
// The backbone is shared by all heads.

#ifndef VOXFACE_ESTIMATOR_H_
#define VOXFACE_ESTIMATOR_H_

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "voxface/nn.h"

namespace voxface {

inline constexpr int kLiftChannels = 128;
inline constexpr int kConvKernel = 5;
inline constexpr int kConvStride = 2;
inline constexpr int kPoolDim = 2 * kLiftChannels;
inline constexpr int kHiddenDim = 128;
inline constexpr int kVoiceCodeDim = 64;
inline constexpr int kDefaultMinFrames = 20;
inline constexpr double kLogVarianceClamp = 15.0;
inline constexpr double kPoolStdEpsilon = 1e-5;

// Smallest input length the two strided convolutions accept.
int ArchitectureMinFrames();
int ConvOutputLength(int frames);

struct HeadOutputs {
  Eigen::MatrixXd code;           // B x 64
  Eigen::MatrixXd means;          // B x K
  Eigen::MatrixXd log_variances;  // B x K, after clamping
  Eigen::MatrixXd variances;      // B x K, strictly positive
};

class EstimatorModel {
 public:
  EstimatorModel(int num_ams, int num_mel_bins = 64);

  // He-normal backbone; mean and variance heads start at zero.
  void Initialize(uint64_t seed);

  int num_ams() const { return num_ams_; }
  int num_mel_bins() const { return num_mel_bins_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  size_t num_params() const { return params_.size(); }
  const nn::Layout& layout() const { return layout_; }
  uint64_t ArchitectureHash() const;

  // Segments of length < min_frames are rejected.
  HeadOutputs Forward(const Eigen::MatrixXd& segment,
                      int min_frames = kDefaultMinFrames) const;

  struct Slots {
    int lift_w, lift_b, conv1_w, conv1_b, conv2_w, conv2_b, fc1_w, fc1_b,
        fc2_w, fc2_b, mean_w, mean_b, var_w, var_b;
  };
  const Slots& slots() const { return slots_; }

 private:
  int num_ams_;
  int num_mel_bins_;
  nn::Layout layout_;
  Slots slots_{};
  std::vector<double> params_;
};

// Forward pass over a batch of equal-length segments, retaining what the
// backward pass needs.
class EncoderPass {
 public:
  EncoderPass(const EstimatorModel& model,
              std::span<const Eigen::MatrixXd* const> segments);

  const HeadOutputs& outputs() const { return out_; }
  int batch_size() const { return batch_; }

  // Accumulates into `grads` (layout of the model). d_log_variances is the
  // gradient w.r.t. the clamped log-variance; entries where the clamp is
  // active do not propagate. d_code, when non-null, is an extra gradient on
  // the voice code (B x 64).
  void Backward(const Eigen::MatrixXd& d_means,
                const Eigen::MatrixXd& d_log_variances,
                const Eigen::MatrixXd* d_code, std::span<double> grads) const;

 private:
  const EstimatorModel& model_;
  int batch_ = 0;
  int frames_ = 0, frames1_ = 0, frames2_ = 0;
  Eigen::MatrixXd input_;  // (B*F) x bins
  Eigen::MatrixXd lift_;   // (B*F) x 128
  Eigen::MatrixXd cols1_, z1_, a1_;
  Eigen::MatrixXd cols2_, z2_, a2_;
  Eigen::MatrixXd pool_mean_, pool_std_;  // B x 128 each
  Eigen::MatrixXd pooled_;                // B x 256
  Eigen::MatrixXd z3_, a3_, z4_;
  Eigen::MatrixXd raw_log_var_;  // before clamping
  HeadOutputs out_;
};

// (F - m)^2
double LossPlain(double mean_pred, double target);
// (F - m)^2 / G + ln G; throws for G <= 0.
double LossUncertainty(double mean_pred, double variance, double target);

struct AggregatedPrediction {
  Eigen::VectorXd mean;        // m_hat per AM
  Eigen::VectorXd variance;    // w per AM
  Eigen::VectorXd calibrated;  // L * w per AM
  int num_segments = 0;
};

// Inverse-variance fusion of L segment predictions (rows) per AM (columns):
// 1/w = sum_l 1/G_l, m_hat = sum_l (w / G_l) F_l, calibrated = L * w.
AggregatedPrediction Aggregate(const Eigen::MatrixXd& means,
                               const Eigen::MatrixXd& variances);

}  // namespace voxface

#endif  // VOXFACE_ESTIMATOR_H_
