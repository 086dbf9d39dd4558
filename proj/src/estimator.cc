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

#include "voxface/estimator.h"

#include <cmath>
#include <random>

#include "voxface/common.h"

namespace voxface {

namespace {

Eigen::MatrixXd Im2Col(const Eigen::MatrixXd& input, int batch, int frames_in,
                       int frames_out) {
  const int c = static_cast<int>(input.cols());
  Eigen::MatrixXd cols(batch * frames_out, kConvKernel * c);
  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < frames_out; ++o) {
      const int row = b * frames_out + o;
      const int src = b * frames_in + kConvStride * o;
      for (int j = 0; j < kConvKernel; ++j) {
        cols.block(row, j * c, 1, c) = input.row(src + j);
      }
    }
  }
  return cols;
}

void Col2ImAdd(const Eigen::MatrixXd& d_cols, int batch, int frames_in,
               int frames_out, Eigen::MatrixXd& d_input) {
  const int c = static_cast<int>(d_input.cols());
  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < frames_out; ++o) {
      const int row = b * frames_out + o;
      const int dst = b * frames_in + kConvStride * o;
      for (int j = 0; j < kConvKernel; ++j) {
        d_input.row(dst + j) += d_cols.block(row, j * c, 1, c);
      }
    }
  }
}

}  // namespace

int ConvOutputLength(int frames) {
  if (frames < kConvKernel) return 0;
  return (frames - kConvKernel) / kConvStride + 1;
}

int ArchitectureMinFrames() {
  int f = 1;
  while (ConvOutputLength(ConvOutputLength(f)) < 1) ++f;
  return f;
}

EstimatorModel::EstimatorModel(int num_ams, int num_mel_bins)
    : num_ams_(num_ams), num_mel_bins_(num_mel_bins) {
  if (num_ams < 1) throw Error("estimator needs at least one AM");
  if (num_mel_bins < 1) throw Error("estimator needs at least one mel bin");
  slots_.lift_w = layout_.Add("lift_w", kLiftChannels, num_mel_bins);
  slots_.lift_b = layout_.Add("lift_b", kLiftChannels);
  slots_.conv1_w =
      layout_.Add("conv1_w", kLiftChannels, kConvKernel * kLiftChannels);
  slots_.conv1_b = layout_.Add("conv1_b", kLiftChannels);
  slots_.conv2_w =
      layout_.Add("conv2_w", kLiftChannels, kConvKernel * kLiftChannels);
  slots_.conv2_b = layout_.Add("conv2_b", kLiftChannels);
  slots_.fc1_w = layout_.Add("fc1_w", kHiddenDim, kPoolDim);
  slots_.fc1_b = layout_.Add("fc1_b", kHiddenDim);
  slots_.fc2_w = layout_.Add("fc2_w", kVoiceCodeDim, kHiddenDim);
  slots_.fc2_b = layout_.Add("fc2_b", kVoiceCodeDim);
  slots_.mean_w = layout_.Add("mean_w", num_ams, kVoiceCodeDim);
  slots_.mean_b = layout_.Add("mean_b", num_ams);
  slots_.var_w = layout_.Add("var_w", num_ams, kVoiceCodeDim);
  slots_.var_b = layout_.Add("var_b", num_ams);
  params_.assign(layout_.size(), 0.0);
}

void EstimatorModel::Initialize(uint64_t seed) {
  std::fill(params_.begin(), params_.end(), 0.0);
  std::mt19937_64 rng(seed);
  nn::HeInit(params_, layout_.slot(slots_.lift_w), num_mel_bins_, rng);
  nn::HeInit(params_, layout_.slot(slots_.conv1_w), kConvKernel * kLiftChannels,
             rng);
  nn::HeInit(params_, layout_.slot(slots_.conv2_w), kConvKernel * kLiftChannels,
             rng);
  nn::HeInit(params_, layout_.slot(slots_.fc1_w), kPoolDim, rng);
  nn::HeInit(params_, layout_.slot(slots_.fc2_w), kHiddenDim, rng);
}

uint64_t EstimatorModel::ArchitectureHash() const {
  return Fnv1a64("voxface-estimator-v1;" + layout_.Describe());
}

HeadOutputs EstimatorModel::Forward(const Eigen::MatrixXd& segment,
                                    int min_frames) const {
  const int need = std::max(min_frames, ArchitectureMinFrames());
  if (segment.rows() < need) {
    throw Error("segment has " + std::to_string(segment.rows()) +
                " frames; at least " + std::to_string(need) + " required");
  }
  const Eigen::MatrixXd* one[] = {&segment};
  EncoderPass pass(*this, one);
  return pass.outputs();
}

EncoderPass::EncoderPass(const EstimatorModel& model,
                         std::span<const Eigen::MatrixXd* const> segments)
    : model_(model) {
  using nn::Mat;
  using nn::Vec;
  batch_ = static_cast<int>(segments.size());
  if (batch_ == 0) throw Error("empty batch");
  frames_ = static_cast<int>(segments[0]->rows());
  frames1_ = ConvOutputLength(frames_);
  frames2_ = ConvOutputLength(frames1_);
  if (frames2_ < 1) {
    throw Error("segment of " + std::to_string(frames_) +
                " frames is too short for the encoder");
  }
  const int bins = model.num_mel_bins();
  input_.resize(batch_ * frames_, bins);
  for (int b = 0; b < batch_; ++b) {
    const Eigen::MatrixXd& s = *segments[b];
    if (s.rows() != frames_ || s.cols() != bins) {
      throw Error("batch segments must share shape F x " + std::to_string(bins));
    }
    input_.middleRows(b * frames_, frames_) = s;
  }
  const auto p = model.params();
  const auto& L = model.layout();
  const auto& S = model.slots();

  lift_.noalias() = input_ * Mat(p, L.slot(S.lift_w)).transpose();
  lift_.rowwise() += Vec(p, L.slot(S.lift_b)).transpose();

  cols1_ = Im2Col(lift_, batch_, frames_, frames1_);
  z1_.noalias() = cols1_ * Mat(p, L.slot(S.conv1_w)).transpose();
  z1_.rowwise() += Vec(p, L.slot(S.conv1_b)).transpose();
  a1_ = nn::Relu(z1_);

  cols2_ = Im2Col(a1_, batch_, frames1_, frames2_);
  z2_.noalias() = cols2_ * Mat(p, L.slot(S.conv2_w)).transpose();
  z2_.rowwise() += Vec(p, L.slot(S.conv2_b)).transpose();
  a2_ = nn::Relu(z2_);

  pool_mean_.resize(batch_, kLiftChannels);
  pool_std_.resize(batch_, kLiftChannels);
  for (int b = 0; b < batch_; ++b) {
    const auto block = a2_.middleRows(b * frames2_, frames2_);
    const Eigen::RowVectorXd mu = block.colwise().mean();
    pool_mean_.row(b) = mu;
    pool_std_.row(b) =
        ((block.rowwise() - mu).array().square().colwise().mean() +
         kPoolStdEpsilon)
            .sqrt();
  }
  pooled_.resize(batch_, kPoolDim);
  pooled_ << pool_mean_, pool_std_;

  z3_.noalias() = pooled_ * Mat(p, L.slot(S.fc1_w)).transpose();
  z3_.rowwise() += Vec(p, L.slot(S.fc1_b)).transpose();
  a3_ = nn::Relu(z3_);
  z4_.noalias() = a3_ * Mat(p, L.slot(S.fc2_w)).transpose();
  z4_.rowwise() += Vec(p, L.slot(S.fc2_b)).transpose();
  out_.code = nn::Relu(z4_);

  out_.means.noalias() = out_.code * Mat(p, L.slot(S.mean_w)).transpose();
  out_.means.rowwise() += Vec(p, L.slot(S.mean_b)).transpose();
  raw_log_var_.noalias() = out_.code * Mat(p, L.slot(S.var_w)).transpose();
  raw_log_var_.rowwise() += Vec(p, L.slot(S.var_b)).transpose();
  out_.log_variances =
      raw_log_var_.cwiseMax(-kLogVarianceClamp).cwiseMin(kLogVarianceClamp);
  out_.variances = out_.log_variances.array().exp().matrix();
}

void EncoderPass::Backward(const Eigen::MatrixXd& d_means,
                           const Eigen::MatrixXd& d_log_variances,
                           const Eigen::MatrixXd* d_code,
                           std::span<double> grads) const {
  using nn::Mat;
  using nn::Vec;
  const auto p = model_.params();
  const auto& L = model_.layout();
  const auto& S = model_.slots();
  if (grads.size() != p.size()) throw Error("gradient buffer size mismatch");

  const Eigen::MatrixXd d_lv =
      (raw_log_var_.array().abs() <= kLogVarianceClamp)
          .select(d_log_variances, 0.0);

  Mat(grads, L.slot(S.mean_w)).noalias() += d_means.transpose() * out_.code;
  Vec(grads, L.slot(S.mean_b)) += d_means.colwise().sum().transpose();
  Mat(grads, L.slot(S.var_w)).noalias() += d_lv.transpose() * out_.code;
  Vec(grads, L.slot(S.var_b)) += d_lv.colwise().sum().transpose();

  Eigen::MatrixXd d_e = d_means * Mat(p, L.slot(S.mean_w));
  d_e.noalias() += d_lv * Mat(p, L.slot(S.var_w));
  if (d_code != nullptr) d_e += *d_code;

  const Eigen::MatrixXd d_z4 = nn::ReluBackward(d_e, z4_);
  Mat(grads, L.slot(S.fc2_w)).noalias() += d_z4.transpose() * a3_;
  Vec(grads, L.slot(S.fc2_b)) += d_z4.colwise().sum().transpose();
  const Eigen::MatrixXd d_z3 =
      nn::ReluBackward(d_z4 * Mat(p, L.slot(S.fc2_w)), z3_);
  Mat(grads, L.slot(S.fc1_w)).noalias() += d_z3.transpose() * pooled_;
  Vec(grads, L.slot(S.fc1_b)) += d_z3.colwise().sum().transpose();
  const Eigen::MatrixXd d_pool = d_z3 * Mat(p, L.slot(S.fc1_w));

  Eigen::MatrixXd d_a2(a2_.rows(), a2_.cols());
  const double inv_f2 = 1.0 / frames2_;
  for (int b = 0; b < batch_; ++b) {
    const auto block = a2_.middleRows(b * frames2_, frames2_);
    const Eigen::RowVectorXd d_mean = d_pool.block(b, 0, 1, kLiftChannels);
    const Eigen::RowVectorXd d_std =
        d_pool.block(b, kLiftChannels, 1, kLiftChannels);
    const Eigen::RowVectorXd scale =
        d_std.array() / pool_std_.row(b).array() * inv_f2;
    d_a2.middleRows(b * frames2_, frames2_) =
        ((block.rowwise() - pool_mean_.row(b)).array().rowwise() *
         scale.array())
            .matrix()
            .rowwise() +
        d_mean * inv_f2;
  }

  const Eigen::MatrixXd d_z2 = nn::ReluBackward(d_a2, z2_);
  Mat(grads, L.slot(S.conv2_w)).noalias() += d_z2.transpose() * cols2_;
  Vec(grads, L.slot(S.conv2_b)) += d_z2.colwise().sum().transpose();
  Eigen::MatrixXd d_a1 = Eigen::MatrixXd::Zero(a1_.rows(), a1_.cols());
  Col2ImAdd(d_z2 * Mat(p, L.slot(S.conv2_w)), batch_, frames1_, frames2_, d_a1);

  const Eigen::MatrixXd d_z1 = nn::ReluBackward(d_a1, z1_);
  Mat(grads, L.slot(S.conv1_w)).noalias() += d_z1.transpose() * cols1_;
  Vec(grads, L.slot(S.conv1_b)) += d_z1.colwise().sum().transpose();
  Eigen::MatrixXd d_lift = Eigen::MatrixXd::Zero(lift_.rows(), lift_.cols());
  Col2ImAdd(d_z1 * Mat(p, L.slot(S.conv1_w)), batch_, frames_, frames1_,
            d_lift);

  Mat(grads, L.slot(S.lift_w)).noalias() += d_lift.transpose() * input_;
  Vec(grads, L.slot(S.lift_b)) += d_lift.colwise().sum().transpose();
}

double LossPlain(double mean_pred, double target) {
  const double r = mean_pred - target;
  return r * r;
}

double LossUncertainty(double mean_pred, double variance, double target) {
  if (!(variance > 0.0)) {
    throw Error("uncertainty loss needs a positive variance");
  }
  const double r = mean_pred - target;
  return r * r / variance + std::log(variance);
}

AggregatedPrediction Aggregate(const Eigen::MatrixXd& means,
                               const Eigen::MatrixXd& variances) {
  if (means.rows() == 0) throw Error("aggregation needs at least one segment");
  if (means.rows() != variances.rows() || means.cols() != variances.cols()) {
    throw Error("aggregation: means and variances differ in shape");
  }
  if (!((variances.array() > 0.0).all())) {
    throw Error("aggregation: variances must be positive");
  }
  const Eigen::ArrayXXd precision = variances.array().inverse();
  AggregatedPrediction out;
  out.num_segments = static_cast<int>(means.rows());
  out.variance = precision.colwise().sum().inverse().matrix().transpose();
  out.mean = ((precision * means.array()).colwise().sum().transpose() *
              out.variance.array())
                 .matrix();
  out.calibrated = out.variance * static_cast<double>(out.num_segments);
  return out;
}

}  // namespace voxface
