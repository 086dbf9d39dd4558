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

#include "voxface/phonatory.h"

#include <cmath>

#include "voxface/common.h"

namespace voxface {

DiffusionSchedule DiffusionSchedule::Linear(int steps, double beta_start,
                                            double beta_end) {
  if (steps < 1) throw Error("diffusion schedule needs at least one step");
  std::vector<double> betas(static_cast<size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    betas[i] = steps == 1 ? beta_start
                          : beta_start + (beta_end - beta_start) * i / (steps - 1);
  }
  return DiffusionSchedule(std::move(betas));
}

DiffusionSchedule::DiffusionSchedule(std::vector<double> betas)
    : betas_(std::move(betas)) {
  if (betas_.empty()) throw Error("diffusion schedule needs at least one step");
  double prod = 1.0;
  for (double b : betas_) {
    if (!(b > 0.0 && b < 1.0)) throw Error("diffusion betas must lie in (0, 1)");
    prod *= 1.0 - b;
    alpha_bars_.push_back(prod);
  }
}

size_t DiffusionSchedule::Index(int t) const {
  if (t < 1 || t > steps()) {
    throw Error("diffusion step " + std::to_string(t) + " outside [1, " +
                std::to_string(steps()) + "]");
  }
  return static_cast<size_t>(t - 1);
}

Eigen::VectorXd ForwardSample(const DiffusionSchedule& schedule,
                              const Eigen::VectorXd& x0, int t,
                              const Eigen::VectorXd& noise) {
  const double ab = schedule.alpha_bar(t);
  if (x0.size() != noise.size()) throw Error("x0 and noise differ in shape");
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * noise;
}

Eigen::VectorXd MarkovStep(const DiffusionSchedule& schedule,
                           const Eigen::VectorXd& previous, int t,
                           const Eigen::VectorXd& noise) {
  const double b = schedule.beta(t);
  if (previous.size() != noise.size()) throw Error("shape mismatch");
  return std::sqrt(1.0 - b) * previous + std::sqrt(b) * noise;
}

Eigen::VectorXd TimeEmbedding(int t) {
  Eigen::VectorXd e(kTimeEmbeddingDim);
  const int half = kTimeEmbeddingDim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / half);
    e[2 * i] = std::sin(t * freq);
    e[2 * i + 1] = std::cos(t * freq);
  }
  return e;
}

Eigen::VectorXd NormalizedWindow(std::span<const double> samples,
                                 size_t offset) {
  if (offset + kWaveWindow > samples.size()) {
    throw Error("waveform window exceeds recording");
  }
  Eigen::VectorXd w =
      Eigen::Map<const Eigen::VectorXd>(samples.data() + offset, kWaveWindow);
  w.array() -= w.mean();
  const double sd = std::sqrt(w.squaredNorm() / kWaveWindow);
  if (sd > 0.0) {
    w /= sd;
  } else {
    w.setZero();
  }
  return w;
}

Denoiser::Denoiser(int code_dim) : code_dim_(code_dim) {
  const int in = kWaveWindow + kTimeEmbeddingDim + code_dim;
  slots_.w1 = layout_.Add("w1", kDenoiserHidden, in);
  slots_.b1 = layout_.Add("b1", kDenoiserHidden);
  slots_.w2 = layout_.Add("w2", kDenoiserHidden, kDenoiserHidden);
  slots_.b2 = layout_.Add("b2", kDenoiserHidden);
  slots_.w3 = layout_.Add("w3", kWaveWindow, kDenoiserHidden);
  slots_.b3 = layout_.Add("b3", kWaveWindow);
  params_.assign(layout_.size(), 0.0);
}

void Denoiser::Initialize(uint64_t seed) {
  std::fill(params_.begin(), params_.end(), 0.0);
  std::mt19937_64 rng(seed);
  nn::HeInit(params_, layout_.slot(slots_.w1),
             kWaveWindow + kTimeEmbeddingDim + code_dim_, rng);
  nn::HeInit(params_, layout_.slot(slots_.w2), kDenoiserHidden, rng);
  // Output layer scaled down so initial predictions are small.
  std::normal_distribution<double> dist(0.0, 0.1 / std::sqrt(kDenoiserHidden));
  const auto& s = layout_.slot(slots_.w3);
  for (size_t i = 0; i < s.size(); ++i) params_[s.offset + i] = dist(rng);
}

Eigen::MatrixXd Denoiser::Forward(const Eigen::MatrixXd& noisy,
                                  std::span<const int> steps,
                                  const Eigen::MatrixXd& codes) const {
  return Pass(*this, noisy, steps, codes).output();
}

Denoiser::Pass::Pass(const Denoiser& model, const Eigen::MatrixXd& noisy,
                     std::span<const int> steps, const Eigen::MatrixXd& codes)
    : model_(model) {
  using nn::Mat;
  using nn::Vec;
  const Eigen::Index b = noisy.rows();
  if (noisy.cols() != kWaveWindow || codes.rows() != b ||
      codes.cols() != model.code_dim_ ||
      static_cast<Eigen::Index>(steps.size()) != b) {
    throw Error("denoiser input shape mismatch");
  }
  input_.resize(b, kWaveWindow + kTimeEmbeddingDim + model.code_dim_);
  for (Eigen::Index i = 0; i < b; ++i) {
    input_.block(i, 0, 1, kWaveWindow) = noisy.row(i);
    input_.block(i, kWaveWindow, 1, kTimeEmbeddingDim) =
        TimeEmbedding(steps[static_cast<size_t>(i)]).transpose();
    input_.block(i, kWaveWindow + kTimeEmbeddingDim, 1, model.code_dim_) =
        codes.row(i);
  }
  const auto p = model.params();
  const auto& L = model.layout_;
  const auto& S = model.slots_;
  z1_.noalias() = input_ * Mat(p, L.slot(S.w1)).transpose();
  z1_.rowwise() += Vec(p, L.slot(S.b1)).transpose();
  a1_ = nn::Relu(z1_);
  z2_.noalias() = a1_ * Mat(p, L.slot(S.w2)).transpose();
  z2_.rowwise() += Vec(p, L.slot(S.b2)).transpose();
  a2_ = nn::Relu(z2_);
  out_.noalias() = a2_ * Mat(p, L.slot(S.w3)).transpose();
  out_.rowwise() += Vec(p, L.slot(S.b3)).transpose();
}

Eigen::MatrixXd Denoiser::Pass::Backward(const Eigen::MatrixXd& d_out,
                                         std::span<double> grads) const {
  using nn::Mat;
  using nn::Vec;
  const auto p = model_.params();
  const auto& L = model_.layout_;
  const auto& S = model_.slots_;
  if (grads.size() != p.size()) throw Error("gradient buffer size mismatch");
  Mat(grads, L.slot(S.w3)).noalias() += d_out.transpose() * a2_;
  Vec(grads, L.slot(S.b3)) += d_out.colwise().sum().transpose();
  const Eigen::MatrixXd d_z2 =
      nn::ReluBackward(d_out * Mat(p, L.slot(S.w3)), z2_);
  Mat(grads, L.slot(S.w2)).noalias() += d_z2.transpose() * a1_;
  Vec(grads, L.slot(S.b2)) += d_z2.colwise().sum().transpose();
  const Eigen::MatrixXd d_z1 =
      nn::ReluBackward(d_z2 * Mat(p, L.slot(S.w2)), z1_);
  Mat(grads, L.slot(S.w1)).noalias() += d_z1.transpose() * input_;
  Vec(grads, L.slot(S.b1)) += d_z1.colwise().sum().transpose();
  const Eigen::MatrixXd d_in = d_z1 * Mat(p, L.slot(S.w1));
  return d_in.rightCols(model_.code_dim_);
}

DiffusionLossResult DiffusionLossFixed(const Denoiser& denoiser,
                                       const DiffusionSchedule& schedule,
                                       const Eigen::MatrixXd& x0,
                                       const Eigen::MatrixXd& codes,
                                       std::span<const int> steps,
                                       const Eigen::MatrixXd& noise,
                                       std::span<double> grads) {
  const Eigen::Index b = x0.rows();
  if (x0.cols() != kWaveWindow || noise.rows() != b ||
      noise.cols() != kWaveWindow) {
    throw Error("diffusion loss: window length must be " +
                std::to_string(kWaveWindow));
  }
  Eigen::MatrixXd noisy(b, kWaveWindow);
  for (Eigen::Index i = 0; i < b; ++i) {
    noisy.row(i) = ForwardSample(schedule, x0.row(i).transpose(),
                                 steps[static_cast<size_t>(i)],
                                 noise.row(i).transpose())
                       .transpose();
  }
  Denoiser::Pass pass(denoiser, noisy, steps, codes);
  const Eigen::MatrixXd diff = pass.output() - noise;
  const double n = static_cast<double>(diff.size());
  DiffusionLossResult out;
  out.loss = diff.cwiseAbs().sum() / n;
  if (!grads.empty()) {
    const Eigen::MatrixXd d_out = diff.array().sign().matrix() / n;
    out.d_codes = pass.Backward(d_out, grads);
  }
  return out;
}

DiffusionLossResult DiffusionLoss(const Denoiser& denoiser,
                                  const DiffusionSchedule& schedule,
                                  const Eigen::MatrixXd& x0,
                                  const Eigen::MatrixXd& codes,
                                  std::mt19937_64& rng,
                                  std::span<double> grads) {
  const Eigen::Index b = x0.rows();
  std::uniform_int_distribution<int> step_dist(1, schedule.steps());
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<int> steps(static_cast<size_t>(b));
  Eigen::MatrixXd noise(b, x0.cols());
  for (Eigen::Index i = 0; i < b; ++i) {
    steps[static_cast<size_t>(i)] = step_dist(rng);
    for (Eigen::Index j = 0; j < noise.cols(); ++j) noise(i, j) = normal(rng);
  }
  return DiffusionLossFixed(denoiser, schedule, x0, codes, steps, noise, grads);
}

}  // namespace voxface
