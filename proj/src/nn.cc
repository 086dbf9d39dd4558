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

#include "voxface/nn.h"

#include <cmath>

#include "voxface/common.h"

namespace voxface::nn {

int Layout::Add(std::string name, int rows, int cols) {
  Slot s{std::move(name), size_, rows, cols};
  size_ += s.size();
  slots_.push_back(std::move(s));
  return static_cast<int>(slots_.size()) - 1;
}

std::string Layout::Describe() const {
  std::string out;
  for (const auto& s : slots_) {
    out += s.name + ':' + std::to_string(s.rows) + 'x' + std::to_string(s.cols) +
           ';';
  }
  return out;
}

void HeInit(std::span<double> buf, const Slot& s, int fan_in,
            std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (size_t i = 0; i < s.size(); ++i) buf[s.offset + i] = dist(rng);
}

SgdMomentum::SgdMomentum(size_t size, SgdConfig config)
    : config_(config), velocity_(size, 0.0) {
  if (!(config.learning_rate > 0.0) || config.momentum < 0.0 ||
      config.weight_decay < 0.0) {
    throw Error("invalid SGD hyperparameters");
  }
}

void SgdMomentum::Step(std::span<double> params, std::span<double> grads) {
  if (params.size() != velocity_.size() || grads.size() != velocity_.size()) {
    throw Error("SGD buffer size mismatch");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    grads[i] += config_.weight_decay * params[i];
  }
  if (config_.clip_norm > 0.0) {
    double sq = 0.0;
    for (double g : grads) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > config_.clip_norm) {
      const double scale = config_.clip_norm / norm;
      for (double& g : grads) g *= scale;
    }
  }
  for (size_t i = 0; i < params.size(); ++i) {
    velocity_[i] = config_.momentum * velocity_[i] + grads[i];
    params[i] -= config_.learning_rate * velocity_[i];
  }
}

}  // namespace voxface::nn
