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

// Small building blocks for the hand-written networks: a flat parameter
// buffer with matrix views and SGD with momentum and weight decay.

#ifndef VOXFACE_NN_H_
#define VOXFACE_NN_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace voxface::nn {

using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

// Offsets of one named tensor inside a flat buffer. Matrices are stored
// column-major with shape rows x cols; vectors have cols == 1.
struct Slot {
  std::string name;
  size_t offset = 0;
  int rows = 0;
  int cols = 0;

  size_t size() const { return static_cast<size_t>(rows) * cols; }
};

class Layout {
 public:
  // Returns the slot index.
  int Add(std::string name, int rows, int cols = 1);
  const Slot& slot(int i) const { return slots_[static_cast<size_t>(i)]; }
  size_t size() const { return size_; }
  const std::vector<Slot>& slots() const { return slots_; }
  // Order-sensitive description, hashed into checkpoints.
  std::string Describe() const;

 private:
  std::vector<Slot> slots_;
  size_t size_ = 0;
};

inline MatrixMap Mat(std::span<double> buf, const Slot& s) {
  return MatrixMap(buf.data() + s.offset, s.rows, s.cols);
}
inline ConstMatrixMap Mat(std::span<const double> buf, const Slot& s) {
  return ConstMatrixMap(buf.data() + s.offset, s.rows, s.cols);
}
inline VectorMap Vec(std::span<double> buf, const Slot& s) {
  return VectorMap(buf.data() + s.offset, static_cast<Eigen::Index>(s.size()));
}
inline ConstVectorMap Vec(std::span<const double> buf, const Slot& s) {
  return ConstVectorMap(buf.data() + s.offset,
                        static_cast<Eigen::Index>(s.size()));
}

// He-normal fill for a weight slot with the given fan-in.
void HeInit(std::span<double> buf, const Slot& s, int fan_in,
            std::mt19937_64& rng);

inline Eigen::MatrixXd Relu(const Eigen::MatrixXd& z) {
  return z.cwiseMax(0.0);
}
// grad * 1[z > 0]
inline Eigen::MatrixXd ReluBackward(const Eigen::MatrixXd& grad,
                                    const Eigen::MatrixXd& z) {
  return (z.array() > 0.0).select(grad, 0.0);
}

struct SgdConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  // Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;
};

class SgdMomentum {
 public:
  SgdMomentum(size_t size, SgdConfig config);
  // grad += weight_decay * param, clip, v = momentum * v + grad,
  // param -= lr * v.
  void Step(std::span<double> params, std::span<double> grads);

 private:
  SgdConfig config_;
  std::vector<double> velocity_;
};

}  // namespace voxface::nn

#endif  // VOXFACE_NN_H_
