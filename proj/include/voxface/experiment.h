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

// Turns a dataset into normalized training examples per split.

#ifndef VOXFACE_EXPERIMENT_H_
#define VOXFACE_EXPERIMENT_H_

#include <string>
#include <vector>

#include <Eigen/Core>

#include "voxface/dataset.h"
#include "voxface/features.h"
#include "voxface/geometry.h"
#include "voxface/training.h"

namespace voxface {

struct ExperimentOptions {
  // When set, every example is restricted to the spans carrying this
  // phoneme label; speakers without it are dropped.
  std::string phoneme;
  bool waveforms = true;
};

struct ExperimentData {
  std::vector<std::string> am_ids;
  MelNormalizer mel;           // fit on D_t frames
  AmNormalization am_norm;     // fit on D_t AMs
  Eigen::MatrixXd ams;         // raw AMs, dataset speaker order
  std::vector<Example> train, select, eval, test;
  // Dataset speaker index of each example, per split.
  std::vector<int> train_index, select_index, eval_index, test_index;
  const std::vector<Example>& examples(Split split) const;
  const std::vector<int>& indices(Split split) const;
};

// `ams` holds the raw AM values of every dataset speaker (speakers x K).
ExperimentData PrepareExperiment(const Dataset& dataset,
                                 const Eigen::MatrixXd& ams,
                                 const ExperimentOptions& options = {});

}  // namespace voxface

#endif  // VOXFACE_EXPERIMENT_H_
