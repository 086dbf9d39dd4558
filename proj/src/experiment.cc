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

#include "voxface/experiment.h"

#include "voxface/common.h"

namespace voxface {

const std::vector<Example>& ExperimentData::examples(Split split) const {
  switch (split) {
    case Split::kTrain: return train;
    case Split::kSelect: return select;
    case Split::kEval: return eval;
    case Split::kTest: return test;
  }
  return train;
}

const std::vector<int>& ExperimentData::indices(Split split) const {
  switch (split) {
    case Split::kTrain: return train_index;
    case Split::kSelect: return select_index;
    case Split::kEval: return eval_index;
    case Split::kTest: return test_index;
  }
  return train_index;
}

ExperimentData PrepareExperiment(const Dataset& dataset,
                                 const Eigen::MatrixXd& ams,
                                 const ExperimentOptions& options) {
  if (ams.rows() != dataset.size() ||
      ams.cols() != static_cast<Eigen::Index>(dataset.am_definitions.size())) {
    throw Error("AM table does not match the dataset");
  }
  if (!options.phoneme.empty() && !dataset.has_phonemes()) {
    throw Error("phoneme-level analysis needs phoneme annotations");
  }
  ExperimentData data;
  for (const auto& d : dataset.am_definitions) data.am_ids.push_back(d.id);
  data.ams = ams;
  const std::vector<int> train = dataset.Indices(Split::kTrain);
  if (train.empty()) throw Error("training split D_t is empty");

  std::vector<Eigen::MatrixXd> train_frames;
  Eigen::MatrixXd train_ams(static_cast<Eigen::Index>(train.size()), ams.cols());
  for (size_t i = 0; i < train.size(); ++i) {
    train_frames.push_back(dataset.features[static_cast<size_t>(train[i])]);
    train_ams.row(static_cast<Eigen::Index>(i)) = ams.row(train[i]);
  }
  data.mel = MelNormalizer::Fit(train_frames);
  data.am_norm = AmNormalization::Fit(train_ams, data.am_ids);

  const bool waves = options.waveforms && dataset.has_waveforms();
  const std::pair<std::vector<Example>*, std::vector<int>*> targets[] = {
      {&data.train, &data.train_index},
      {&data.select, &data.select_index},
      {&data.eval, &data.eval_index},
      {&data.test, &data.test_index}};
  const Split order[] = {Split::kTrain, Split::kSelect, Split::kEval, Split::kTest};
  for (int si = 0; si < 4; ++si) {
    const Split split = order[si];
    auto& out = *targets[si].first;
    auto& idx = *targets[si].second;
    for (int s : dataset.Indices(split)) {
      const auto su = static_cast<size_t>(s);
      Example ex;
      ex.speaker = dataset.speakers[su];
      ex.frames = std::make_shared<const Eigen::MatrixXd>(
          data.mel.Apply(dataset.features[su]));
      ex.targets = data.am_norm.Apply(ams.row(s).transpose());
      if (!options.phoneme.empty()) {
        for (const auto& seg : dataset.phonemes[su]) {
          if (seg.label == options.phoneme) ex.spans.push_back(seg);
        }
        if (ex.spans.empty()) continue;
      }
      if (waves) {
        ex.waveform = std::make_shared<const std::vector<double>>(dataset.waveforms[su]);
      }
      out.push_back(std::move(ex));
      idx.push_back(s);
    }
  }
  return data;
}

}  // namespace voxface
