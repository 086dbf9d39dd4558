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

#include "voxface/training.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "voxface/common.h"

namespace voxface {

namespace {

constexpr std::string_view kCheckpointMagic = "VFCKPT01";

// Indices of equal-length segments, keyed by length.
std::map<int, std::vector<int>> GroupByLength(std::span<const Segment> spans) {
  std::map<int, std::vector<int>> groups;
  for (size_t i = 0; i < spans.size(); ++i) {
    groups[spans[i].length()].push_back(static_cast<int>(i));
  }
  return groups;
}

struct BatchForward {
  HeadOutputs out;
  std::vector<std::unique_ptr<EncoderPass>> passes;
  std::vector<std::vector<int>> rows;  // batch rows of each pass
};

BatchForward ForwardSegments(const EstimatorModel& model,
                             std::span<const Eigen::MatrixXd> segments,
                             std::span<const Segment> spans) {
  const int b = static_cast<int>(segments.size());
  const int k = model.num_ams();
  BatchForward f;
  f.out.code.resize(b, kVoiceCodeDim);
  f.out.means.resize(b, k);
  f.out.log_variances.resize(b, k);
  f.out.variances.resize(b, k);
  for (auto& [len, idx] : GroupByLength(spans)) {
    std::vector<const Eigen::MatrixXd*> ptrs;
    for (int i : idx) ptrs.push_back(&segments[static_cast<size_t>(i)]);
    auto pass = std::make_unique<EncoderPass>(model, ptrs);
    const HeadOutputs& o = pass->outputs();
    for (size_t j = 0; j < idx.size(); ++j) {
      const auto r = static_cast<Eigen::Index>(j);
      f.out.code.row(idx[j]) = o.code.row(r);
      f.out.means.row(idx[j]) = o.means.row(r);
      f.out.log_variances.row(idx[j]) = o.log_variances.row(r);
      f.out.variances.row(idx[j]) = o.variances.row(r);
    }
    f.passes.push_back(std::move(pass));
    f.rows.push_back(idx);
  }
  return f;
}

Eigen::MatrixXd GatherRows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (size_t j = 0; j < rows.size(); ++j) {
    out.row(static_cast<Eigen::Index>(j)) = m.row(rows[j]);
  }
  return out;
}

void WriteString(std::ostream& out, const std::string& s) {
  binio::WriteU32(out, static_cast<uint32_t>(s.size()));
  binio::WriteBytes(out, s);
}

std::string ReadString(std::istream& in) {
  return binio::ReadBytes(in, binio::ReadU32(in));
}

void WriteDoubles(std::ostream& out, std::span<const double> v) {
  binio::WriteU64(out, v.size());
  for (double x : v) binio::WriteF64(out, x);
}

std::vector<double> ReadDoubles(std::istream& in) {
  const uint64_t n = binio::ReadU64(in);
  std::vector<double> v(n);
  for (auto& x : v) x = binio::ReadF64(in);
  return v;
}

void WriteVector(std::ostream& out, const Eigen::VectorXd& v) {
  WriteDoubles(out, std::span<const double>(v.data(), static_cast<size_t>(v.size())));
}

Eigen::VectorXd ReadVector(std::istream& in) {
  auto v = ReadDoubles(in);
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

TrainingConfig DeskScaleTrainingConfig() {
  TrainingConfig c;
  c.sgd = {0.01, 0.9, 0.0005, 5.0};
  c.batch_size = 16;
  c.iterations = 100;
  c.warmup_iterations = 20;
  c.crop = {20, 26};
  c.eval_chunk_frames = 40;
  c.select_every = 50;
  return c;
}

EstimatorLoss ComputeEstimatorLoss(const HeadOutputs& out,
                                   const Eigen::MatrixXd& targets,
                                   bool variance_frozen) {
  if (targets.rows() != out.means.rows() || targets.cols() != out.means.cols()) {
    throw Error("targets shape does not match predictions");
  }
  const double scale = 1.0 / static_cast<double>(targets.rows());
  const Eigen::ArrayXXd r = (out.means - targets).array();
  EstimatorLoss loss;
  if (variance_frozen) {
    loss.value = r.square().sum() * scale;
    loss.d_means = (2.0 * scale * r).matrix();
    loss.d_log_variances = Eigen::MatrixXd::Zero(r.rows(), r.cols());
  } else {
    const Eigen::ArrayXXd inv_var = out.variances.array().inverse();
    loss.value = (r.square() * inv_var + out.log_variances.array()).sum() * scale;
    loss.d_means = (2.0 * scale * r * inv_var).matrix();
    loss.d_log_variances = (scale * (1.0 - r.square() * inv_var)).matrix();
  }
  return loss;
}

StepResult JointStep(const EstimatorModel& model, const Denoiser* denoiser,
                     const DiffusionSchedule* schedule,
                     std::span<const BatchItem> batch, double gamma,
                     bool variance_frozen, std::mt19937_64& rng,
                     bool estimator_terms) {
  if (batch.empty()) throw Error("empty training batch");
  const bool diffusion = denoiser != nullptr && gamma != 0.0;
  if (diffusion && schedule == nullptr) {
    throw Error("diffusion constraint needs a schedule");
  }
  const int b = static_cast<int>(batch.size());
  std::vector<Eigen::MatrixXd> segments;
  std::vector<Segment> spans;
  Eigen::MatrixXd targets(b, model.num_ams());
  for (int i = 0; i < b; ++i) {
    const BatchItem& item = batch[static_cast<size_t>(i)];
    if (item.voice == nullptr) throw Error("batch item without a voice example");
    if (diffusion) {
      if (item.partner == nullptr || item.partner->speaker != item.voice->speaker) {
        throw Error("diffusion target speaker '" +
                    (item.partner ? item.partner->speaker : std::string("<none>")) +
                    "' does not match voice speaker '" + item.voice->speaker + "'");
      }
    }
    segments.push_back(SliceFrames(*item.voice->frames, item.span));
    spans.push_back(item.span);
    targets.row(i) = item.voice->targets.transpose();
  }

  StepResult result;
  result.model_grads.assign(model.num_params(), 0.0);
  BatchForward fwd = ForwardSegments(model, segments, spans);

  Eigen::MatrixXd d_means = Eigen::MatrixXd::Zero(b, model.num_ams());
  Eigen::MatrixXd d_lv = Eigen::MatrixXd::Zero(b, model.num_ams());
  if (estimator_terms) {
    EstimatorLoss loss = ComputeEstimatorLoss(fwd.out, targets, variance_frozen);
    result.estimator_loss = loss.value;
    d_means = std::move(loss.d_means);
    d_lv = std::move(loss.d_log_variances);
  }

  Eigen::MatrixXd d_code = Eigen::MatrixXd::Zero(b, kVoiceCodeDim);
  if (diffusion) {
    Eigen::MatrixXd x0(b, kWaveWindow);
    for (int i = 0; i < b; ++i) {
      const BatchItem& item = batch[static_cast<size_t>(i)];
      if (!item.partner->waveform) {
        throw Error("speaker '" + item.partner->speaker + "' has no waveform");
      }
      x0.row(i) = NormalizedWindow(*item.partner->waveform, item.window_offset)
                      .transpose();
    }
    result.denoiser_grads.assign(denoiser->num_params(), 0.0);
    DiffusionLossResult dl = DiffusionLoss(*denoiser, *schedule, x0, fwd.out.code,
                                           rng, result.denoiser_grads);
    result.diffusion_loss = dl.loss;
    for (double& g : result.denoiser_grads) g *= gamma;
    d_code = gamma * dl.d_codes;
  }
  result.total = result.estimator_loss + gamma * result.diffusion_loss;

  for (size_t p = 0; p < fwd.passes.size(); ++p) {
    const auto& rows = fwd.rows[p];
    const Eigen::MatrixXd dc = GatherRows(d_code, rows);
    fwd.passes[p]->Backward(GatherRows(d_means, rows), GatherRows(d_lv, rows),
                            &dc, result.model_grads);
  }
  return result;
}

AggregatedPrediction PredictExample(const EstimatorModel& model,
                                    const Example& example,
                                    const TrainingConfig& config) {
  if (!example.frames) throw Error("example '" + example.speaker + "' has no frames");
  const int f = static_cast<int>(example.frames->rows());
  std::vector<Segment> spans = example.spans;
  if (spans.empty()) {
    if (f < config.min_frames) {
      throw Error("recording '" + example.speaker + "' has " + std::to_string(f) +
                  " frames; at least " + std::to_string(config.min_frames) +
                  " required");
    }
    spans = ConsecutiveSpans(example.speaker, f, config.eval_chunk_frames,
                             config.min_frames);
  }
  std::vector<Eigen::MatrixXd> segments;
  for (const auto& s : spans) {
    if (s.length() < std::max(config.min_frames, ArchitectureMinFrames())) {
      throw Error("segment of " + std::to_string(s.length()) +
                  " frames is shorter than the minimum");
    }
    segments.push_back(SliceFrames(*example.frames, s));
  }
  BatchForward fwd = ForwardSegments(model, segments, spans);
  return Aggregate(fwd.out.means, fwd.out.variances);
}

double MeanNormalizedError(const EstimatorModel& model,
                           std::span<const Example> examples,
                           const Eigen::VectorXd& chance,
                           const TrainingConfig& config) {
  if (examples.empty()) throw Error("empty evaluation split");
  Eigen::VectorXd err = Eigen::VectorXd::Zero(chance.size());
  Eigen::VectorXd base = Eigen::VectorXd::Zero(chance.size());
  for (const auto& ex : examples) {
    const AggregatedPrediction p = PredictExample(model, ex, config);
    err += (p.mean - ex.targets).cwiseAbs2();
    base += (chance - ex.targets).cwiseAbs2();
  }
  double total = 0.0;
  for (Eigen::Index k = 0; k < err.size(); ++k) {
    total += base[k] > 0.0 ? err[k] / base[k] : 1.0;
  }
  return total / static_cast<double>(err.size());
}

TrainResult Train(std::span<const Example> train,
                  std::span<const Example> select,
                  const TrainingConfig& config) {
  if (train.empty()) throw Error("training split is empty");
  if (select.empty()) throw Error("model-selection split is empty");
  if (config.batch_size < 1 || config.iterations < 1) {
    throw Error("batch size and iteration count must be positive");
  }
  const int k = static_cast<int>(train[0].targets.size());
  const int bins = static_cast<int>(train[0].frames->cols());
  Eigen::VectorXd chance = Eigen::VectorXd::Zero(k);
  for (const auto& ex : train) chance += ex.targets;
  chance /= static_cast<double>(train.size());

  const PhonatoryConfig& phon = config.phonatory;
  TrainResult result{EstimatorModel(k, bins), std::nullopt, 0, 0.0, {}};
  EstimatorModel& model = result.model;
  model.Initialize(DeriveSeed(config.seed, 1, 0));
  std::optional<DiffusionSchedule> schedule;
  if (phon.enabled) {
    for (const auto& ex : train) {
      if (!ex.waveform || ex.waveform->size() < static_cast<size_t>(kWaveWindow)) {
        throw Error("diffusion constraint needs a waveform of at least " +
                    std::to_string(kWaveWindow) + " samples for speaker '" +
                    ex.speaker + "'");
      }
    }
    schedule = DiffusionSchedule::Linear(phon.steps, phon.beta_start, phon.beta_end);
    result.denoiser.emplace(kVoiceCodeDim);
    result.denoiser->Initialize(DeriveSeed(config.seed, 2, 0));
  }
  Denoiser* denoiser = result.denoiser ? &*result.denoiser : nullptr;

  nn::SgdMomentum opt(model.num_params(), config.sgd);
  std::optional<nn::SgdMomentum> opt_den;
  if (denoiser) opt_den.emplace(denoiser->num_params(), phon.sgd);

  // Separate streams so that enabling the constraint leaves the batch
  // sequence unchanged.
  std::mt19937_64 rng_batch(DeriveSeed(config.seed, 3, 0));
  std::mt19937_64 rng_diff(DeriveSeed(config.seed, 4, 0));

  auto make_batch = [&]() {
    std::uniform_int_distribution<size_t> pick(0, train.size() - 1);
    std::uniform_int_distribution<int> len_dist(config.crop.min_frames,
                                                config.crop.max_frames);
    const int len = len_dist(rng_batch);
    std::vector<BatchItem> batch(static_cast<size_t>(config.batch_size));
    for (auto& item : batch) {
      const Example& ex = train[pick(rng_batch)];
      item.voice = &ex;
      item.partner = &ex;
      if (!ex.spans.empty()) {
        std::uniform_int_distribution<size_t> s(0, ex.spans.size() - 1);
        item.span = ex.spans[s(rng_batch)];
      } else {
        const int f = static_cast<int>(ex.frames->rows());
        if (f < config.crop.min_frames) {
          throw Error("recording '" + ex.speaker + "' has " + std::to_string(f) +
                      " frames, shorter than the minimum training segment");
        }
        const int l = std::min(len, f);
        std::uniform_int_distribution<int> off(0, f - l);
        const int b0 = off(rng_batch);
        item.span = Segment{ex.speaker, b0, b0 + l, {}};
      }
      if (denoiser) {
        std::uniform_int_distribution<size_t> w(0, ex.waveform->size() - kWaveWindow);
        item.window_offset = w(rng_diff);
      }
    }
    return batch;
  };

  if (denoiser) {
    for (int it = 0; it < phon.pretrain_iterations; ++it) {
      auto batch = make_batch();
      StepResult s = JointStep(model, denoiser, &*schedule, batch, 1.0, true,
                               rng_diff, /*estimator_terms=*/false);
      opt.Step(model.params(), s.model_grads);
      opt_den->Step(denoiser->params(), s.denoiser_grads);
    }
  }

  std::vector<double> best(model.params().begin(), model.params().end());
  std::optional<std::vector<double>> best_den;
  if (denoiser) best_den.emplace(denoiser->params().begin(), denoiser->params().end());
  double best_err = std::numeric_limits<double>::infinity();
  result.loss_trace.reserve(static_cast<size_t>(config.iterations));
  const double gamma = denoiser ? phon.gamma : 0.0;
  for (int it = 1; it <= config.iterations; ++it) {
    auto batch = make_batch();
    const bool frozen = it <= config.warmup_iterations;
    StepResult s = JointStep(model, denoiser, schedule ? &*schedule : nullptr,
                             batch, gamma, frozen, rng_diff);
    if (!std::isfinite(s.total)) {
      throw Error("training diverged at iteration " + std::to_string(it));
    }
    result.loss_trace.push_back(s.estimator_loss);
    opt.Step(model.params(), s.model_grads);
    if (denoiser && !s.denoiser_grads.empty()) {
      opt_den->Step(denoiser->params(), s.denoiser_grads);
    }
    if (it % std::max(1, config.select_every) == 0 || it == config.iterations) {
      const double err = MeanNormalizedError(model, select, chance, config);
      if (err < best_err) {
        best_err = err;
        result.best_iteration = it;
        std::copy(model.params().begin(), model.params().end(), best.begin());
        if (denoiser) {
          std::copy(denoiser->params().begin(), denoiser->params().end(),
                    best_den->begin());
        }
      }
    }
  }
  std::copy(best.begin(), best.end(), model.params().begin());
  if (denoiser) {
    std::copy(best_den->begin(), best_den->end(), denoiser->params().begin());
  }
  result.best_select_error = best_err;
  return result;
}

void WriteCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  binio::WriteBytes(out, kCheckpointMagic);
  binio::WriteU64(out, ckpt.model.ArchitectureHash());
  binio::WriteU32(out, static_cast<uint32_t>(ckpt.model.num_ams()));
  binio::WriteU32(out, static_cast<uint32_t>(ckpt.model.num_mel_bins()));
  WriteDoubles(out, ckpt.model.params());
  binio::WriteU32(out, ckpt.denoiser ? 1 : 0);
  if (ckpt.denoiser) {
    if (!ckpt.schedule) throw Error("checkpoint denoiser without a schedule");
    binio::WriteU32(out, static_cast<uint32_t>(ckpt.denoiser->code_dim()));
    WriteDoubles(out, ckpt.denoiser->params());
    WriteDoubles(out, ckpt.schedule->betas());
  }
  WriteVector(out, ckpt.mel_normalizer.mean());
  WriteVector(out, ckpt.mel_normalizer.stddev());
  const AmNormalization& an = ckpt.am_normalization;
  binio::WriteU32(out, static_cast<uint32_t>(an.ids().size()));
  for (const auto& id : an.ids()) WriteString(out, id);
  WriteVector(out, an.mean());
  WriteVector(out, an.stddev());
  WriteString(out, ckpt.provenance);
}

Checkpoint ReadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  binio::ExpectMagic(in, kCheckpointMagic, "checkpoint");
  const uint64_t hash = binio::ReadU64(in);
  const uint32_t k = binio::ReadU32(in);
  const uint32_t bins = binio::ReadU32(in);
  Checkpoint ckpt;
  ckpt.model = EstimatorModel(static_cast<int>(k), static_cast<int>(bins));
  if (ckpt.model.ArchitectureHash() != hash) {
    throw FormatError("checkpoint architecture does not match this build");
  }
  const auto params = ReadDoubles(in);
  if (params.size() != ckpt.model.num_params()) {
    throw FormatError("checkpoint parameter count mismatch");
  }
  std::copy(params.begin(), params.end(), ckpt.model.params().begin());
  if (binio::ReadU32(in) != 0) {
    const uint32_t code_dim = binio::ReadU32(in);
    ckpt.denoiser.emplace(static_cast<int>(code_dim));
    const auto dp = ReadDoubles(in);
    if (dp.size() != ckpt.denoiser->num_params()) {
      throw FormatError("checkpoint denoiser parameter count mismatch");
    }
    std::copy(dp.begin(), dp.end(), ckpt.denoiser->params().begin());
    ckpt.schedule.emplace(ReadDoubles(in));
  }
  Eigen::VectorXd mel_mean = ReadVector(in);
  Eigen::VectorXd mel_std = ReadVector(in);
  ckpt.mel_normalizer = MelNormalizer(std::move(mel_mean), std::move(mel_std));
  const uint32_t n_ids = binio::ReadU32(in);
  std::vector<std::string> ids;
  for (uint32_t i = 0; i < n_ids; ++i) ids.push_back(ReadString(in));
  Eigen::VectorXd am_mean = ReadVector(in);
  Eigen::VectorXd am_std = ReadVector(in);
  ckpt.am_normalization =
      AmNormalization(std::move(ids), std::move(am_mean), std::move(am_std));
  ckpt.provenance = ReadString(in);
  return ckpt;
}

}  // namespace voxface
