// Copyright (c) 2026 The tagstyle Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TAGSTYLE_TRAINING_H_
#define TAGSTYLE_TRAINING_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"
#include "tagstyle/batch.h"
#include "tagstyle/corpus.h"
#include "tagstyle/losses.h"
#include "tagstyle/model.h"

namespace tagstyle {

struct TrainConfig {
  std::int64_t steps = 20000;
  int batch_size = 16;
  double learning_rate = 1e-3;
  std::int64_t warmup_steps = 500;   // linear warmup, then inverse-sqrt decay
  double grad_clip = 1.0;
  double p_style_source = 0.5;       // probability of using w_s over w_t
  std::uint64_t seed = 1;
  std::int64_t binarization_warmup = 2000;
  std::int64_t checkpoint_interval = 1000;
  bool s_rec_stop_gradient = false;  // keep s_rec out of the reference encoder
  bool use_contrastive = true;       // false drops s_con from the total
  bool alignment_prior = true;       // beta-binomial diagonal prior in the aligner
  int threads = 1;

  void Validate() const;
};

nlohmann::json TrainConfigToJson(const TrainConfig& c);
TrainConfig TrainConfigFromJson(const nlohmann::json& j);

// Learning rate for 0-based update index `step`.
double LearningRate(const TrainConfig& c, std::int64_t step);

// Ramp 0 -> 1 over binarization_warmup updates.
double BinarizationRamp(const TrainConfig& c, std::int64_t step);

// Everything a run needs. Serialized as one JSON object with the sections
// corpus, model, train, loss, and an optional list of applied overrides.
struct ExperimentConfig {
  CorpusSpec corpus;
  ModelConfig model;
  TrainConfig train;
  LossWeights loss;
  std::vector<std::string> overrides;

  // Cross-section checks, e.g. the speaker table covers the corpus.
  void Validate() const;
  // Hash of everything that affects the trajectory. train.steps and
  // train.checkpoint_interval are excluded so a run can be extended.
  std::uint64_t Hash() const;
};

nlohmann::json ExperimentConfigToJson(const ExperimentConfig& c);
ExperimentConfig ExperimentConfigFromJson(const nlohmann::json& j);

// Applies "a.b.c=value" to a JSON tree. The value is parsed as JSON when
// possible and taken as a string otherwise. Throws ConfigError on a
// malformed override.
void ApplyOverride(nlohmann::json* root, const std::string& assignment);

// Parses a JSON config file. InputError if unreadable, ConfigError if
// malformed.
nlohmann::json ReadConfigFile(const std::filesystem::path& path);

// Applies the overrides in order to `base`, records them, and validates.
ExperimentConfig ResolveConfig(nlohmann::json base,
                               const std::vector<std::string>& overrides);

// ResolveConfig on a file, or on defaults when `path` is empty.
ExperimentConfig LoadExperimentConfig(const std::string& path,
                                      const std::vector<std::string>& overrides);

// One independent Bernoulli(p) draw per utterance; true selects w_s.
std::vector<bool> DrawStyleSources(std::int64_t count, double p, std::mt19937_64& rng);

// Per-row choice between w_s and w_t [B, d].
torch::Tensor SelectStyleEmbedding(const torch::Tensor& w_s, const torch::Tensor& w_t,
                                   std::mt19937_64& rng, double p,
                                   std::vector<bool>* chose_speech = nullptr);

enum class StyleSource { kSampled, kSpeech, kTags };

struct StepOptions {
  // kSampled draws per utterance with p_style_source; the others force a
  // source for every item.
  StyleSource style_source = StyleSource::kSampled;
  // Draw a random tag subset per utterance (training augmentation). When
  // false, every utterance uses its full tag set.
  bool sample_tags = true;
};

struct StepResult {
  LossTerms terms;
  WeightedLoss loss;
  torch::Tensor w_s, w_t, w_p;      // [B, d_style]
  torch::Tensor style;              // [B, d_style] after selection
  std::vector<bool> chose_speech;
  torch::Tensor log_a_soft;         // [B, N, T]
  HardAlignment hard;
  torch::Tensor log_duration;       // [B, N]
  DecoderOutput mel;
};

// Forward pass and all loss terms for one batch. RNG streams (tag subsets,
// style-source draws, dropout) are keyed by (train.seed, step), so the
// result depends only on the parameters, the batch and `step`.
StepResult ComputeStep(TagStyleModel& model, const TagEmbedder& embedder,
                       const Batch& batch, std::int64_t step,
                       const ExperimentConfig& config,
                       const StepOptions& options = {});

// Tab-separated metrics line: step, the seven terms, total, lr, wall seconds.
std::string MetricsHeader();

// Training with a checkpoint directory:
//   config.json    resolved config snapshot (with overrides)
//   params.pt      named parameters and buffers
//   optimizer.pt   optimizer state
//   state.json     step counter and config hash
//   metrics.log    one MetricsHeader() record per step
// An existing directory with a matching config hash is resumed from its
// last checkpoint; a mismatching hash is a ConfigError.
class Trainer {
 public:
  Trainer(ExperimentConfig config, const Corpus& corpus,
          std::filesystem::path checkpoint_dir);

  // Trains until `stop_step` (default train.steps) and checkpoints there.
  // Throws NumericError on a non-finite loss, naming the last good
  // checkpoint.
  void Run(std::optional<std::int64_t> stop_step = std::nullopt);

  std::int64_t step() const { return step_; }
  TagStyleModel& model() { return model_; }
  const TagEmbedder& embedder() const { return *embedder_; }
  const ExperimentConfig& config() const { return config_; }
  const LossReport& last_report() const { return last_report_; }

  void SaveCheckpoint();

 private:
  void LoadCheckpoint();

  ExperimentConfig config_;
  const Corpus* corpus_;
  std::filesystem::path dir_;
  std::unique_ptr<TagEmbedder> embedder_;
  TagStyleModel model_{nullptr};
  std::unique_ptr<torch::optim::Adam> optimizer_;
  BatchStream stream_;
  std::int64_t step_ = 0;
  std::int64_t last_saved_ = -1;
  LossReport last_report_;
};

// Reads config.json and params.pt from a checkpoint directory.
struct LoadedModel {
  ExperimentConfig config;
  TagStyleModel model{nullptr};
  std::unique_ptr<TagEmbedder> embedder;
  std::int64_t step = 0;
};
LoadedModel LoadModel(const std::filesystem::path& checkpoint_dir);

struct SynthesisRequest {
  std::vector<std::int64_t> phonemes;
  std::int64_t speaker = 0;
  std::vector<std::string> tags;           // style from tags, or
  std::optional<torch::Tensor> reference;  // normalized reference mel [T, M]
  bool prenet_dropout = true;              // false for bit-reproducible output
  std::uint64_t seed = 0;                  // dropout stream
};

struct SynthesisResult {
  torch::Tensor mel;                    // [T, M] normalized, float32
  std::vector<std::int64_t> durations;  // per phoneme, sums to T
  torch::Tensor style;                  // [d_style]
};

// Text encode, add style, predict durations, regulate, decode
// autoregressively, postnet. Throws InputError for an unknown speaker, an
// empty phoneme list, or neither/both style sources.
SynthesisResult Synthesize(TagStyleModel& model, const TagEmbedder& embedder,
                           const SynthesisRequest& request);

}  // namespace tagstyle

#endif  // TAGSTYLE_TRAINING_H_
