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

#ifndef TAGSTYLE_MODEL_H_
#define TAGSTYLE_MODEL_H_

#include <cstdint>
#include <memory>

#include <torch/torch.h>

#include "json.hpp"
#include "tagstyle/acoustic.h"
#include "tagstyle/alignment.h"
#include "tagstyle/style_encoder.h"

namespace tagstyle {

struct ModelConfig {
  std::int64_t num_symbols = 33;
  std::int64_t num_speakers = 8;
  std::int64_t n_mels = 120;
  std::int64_t d_model = 256;
  std::int64_t d_speaker = 64;
  std::int64_t d_style = 128;
  std::int64_t d_sem = 256;          // stub embedder width
  std::uint64_t embedder_seed = 0;   // stub embedder hash seed
  std::int64_t adaptation_hidden = 256;
  std::int64_t text_kernel = 5;
  std::int64_t ref_channels = 128;
  std::int64_t ref_kernel = 3;
  std::int64_t ref_heads = 2;
  std::int64_t align_dim = 128;
  std::int64_t align_kernel = 3;
  std::int64_t duration_channels = 256;
  std::int64_t prenet_dim = 256;
  std::int64_t decoder_units = 512;
  std::int64_t postnet_channels = 256;
  std::int64_t postnet_kernel = 5;
  double prenet_dropout = 0.5;

  // Throws ConfigError naming the offending field.
  void Validate() const;
};

nlohmann::json ModelConfigToJson(const ModelConfig& c);
// Strict: unknown keys are a ConfigError. Missing keys keep defaults.
ModelConfig ModelConfigFromJson(const nlohmann::json& j);

// All trainable parts. The tag embedder is frozen and lives outside the
// parameter set.
struct TagStyleModelImpl : torch::nn::Module {
  explicit TagStyleModelImpl(const ModelConfig& config);

  // d_style -> d_model projection applied before adding style to the text
  // encoding.
  torch::Tensor ProjectStyle(const torch::Tensor& style);

  ModelConfig config;
  TextEncoder text_encoder{nullptr};
  SpeakerTable speakers{nullptr};
  ReferenceEncoder reference_encoder{nullptr};
  AdaptationLayer adaptation{nullptr};
  torch::nn::Linear style_proj{nullptr};
  Aligner aligner{nullptr};
  DurationPredictor duration_predictor{nullptr};
  Decoder decoder{nullptr};
};
TORCH_MODULE(TagStyleModel);

std::unique_ptr<TagEmbedder> MakeEmbedder(const ModelConfig& config);

}  // namespace tagstyle

#endif  // TAGSTYLE_MODEL_H_
