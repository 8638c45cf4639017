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

#ifndef TAGSTYLE_ACOUSTIC_H_
#define TAGSTYLE_ACOUSTIC_H_

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace tagstyle {

// Batch norm over [B, C, T] whose statistics only count valid positions.
struct MaskedBatchNorm1dImpl : torch::nn::Module {
  explicit MaskedBatchNorm1dImpl(std::int64_t channels, double momentum = 0.1,
                                 double eps = 1e-5);
  // mask: [B, 1, T] in x's dtype. Output is zero on masked positions.
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& mask);

  double momentum, eps;
  torch::Tensor weight, bias, running_mean, running_var;
};
TORCH_MODULE(MaskedBatchNorm1d);

// Symbol embedding, three conv + batch norm + ReLU blocks, one BiLSTM.
struct TextEncoderImpl : torch::nn::Module {
  TextEncoderImpl(std::int64_t num_symbols, std::int64_t d_model,
                  std::int64_t kernel_size = 5);

  // phonemes [B, N] int64, lengths [B] -> [B, N, d_model], zero on padding.
  // Throws InputError on out-of-range symbol ids.
  torch::Tensor forward(const torch::Tensor& phonemes, const torch::Tensor& lengths);

  std::int64_t num_symbols;
  torch::nn::Embedding embedding{nullptr};
  std::vector<torch::nn::Conv1d> convs;
  std::vector<MaskedBatchNorm1d> norms;
  torch::nn::LSTM lstm{nullptr};
};
TORCH_MODULE(TextEncoder);

// Speaker id -> vector; unknown ids are an InputError.
struct SpeakerTableImpl : torch::nn::Module {
  SpeakerTableImpl(std::int64_t num_speakers, std::int64_t dim);
  torch::Tensor forward(const torch::Tensor& speaker_ids);

  std::int64_t num_speakers;
  torch::nn::Embedding table{nullptr};
};
TORCH_MODULE(SpeakerTable);

// encoder_out [B, N, d] + style [B, d] broadcast over positions. When a mask
// [B, N] is given, padded positions stay zero.
torch::Tensor AddStyle(const torch::Tensor& encoder_out, const torch::Tensor& style,
                       const std::optional<torch::Tensor>& mask = std::nullopt);

// Three conv + ReLU + layer norm blocks and a scalar projection. Speaker and
// style vectors are projected and added to the input as conditioning.
// Outputs log(1 + frames) per phoneme.
struct DurationPredictorImpl : torch::nn::Module {
  DurationPredictorImpl(std::int64_t d_model, std::int64_t d_speaker,
                        std::int64_t d_style, std::int64_t channels,
                        std::int64_t kernel_size = 3);

  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& mask,
                        const torch::Tensor& speaker, const torch::Tensor& style);

  torch::nn::Linear speaker_proj{nullptr}, style_proj{nullptr};
  std::vector<torch::nn::Conv1d> convs;
  std::vector<torch::nn::LayerNorm> norms;
  torch::nn::Linear out{nullptr};
};
TORCH_MODULE(DurationPredictor);

// max(1, round(exp(log_duration) - 1)).
std::vector<std::int64_t> DurationsFromLog(const torch::Tensor& log_durations);

// Repeats row i of x [N, d] durations[i] times. Throws InputError on
// negative durations, a length mismatch, or zero total length.
torch::Tensor LengthRegulate(const torch::Tensor& x,
                             const std::vector<std::int64_t>& durations);

// Batched: x [B, N, d], durations [B, N] int64 (zero on padding) ->
// [B, T_max, d] zero padded, plus the per-item frame counts.
std::pair<torch::Tensor, torch::Tensor> LengthRegulate(const torch::Tensor& x,
                                                       const torch::Tensor& durations);

// Frame -> phoneme index map produced by length regulation.
std::vector<std::int64_t> ContextIndices(const std::vector<std::int64_t>& durations);

struct DecoderOptions {
  std::int64_t n_mels = 120;
  std::int64_t d_context = 256;
  std::int64_t d_speaker = 64;
  std::int64_t prenet_dim = 256;
  std::int64_t units = 512;
  std::int64_t postnet_channels = 256;
  std::int64_t postnet_kernel = 5;
  double prenet_dropout = 0.5;
};

enum class DecodeMode { kTeacherForced, kAutoregressive };

struct DecoderOutput {
  torch::Tensor mel_before;  // [B, T, n_mels]
  torch::Tensor mel_after;   // mel_before + postnet residual
};

// Autoregressive LSTM decoder. The previous frame goes through a two-layer
// ReLU prenet, is concatenated with the regulated context vector for the
// current frame and the speaker vector, and drives an LSTM whose output is
// projected to a mel frame. A five-layer conv postnet adds a residual.
//
// Prenet dropout stays on at inference too unless `prenet_dropout_enabled`
// is false.
struct DecoderImpl : torch::nn::Module {
  explicit DecoderImpl(const DecoderOptions& opts);

  // context [B, T, d_context], speaker [B, d_speaker], mask [B, T] bool.
  // kTeacherForced requires `teacher` [B, T, n_mels]; kAutoregressive
  // forbids it. Mismatches throw UsageError.
  DecoderOutput Decode(const torch::Tensor& context, const torch::Tensor& speaker,
                       const torch::Tensor& mask, DecodeMode mode,
                       const std::optional<torch::Tensor>& teacher = std::nullopt);

  torch::Tensor Prenet(const torch::Tensor& frames);
  torch::Tensor Postnet(const torch::Tensor& mel, const torch::Tensor& mask);

  DecoderOptions opts;
  bool prenet_dropout_enabled = true;
  torch::nn::Linear prenet1{nullptr}, prenet2{nullptr};
  torch::nn::LSTM lstm{nullptr};
  torch::nn::Linear projection{nullptr};
  std::vector<torch::nn::Conv1d> postnet;
};
TORCH_MODULE(Decoder);

}  // namespace tagstyle

#endif  // TAGSTYLE_ACOUSTIC_H_
