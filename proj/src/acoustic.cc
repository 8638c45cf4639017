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

#include "tagstyle/acoustic.h"

#include <cmath>
#include <string>

#include "tagstyle/batch.h"
#include "tagstyle/error.h"

namespace tagstyle {

namespace rnn = torch::nn::utils::rnn;

MaskedBatchNorm1dImpl::MaskedBatchNorm1dImpl(std::int64_t channels,
                                             double momentum_, double eps_)
    : momentum(momentum_), eps(eps_) {
  weight = register_parameter("weight", torch::ones({channels}));
  bias = register_parameter("bias", torch::zeros({channels}));
  running_mean = register_buffer("running_mean", torch::zeros({channels}));
  running_var = register_buffer("running_var", torch::ones({channels}));
}

torch::Tensor MaskedBatchNorm1dImpl::forward(const torch::Tensor& x,
                                             const torch::Tensor& mask) {
  torch::Tensor mean, var;
  if (is_training()) {
    const auto count = mask.sum();
    mean = (x * mask).sum({0, 2}) / count;
    var = ((x - mean.view({1, -1, 1})).pow(2) * mask).sum({0, 2}) / count;
    torch::NoGradGuard no_grad;
    const double n = count.item<double>();
    const auto unbiased = n > 1 ? var.detach() * (n / (n - 1)) : var.detach();
    running_mean.mul_(1 - momentum).add_(momentum * mean.detach());
    running_var.mul_(1 - momentum).add_(momentum * unbiased);
  } else {
    mean = running_mean;
    var = running_var;
  }
  auto y = (x - mean.view({1, -1, 1})) / torch::sqrt(var.view({1, -1, 1}) + eps);
  return (y * weight.view({1, -1, 1}) + bias.view({1, -1, 1})) * mask;
}

TextEncoderImpl::TextEncoderImpl(std::int64_t num_symbols_, std::int64_t d_model,
                                 std::int64_t kernel_size)
    : num_symbols(num_symbols_) {
  if (d_model % 2 != 0) throw ConfigError("model.d_model must be even");
  embedding = register_module(
      "embedding", torch::nn::Embedding(
                       torch::nn::EmbeddingOptions(num_symbols, d_model).padding_idx(0)));
  for (int k = 0; k < 3; ++k) {
    convs.push_back(register_module(
        "conv" + std::to_string(k),
        torch::nn::Conv1d(torch::nn::Conv1dOptions(d_model, d_model, kernel_size)
                              .padding(kernel_size / 2))));
    norms.push_back(register_module("norm" + std::to_string(k),
                                    MaskedBatchNorm1d(d_model)));
  }
  lstm = register_module(
      "lstm", torch::nn::LSTM(torch::nn::LSTMOptions(d_model, d_model / 2)
                                  .batch_first(true)
                                  .bidirectional(true)));
}

torch::Tensor TextEncoderImpl::forward(const torch::Tensor& phonemes,
                                       const torch::Tensor& lengths) {
  if (phonemes.dim() != 2) throw InputError("phonemes must be [B, N]");
  if (phonemes.numel() > 0 &&
      ((phonemes < 0) | (phonemes >= num_symbols)).any().item<bool>()) {
    throw InputError("unknown phoneme symbol id");
  }
  if (lengths.min().item<std::int64_t>() < 1) {
    throw InputError("phoneme sequences must be nonempty");
  }
  const auto n = phonemes.size(1);
  auto x = embedding(phonemes);
  auto mask = LengthMask(lengths, n).to(x.scalar_type());
  auto m = mask.unsqueeze(1);
  auto h = x.transpose(1, 2) * m;
  for (std::size_t k = 0; k < convs.size(); ++k) {
    h = torch::relu(norms[k](convs[k](h), m));
  }
  auto packed = rnn::pack_padded_sequence(h.transpose(1, 2), lengths.to(torch::kCPU),
                                          /*batch_first=*/true,
                                          /*enforce_sorted=*/false);
  auto out = std::get<0>(lstm->forward_with_packed_input(packed));
  return std::get<0>(rnn::pad_packed_sequence(out, /*batch_first=*/true,
                                              /*padding_value=*/0.0, n));
}

SpeakerTableImpl::SpeakerTableImpl(std::int64_t num_speakers_, std::int64_t dim)
    : num_speakers(num_speakers_) {
  if (num_speakers < 1) throw ConfigError("model.n_speakers must be >= 1");
  table = register_module("table", torch::nn::Embedding(num_speakers, dim));
}

torch::Tensor SpeakerTableImpl::forward(const torch::Tensor& speaker_ids) {
  if (((speaker_ids < 0) | (speaker_ids >= num_speakers)).any().item<bool>()) {
    throw InputError("unknown speaker id");
  }
  return table(speaker_ids);
}

torch::Tensor AddStyle(const torch::Tensor& encoder_out, const torch::Tensor& style,
                       const std::optional<torch::Tensor>& mask) {
  if (style.dim() != 2 || style.size(0) != encoder_out.size(0) ||
      style.size(1) != encoder_out.size(2)) {
    throw InputError("style vector does not match the encoder output width");
  }
  auto out = encoder_out + style.unsqueeze(1);
  if (mask) out = out * mask->to(out.scalar_type()).unsqueeze(-1);
  return out;
}

DurationPredictorImpl::DurationPredictorImpl(std::int64_t d_model,
                                             std::int64_t d_speaker,
                                             std::int64_t d_style,
                                             std::int64_t channels,
                                             std::int64_t kernel_size) {
  speaker_proj = register_module("speaker_proj", torch::nn::Linear(d_speaker, d_model));
  style_proj = register_module("style_proj", torch::nn::Linear(d_style, d_model));
  std::int64_t in = d_model;
  for (int k = 0; k < 3; ++k) {
    convs.push_back(register_module(
        "conv" + std::to_string(k),
        torch::nn::Conv1d(torch::nn::Conv1dOptions(in, channels, kernel_size)
                              .padding(kernel_size / 2))));
    norms.push_back(register_module(
        "norm" + std::to_string(k),
        torch::nn::LayerNorm(torch::nn::LayerNormOptions({channels}))));
    in = channels;
  }
  out = register_module("out", torch::nn::Linear(channels, 1));
}

torch::Tensor DurationPredictorImpl::forward(const torch::Tensor& x,
                                             const torch::Tensor& mask,
                                             const torch::Tensor& speaker,
                                             const torch::Tensor& style) {
  auto m = mask.to(x.scalar_type()).unsqueeze(-1);  // [B, N, 1]
  auto cond = speaker_proj(speaker) + style_proj(style);
  auto h = (x + cond.unsqueeze(1)) * m;
  for (std::size_t k = 0; k < convs.size(); ++k) {
    h = convs[k](h.transpose(1, 2)).transpose(1, 2);
    h = norms[k](torch::relu(h)) * m;
  }
  return out(h).squeeze(-1) * m.squeeze(-1);
}

std::vector<std::int64_t> DurationsFromLog(const torch::Tensor& log_durations) {
  auto v = log_durations.detach().to(torch::kFloat64).contiguous();
  std::vector<std::int64_t> out(v.numel());
  const double* p = v.data_ptr<double>();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double frames = std::round(std::exp(p[i]) - 1.0);
    out[i] = std::max<std::int64_t>(1, static_cast<std::int64_t>(frames));
  }
  return out;
}

std::vector<std::int64_t> ContextIndices(const std::vector<std::int64_t>& durations) {
  std::vector<std::int64_t> idx;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    if (durations[i] < 0) throw InputError("negative duration");
    idx.insert(idx.end(), durations[i], static_cast<std::int64_t>(i));
  }
  return idx;
}

torch::Tensor LengthRegulate(const torch::Tensor& x,
                             const std::vector<std::int64_t>& durations) {
  if (x.dim() != 2 || x.size(0) != static_cast<std::int64_t>(durations.size())) {
    throw InputError("length regulation: one duration per input position required");
  }
  const auto idx = ContextIndices(durations);
  if (idx.empty()) throw InputError("length regulation: total duration is zero");
  return x.index_select(0, torch::tensor(idx, torch::kInt64));
}

std::pair<torch::Tensor, torch::Tensor> LengthRegulate(const torch::Tensor& x,
                                                       const torch::Tensor& durations) {
  if (x.dim() != 3 || durations.dim() != 2 || durations.size(0) != x.size(0) ||
      durations.size(1) != x.size(1)) {
    throw InputError("length regulation: durations must be [B, N] for x [B, N, d]");
  }
  auto d = durations.to(torch::kInt64).contiguous();
  const auto b = x.size(0);
  auto lengths = d.sum(1);
  if (lengths.min().item<std::int64_t>() < 1) {
    throw InputError("length regulation: total duration is zero");
  }
  const auto t_max = lengths.max().item<std::int64_t>();
  auto index = torch::zeros({b, t_max}, torch::kInt64);
  auto acc = d.accessor<std::int64_t, 2>();
  auto ia = index.accessor<std::int64_t, 2>();
  for (std::int64_t k = 0; k < b; ++k) {
    std::int64_t t = 0;
    for (std::int64_t i = 0; i < d.size(1); ++i) {
      if (acc[k][i] < 0) throw InputError("negative duration");
      for (std::int64_t r = 0; r < acc[k][i]; ++r) ia[k][t++] = i;
    }
  }
  auto gathered = torch::gather(
      x, 1, index.unsqueeze(-1).expand({b, t_max, x.size(2)}));
  auto mask = LengthMask(lengths, t_max).to(x.scalar_type()).unsqueeze(-1);
  return {gathered * mask, lengths};
}

DecoderImpl::DecoderImpl(const DecoderOptions& o) : opts(o) {
  prenet1 = register_module("prenet1", torch::nn::Linear(o.n_mels, o.prenet_dim));
  prenet2 = register_module("prenet2", torch::nn::Linear(o.prenet_dim, o.prenet_dim));
  lstm = register_module(
      "lstm", torch::nn::LSTM(torch::nn::LSTMOptions(
                                  o.prenet_dim + o.d_context + o.d_speaker, o.units)
                                  .batch_first(true)));
  projection = register_module("projection", torch::nn::Linear(o.units, o.n_mels));
  const std::int64_t widths[] = {o.n_mels, o.postnet_channels, o.postnet_channels,
                                 o.postnet_channels, o.postnet_channels, o.n_mels};
  for (int k = 0; k < 5; ++k) {
    postnet.push_back(register_module(
        "postnet" + std::to_string(k),
        torch::nn::Conv1d(torch::nn::Conv1dOptions(widths[k], widths[k + 1],
                                                   o.postnet_kernel)
                              .padding(o.postnet_kernel / 2))));
  }
  // The residual branch starts as the identity map.
  torch::NoGradGuard no_grad;
  postnet.back()->weight.zero_();
  postnet.back()->bias.zero_();
}

torch::Tensor DecoderImpl::Prenet(const torch::Tensor& frames) {
  const bool drop = prenet_dropout_enabled && opts.prenet_dropout > 0;
  auto h = torch::relu(prenet1(frames));
  h = torch::dropout(h, opts.prenet_dropout, drop);
  h = torch::relu(prenet2(h));
  return torch::dropout(h, opts.prenet_dropout, drop);
}

torch::Tensor DecoderImpl::Postnet(const torch::Tensor& mel, const torch::Tensor& mask) {
  auto m = mask.to(mel.scalar_type()).unsqueeze(1);  // [B, 1, T]
  auto h = mel.transpose(1, 2) * m;
  for (std::size_t k = 0; k < postnet.size(); ++k) {
    h = postnet[k](h);
    if (k + 1 < postnet.size()) h = torch::tanh(h);
    h = h * m;
  }
  return h.transpose(1, 2);
}

DecoderOutput DecoderImpl::Decode(const torch::Tensor& context,
                                  const torch::Tensor& speaker,
                                  const torch::Tensor& mask, DecodeMode mode,
                                  const std::optional<torch::Tensor>& teacher) {
  if (context.dim() != 3 || context.size(2) != opts.d_context) {
    throw InputError("decoder context must be [B, T, d_context]");
  }
  const auto b = context.size(0), t = context.size(1);
  auto spk = speaker.unsqueeze(1).expand({b, t, speaker.size(1)});
  auto mel_mask = mask.to(context.scalar_type()).unsqueeze(-1);
  torch::Tensor before;
  if (mode == DecodeMode::kTeacherForced) {
    if (!teacher) throw UsageError("teacher-forced decoding needs a teacher mel");
    if (teacher->size(1) != t) throw InputError("teacher mel length != context length");
    auto go = torch::zeros({b, 1, opts.n_mels}, context.options());
    auto prev = torch::cat({go, teacher->narrow(1, 0, t - 1)}, 1);
    auto inputs = torch::cat({Prenet(prev), context, spk}, -1);
    auto h = std::get<0>(lstm->forward(inputs));
    before = projection(h) * mel_mask;
  } else {
    if (teacher) throw UsageError("autoregressive decoding takes no teacher mel");
    auto prev = torch::zeros({b, 1, opts.n_mels}, context.options());
    std::optional<std::tuple<torch::Tensor, torch::Tensor>> state;
    std::vector<torch::Tensor> frames;
    frames.reserve(t);
    for (std::int64_t i = 0; i < t; ++i) {
      auto inputs = torch::cat(
          {Prenet(prev), context.narrow(1, i, 1), spk.narrow(1, i, 1)}, -1);
      auto result = state ? lstm->forward(inputs, *state) : lstm->forward(inputs);
      state = std::get<1>(result);
      prev = projection(std::get<0>(result));
      frames.push_back(prev);
    }
    before = torch::cat(frames, 1) * mel_mask;
  }
  return {before, before + Postnet(before, mask)};
}

}  // namespace tagstyle
