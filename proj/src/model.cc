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

#include "tagstyle/model.h"

#include <string>

#include "tagstyle/error.h"
#include "tagstyle/json_util.h"

namespace tagstyle {

namespace {

void Positive(std::int64_t v, const char* name) {
  if (v < 1) throw ConfigError(std::string("model.") + name + " must be >= 1");
}

}  // namespace

void ModelConfig::Validate() const {
  Positive(num_symbols, "num_symbols");
  Positive(num_speakers, "num_speakers");
  Positive(n_mels, "n_mels");
  Positive(d_model, "d_model");
  Positive(d_speaker, "d_speaker");
  Positive(d_style, "d_style");
  Positive(d_sem, "d_sem");
  Positive(adaptation_hidden, "adaptation_hidden");
  Positive(text_kernel, "text_kernel");
  Positive(ref_channels, "ref_channels");
  Positive(ref_kernel, "ref_kernel");
  Positive(ref_heads, "ref_heads");
  Positive(align_dim, "align_dim");
  Positive(align_kernel, "align_kernel");
  Positive(duration_channels, "duration_channels");
  Positive(prenet_dim, "prenet_dim");
  Positive(decoder_units, "decoder_units");
  Positive(postnet_channels, "postnet_channels");
  Positive(postnet_kernel, "postnet_kernel");
  if (d_model % 2 != 0) throw ConfigError("model.d_model must be even");
  if (ref_channels % ref_heads != 0) {
    throw ConfigError("model.ref_heads must divide model.ref_channels");
  }
  for (auto k : {text_kernel, ref_kernel, align_kernel, postnet_kernel}) {
    if (k % 2 == 0) throw ConfigError("model kernel sizes must be odd");
  }
  if (!(prenet_dropout >= 0 && prenet_dropout < 1)) {
    throw ConfigError("model.prenet_dropout must be in [0, 1)");
  }
}

nlohmann::json ModelConfigToJson(const ModelConfig& c) {
  return {{"num_symbols", c.num_symbols},
          {"num_speakers", c.num_speakers},
          {"n_mels", c.n_mels},
          {"d_model", c.d_model},
          {"d_speaker", c.d_speaker},
          {"d_style", c.d_style},
          {"d_sem", c.d_sem},
          {"embedder_seed", c.embedder_seed},
          {"adaptation_hidden", c.adaptation_hidden},
          {"text_kernel", c.text_kernel},
          {"ref_channels", c.ref_channels},
          {"ref_kernel", c.ref_kernel},
          {"ref_heads", c.ref_heads},
          {"align_dim", c.align_dim},
          {"align_kernel", c.align_kernel},
          {"duration_channels", c.duration_channels},
          {"prenet_dim", c.prenet_dim},
          {"decoder_units", c.decoder_units},
          {"postnet_channels", c.postnet_channels},
          {"postnet_kernel", c.postnet_kernel},
          {"prenet_dropout", c.prenet_dropout}};
}

ModelConfig ModelConfigFromJson(const nlohmann::json& j) {
  ModelConfig c;
  StrictObject o(j, "model");
  o.Get("num_symbols", &c.num_symbols);
  o.Get("num_speakers", &c.num_speakers);
  o.Get("n_mels", &c.n_mels);
  o.Get("d_model", &c.d_model);
  o.Get("d_speaker", &c.d_speaker);
  o.Get("d_style", &c.d_style);
  o.Get("d_sem", &c.d_sem);
  o.Get("embedder_seed", &c.embedder_seed);
  o.Get("adaptation_hidden", &c.adaptation_hidden);
  o.Get("text_kernel", &c.text_kernel);
  o.Get("ref_channels", &c.ref_channels);
  o.Get("ref_kernel", &c.ref_kernel);
  o.Get("ref_heads", &c.ref_heads);
  o.Get("align_dim", &c.align_dim);
  o.Get("align_kernel", &c.align_kernel);
  o.Get("duration_channels", &c.duration_channels);
  o.Get("prenet_dim", &c.prenet_dim);
  o.Get("decoder_units", &c.decoder_units);
  o.Get("postnet_channels", &c.postnet_channels);
  o.Get("postnet_kernel", &c.postnet_kernel);
  o.Get("prenet_dropout", &c.prenet_dropout);
  o.Finish();
  c.Validate();
  return c;
}

TagStyleModelImpl::TagStyleModelImpl(const ModelConfig& c) : config(c) {
  c.Validate();
  text_encoder = register_module(
      "text_encoder", TextEncoder(c.num_symbols, c.d_model, c.text_kernel));
  speakers = register_module("speakers", SpeakerTable(c.num_speakers, c.d_speaker));

  ReferenceEncoderOptions ro;
  ro.n_mels = c.n_mels;
  ro.channels = c.ref_channels;
  ro.kernel_size = c.ref_kernel;
  ro.heads = c.ref_heads;
  ro.d_style = c.d_style;
  reference_encoder = register_module("reference_encoder", ReferenceEncoder(ro));
  adaptation = register_module(
      "adaptation", AdaptationLayer(c.d_sem, c.adaptation_hidden, c.d_style));
  style_proj = register_module("style_proj", torch::nn::Linear(c.d_style, c.d_model));

  AlignerOptions ao;
  ao.d_text = c.d_model;
  ao.n_mels = c.n_mels;
  ao.d_align = c.align_dim;
  ao.kernel_size = c.align_kernel;
  aligner = register_module("aligner", Aligner(ao));
  duration_predictor = register_module(
      "duration_predictor",
      DurationPredictor(c.d_model, c.d_speaker, c.d_style, c.duration_channels));

  DecoderOptions dop;
  dop.n_mels = c.n_mels;
  dop.d_context = c.d_model;
  dop.d_speaker = c.d_speaker;
  dop.prenet_dim = c.prenet_dim;
  dop.units = c.decoder_units;
  dop.postnet_channels = c.postnet_channels;
  dop.postnet_kernel = c.postnet_kernel;
  dop.prenet_dropout = c.prenet_dropout;
  decoder = register_module("decoder", Decoder(dop));
}

torch::Tensor TagStyleModelImpl::ProjectStyle(const torch::Tensor& style) {
  return style_proj(style);
}

std::unique_ptr<TagEmbedder> MakeEmbedder(const ModelConfig& config) {
  return std::make_unique<StubEmbedder>(config.d_sem, config.embedder_seed);
}

}  // namespace tagstyle
