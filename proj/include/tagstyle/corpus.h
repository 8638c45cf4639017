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

#ifndef TAGSTYLE_CORPUS_H_
#define TAGSTYLE_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"
#include "tagstyle/signal.h"

namespace tagstyle {

// Symbol ids 1..kNumPhonemeSymbols are phonemes; 0 is padding.
inline constexpr int kPadSymbol = 0;
inline constexpr int kNumPhonemeSymbols = 32;
inline constexpr int kSymbolTableSize = kNumPhonemeSymbols + 1;
inline constexpr int kMaxTagsPerUtterance = 8;

// A style tag and how strongly it pushes the rendering. intensity scales the
// latent style's deviation from neutral; tempo multiplies phoneme durations.
// gain_db and tilt_db_per_octave are small per-tag offsets added unscaled, so
// tag sets stay tellable apart even for neutral speech. All four are averaged
// over the tags of an utterance.
struct TagDef {
  std::string text;
  double intensity = 1.0;
  double tempo = 1.0;
  double gain_db = 0.0;
  double tilt_db_per_octave = 0.0;
};

// Acoustic realization of one latent style at intensity 1.
struct StyleDef {
  std::string name;
  double f0_ratio = 1.0;
  double gain_db = 0.0;
  double tilt_db_per_octave = 0.0;
  double duration_scale = 1.0;
  double f0_slope = 0.0;
  std::vector<TagDef> tags;
};

// Four styles (neutral, happy, angry, sad) with ten tags each, including
// "very X" / "little X" quantifier variants.
std::vector<StyleDef> DefaultStyles();

// Style 0 is the neutral style. Speakers [0, n_source) only ever carry it;
// speakers [n_source, n_source + n_target) carry every style.
struct CorpusSpec {
  int n_source_speakers = 4;
  int n_target_speakers = 4;
  std::vector<StyleDef> styles = DefaultStyles();
  int utterances_per_speaker = 25;
  int min_phonemes = 4;
  int max_phonemes = 10;
  // Number of distinct sentences. Every utterance reads one of them, drawn
  // independently of speaker and style, so a transcript recurs across styles.
  int script_size = 10;
  std::uint64_t seed = 1;
  SignalConfig signal;

  int num_speakers() const { return n_source_speakers + n_target_speakers; }
  bool is_source_speaker(int speaker) const {
    return speaker < n_source_speakers;
  }
  void Validate() const;
};

struct Utterance {
  std::string id;
  torch::Tensor waveform;  // [samples], float32
  torch::Tensor mel;       // [frames, mel_bins], float32 log-mel (unnormalized)
  std::vector<std::int64_t> phonemes;
  int speaker_id = 0;
  std::vector<std::string> style_tags;
  int latent_style = 0;  // never shown to the model
  // Frames per phoneme used by the generator; diagnostics only.
  std::vector<std::int64_t> durations;

  std::int64_t num_frames() const { return mel.size(0); }
};

// Per-bin statistics for mel normalization, computed over all corpus frames.
struct MelStats {
  torch::Tensor mean;  // [mel_bins], float32
  torch::Tensor std;   // [mel_bins], float32
};

struct Corpus {
  CorpusSpec spec;
  std::vector<Utterance> utterances;
  MelStats stats;

  // (mel - mean) / std, float32 [frames, mel_bins].
  torch::Tensor NormalizedMel(std::size_t index) const;
  torch::Tensor Normalize(const torch::Tensor& raw_mel) const;
  torch::Tensor Denormalize(const torch::Tensor& mel) const;
  std::int64_t IndexOf(const std::string& id) const;  // -1 if missing
};

// Synthesizes waveforms by harmonic synthesis and extracts their mels.
// Throws ConfigError when the spec is invalid.
Corpus GenerateCorpus(const CorpusSpec& spec);

MelStats ComputeMelStats(const std::vector<Utterance>& utterances);

// Per-symbol base duration in frames, as used by the generator.
int SymbolBaseDuration(int symbol);

// Directory layout: manifest.json, mel/<id>.bin, wav/<id>.bin.
void SaveCorpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus LoadCorpus(const std::filesystem::path& dir);

nlohmann::json SpecToJson(const CorpusSpec& spec);
CorpusSpec SpecFromJson(const nlohmann::json& j);

}  // namespace tagstyle

#endif  // TAGSTYLE_CORPUS_H_
