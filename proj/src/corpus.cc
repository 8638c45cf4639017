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

#include "tagstyle/corpus.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "tagstyle/array_io.h"
#include "tagstyle/error.h"
#include "tagstyle/json_util.h"
#include "tagstyle/rng.h"

namespace tagstyle {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<StyleDef> DefaultStyles() {
  std::vector<StyleDef> styles(4);
  styles[0] = {"neutral", 1.0, 0.0, 0.0, 1.0, 0.0,
               {{"neutral"},
                {"calm"},
                {"plain"},
                {"reading", 1.0, 1.05},
                {"steady", 1.0, 1.1},
                {"very calm", 1.0, 1.2},
                {"little calm", 1.0, 0.95},
                {"composed", 1.0, 1.1},
                {"even"},
                {"brisk", 1.0, 0.85}}};
  styles[1] = {"happy", 1.5, 3.5, 1.0, 0.85, 0.4,
               {{"happy"},
                {"very happy", 1.4},
                {"little happy", 0.6},
                {"cheerful", 1.0, 0.95},
                {"joyful", 1.2},
                {"bright", 0.9},
                {"excited", 1.3, 0.9},
                {"delighted", 1.1},
                {"playful", 0.8, 0.9},
                {"glad", 0.7}}};
  styles[2] = {"angry", 1.1, 8.0, 6.0, 0.8, -0.25,
               {{"angry"},
                {"very angry", 1.4},
                {"little angry", 0.6},
                {"furious", 1.4, 0.9},
                {"irritated", 0.7},
                {"annoyed", 0.6},
                {"harsh", 1.1},
                {"shouting", 1.3},
                {"mad", 1.0},
                {"fierce", 1.2}}};
  styles[3] = {"sad", 0.78, -8.0, -5.0, 1.4, -0.3,
               {{"sad"},
                {"very sad", 1.4},
                {"little sad", 0.6},
                {"gloomy", 0.9, 1.1},
                {"depressed", 1.2, 1.2},
                {"weeping", 1.3},
                {"tearful", 1.1},
                {"sorrowful", 1.2},
                {"down", 0.7},
                {"melancholy", 1.0, 1.1}}};
  // Spread the per-tag offsets over a 2D additive recurrence so that no two
  // tags share a level/tilt pair.
  constexpr double kA1 = 0.7548776662466927, kA2 = 0.5698402909980532;
  int i = 0;
  for (auto& s : styles) {
    for (auto& t : s.tags) {
      ++i;
      t.gain_db = 5.0 * (std::fmod(0.5 + kA1 * i, 1.0) - 0.5);
      t.tilt_db_per_octave = 4.0 * (std::fmod(0.5 + kA2 * i, 1.0) - 0.5);
    }
  }
  return styles;
}

void CorpusSpec::Validate() const {
  if (n_source_speakers < 0 || n_target_speakers < 0) {
    throw ConfigError("corpus.n_source_speakers/n_target_speakers must be >= 0");
  }
  if (num_speakers() == 0) {
    throw ConfigError("corpus.n_source_speakers + n_target_speakers must be > 0");
  }
  if (styles.empty()) throw ConfigError("corpus.styles must not be empty");
  std::set<std::string> names;
  for (const auto& s : styles) {
    if (s.tags.empty()) {
      throw ConfigError("corpus.styles." + s.name + " has no tags");
    }
    if (!names.insert(s.name).second) {
      throw ConfigError("corpus.styles has duplicate style " + s.name);
    }
    if (!(s.f0_ratio > 0 && s.duration_scale > 0)) {
      throw ConfigError("corpus.styles." + s.name +
                        " needs positive f0_ratio and duration_scale");
    }
    for (const auto& t : s.tags) {
      if (t.text.empty()) throw ConfigError("corpus.styles: empty tag text");
      if (!(t.intensity > 0 && t.tempo > 0)) {
        throw ConfigError("corpus.styles: tag '" + t.text +
                          "' needs positive intensity and tempo");
      }
    }
  }
  if (utterances_per_speaker < 1) {
    throw ConfigError("corpus.utterances_per_speaker must be >= 1");
  }
  if (min_phonemes < 1 || max_phonemes < min_phonemes) {
    throw ConfigError("corpus.min_phonemes/max_phonemes out of range");
  }
  if (script_size < 1) throw ConfigError("corpus.script_size must be >= 1");
  signal.Validate();
}

namespace {

struct SymbolAcoustics {
  double formant[3];
  int base_duration;
  double accent;
};

// Fixed property of the symbol inventory, independent of the corpus seed.
const std::array<SymbolAcoustics, kSymbolTableSize>& SymbolTable() {
  static const auto table = [] {
    std::array<SymbolAcoustics, kSymbolTableSize> t{};
    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> f1(280.0, 850.0), f2(900.0, 2400.0),
        f3(2450.0, 3400.0), accent(-0.06, 0.06);
    std::uniform_int_distribution<int> dur(2, 5);
    for (int s = 1; s < kSymbolTableSize; ++s) {
      t[s].formant[0] = f1(rng);
      t[s].formant[1] = f2(rng);
      t[s].formant[2] = f3(rng);
      t[s].base_duration = dur(rng);
      t[s].accent = accent(rng);
    }
    return t;
  }();
  return table;
}

struct SpeakerVoice {
  double f0 = 0;
  double formant_scale = 1;
  double tilt = 0;
  double rate = 1;
};

SpeakerVoice MakeVoice(std::uint64_t seed, int speaker) {
  std::mt19937_64 rng(MixSeed(seed, 0x5bea, static_cast<std::uint64_t>(speaker)));
  SpeakerVoice v;
  v.f0 = std::uniform_real_distribution<double>(120.0, 180.0)(rng);
  v.formant_scale = std::uniform_real_distribution<double>(0.86, 1.14)(rng);
  v.tilt = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
  v.rate = std::uniform_real_distribution<double>(0.9, 1.1)(rng);
  return v;
}

struct Rendering {
  double intensity = 1.0;
  double tempo = 1.0;
  double gain_db = 0.0;
  double tilt_db_per_octave = 0.0;
};

// Harmonic synthesis with a phase-continuous fundamental. Each frame has
// its own f0 and formant envelope; samples take the envelope of the nearest
// frame center.
torch::Tensor Synthesize(const std::vector<std::int64_t>& phonemes,
                         const std::vector<std::int64_t>& durations,
                         const SpeakerVoice& voice, const StyleDef& style,
                         const Rendering& r, const SignalConfig& sig) {
  const auto& table = SymbolTable();
  const int win = sig.window_samples();
  const int hop = sig.hop_samples();
  const std::int64_t frames =
      std::accumulate(durations.begin(), durations.end(), std::int64_t{0});
  const std::int64_t samples = (frames - 1) * hop + win;

  std::vector<int> frame_symbol(frames);
  {
    std::int64_t j = 0;
    for (std::size_t i = 0; i < phonemes.size(); ++i) {
      for (std::int64_t k = 0; k < durations[i]; ++k) {
        frame_symbol[j++] = static_cast<int>(phonemes[i]);
      }
    }
  }

  const double s = r.intensity;
  const double f0_scale = std::pow(style.f0_ratio, s);
  const double slope = style.f0_slope * s - 0.08;
  const double gain = std::pow(10.0, (style.gain_db * s + r.gain_db) / 20.0);
  const double tilt =
      style.tilt_db_per_octave * s + r.tilt_db_per_octave + voice.tilt;
  const double nyquist_guard = std::min(7600.0, sig.sample_rate * 0.475);
  static constexpr double kBandwidth[3] = {90.0, 130.0, 180.0};
  static constexpr double kFormantGain[3] = {1.0, 0.6, 0.3};

  std::vector<double> f0(frames);
  std::vector<std::vector<double>> amps(frames);
  for (std::int64_t j = 0; j < frames; ++j) {
    const auto& sym = table[frame_symbol[j]];
    const double pos = (j + 0.5) / frames - 0.5;
    f0[j] = voice.f0 * f0_scale * (1.0 + slope * pos) * (1.0 + sym.accent);
    const int harmonics = static_cast<int>(nyquist_guard / f0[j]);
    amps[j].resize(harmonics);
    for (int h = 1; h <= harmonics; ++h) {
      const double f = h * f0[j];
      double env = 0.02;
      for (int k = 0; k < 3; ++k) {
        const double d =
            (f - sym.formant[k] * voice.formant_scale) / kBandwidth[k];
        env += kFormantGain[k] * std::exp(-0.5 * d * d);
      }
      const double octaves = std::log2(std::max(f, 50.0) / 500.0);
      env *= std::pow(10.0, tilt * octaves / 20.0);
      amps[j][h - 1] = 0.05 * gain * env;
    }
  }

  auto wave = torch::empty({samples}, torch::kFloat32);
  auto w = wave.accessor<float, 1>();
  double phase = 0.0;
  const double two_pi = 2.0 * M_PI;
  for (std::int64_t n = 0; n < samples; ++n) {
    const double c = (static_cast<double>(n) - win / 2.0) / hop;
    const double cl = std::clamp(c, 0.0, static_cast<double>(frames - 1));
    const auto j0 = static_cast<std::int64_t>(std::floor(cl));
    const auto j1 = std::min<std::int64_t>(j0 + 1, frames - 1);
    const double frac = cl - j0;
    const double f = f0[j0] * (1.0 - frac) + f0[j1] * frac;
    phase = std::fmod(phase + two_pi * f / sig.sample_rate, two_pi);

    const auto j = std::clamp<std::int64_t>(std::llround(c), 0, frames - 1);
    const auto& a = amps[j];
    // sin(h*phase) by the Chebyshev recurrence.
    const double two_cos = 2.0 * std::cos(phase);
    double s_prev = 0.0, s_cur = std::sin(phase), acc = 0.0;
    for (double ah : a) {
      acc += ah * s_cur;
      const double s_next = two_cos * s_cur - s_prev;
      s_prev = s_cur;
      s_cur = s_next;
    }
    w[n] = static_cast<float>(acc);
  }
  return wave;
}

}  // namespace

int SymbolBaseDuration(int symbol) {
  if (symbol < 1 || symbol >= kSymbolTableSize) {
    throw InputError("unknown phoneme symbol " + std::to_string(symbol));
  }
  return SymbolTable()[symbol].base_duration;
}

Corpus GenerateCorpus(const CorpusSpec& spec) {
  spec.Validate();
  Corpus corpus;
  corpus.spec = spec;
  const int n_styles = static_cast<int>(spec.styles.size());
  std::vector<std::vector<std::int64_t>> script(spec.script_size);
  for (int k = 0; k < spec.script_size; ++k) {
    std::mt19937_64 rng(MixSeed(spec.seed, 0x5c41, static_cast<std::uint64_t>(k)));
    const int n_ph = std::uniform_int_distribution<int>(
        spec.min_phonemes, spec.max_phonemes)(rng);
    std::uniform_int_distribution<int> sym(1, kNumPhonemeSymbols);
    for (int i = 0; i < n_ph; ++i) script[k].push_back(sym(rng));
  }
  for (int spk = 0; spk < spec.num_speakers(); ++spk) {
    const SpeakerVoice voice = MakeVoice(spec.seed, spk);
    for (int u = 0; u < spec.utterances_per_speaker; ++u) {
      std::mt19937_64 rng(MixSeed(spec.seed, static_cast<std::uint64_t>(spk),
                                  static_cast<std::uint64_t>(u)));
      Utterance utt;
      char id[32];
      std::snprintf(id, sizeof(id), "spk%02d_%03d", spk, u);
      utt.id = id;
      utt.speaker_id = spk;
      utt.latent_style =
          spec.is_source_speaker(spk) ? 0 : (u + spk) % n_styles;
      const StyleDef& style = spec.styles[utt.latent_style];

      utt.phonemes = script[std::uniform_int_distribution<int>(0, spec.script_size - 1)(rng)];

      // Tag count uniform in 1..min(8, vocab).
      const int max_k = std::min<int>(kMaxTagsPerUtterance,
                                      static_cast<int>(style.tags.size()));
      const int k = std::uniform_int_distribution<int>(1, max_k)(rng);
      std::vector<int> order(style.tags.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      order.resize(k);
      std::sort(order.begin(), order.end());
      Rendering r{0.0, 0.0, 0.0, 0.0};
      for (int t : order) {
        utt.style_tags.push_back(style.tags[t].text);
        r.intensity += style.tags[t].intensity / k;
        r.tempo += style.tags[t].tempo / k;
        r.gain_db += style.tags[t].gain_db / k;
        r.tilt_db_per_octave += style.tags[t].tilt_db_per_octave / k;
      }

      const double dur_scale =
          voice.rate * std::pow(style.duration_scale, r.intensity) * r.tempo;
      for (auto p : utt.phonemes) {
        const double d = SymbolBaseDuration(static_cast<int>(p)) * dur_scale;
        utt.durations.push_back(std::max<std::int64_t>(1, std::llround(d)));
      }
      utt.waveform =
          Synthesize(utt.phonemes, utt.durations, voice, style, r, spec.signal);
      utt.mel = MelSpectrogram(utt.waveform, spec.signal);
      corpus.utterances.push_back(std::move(utt));
    }
  }
  corpus.stats = ComputeMelStats(corpus.utterances);
  return corpus;
}

MelStats ComputeMelStats(const std::vector<Utterance>& utterances) {
  if (utterances.empty()) throw InputError("cannot compute stats of no data");
  std::vector<torch::Tensor> mels;
  mels.reserve(utterances.size());
  for (const auto& u : utterances) mels.push_back(u.mel.to(torch::kFloat64));
  auto all = torch::cat(mels, 0);
  MelStats st;
  st.mean = all.mean(0).to(torch::kFloat32);
  st.std = all.std(0, /*unbiased=*/false).clamp_min(1e-3).to(torch::kFloat32);
  return st;
}

torch::Tensor Corpus::Normalize(const torch::Tensor& raw_mel) const {
  return (raw_mel - stats.mean) / stats.std;
}

torch::Tensor Corpus::Denormalize(const torch::Tensor& mel) const {
  return mel * stats.std + stats.mean;
}

torch::Tensor Corpus::NormalizedMel(std::size_t index) const {
  return Normalize(utterances.at(index).mel);
}

std::int64_t Corpus::IndexOf(const std::string& id) const {
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    if (utterances[i].id == id) return static_cast<std::int64_t>(i);
  }
  return -1;
}

json SpecToJson(const CorpusSpec& spec) {
  json styles = json::array();
  for (const auto& s : spec.styles) {
    json tags = json::array();
    for (const auto& t : s.tags) {
      tags.push_back({{"text", t.text},
                      {"intensity", t.intensity},
                      {"tempo", t.tempo},
                      {"gain_db", t.gain_db},
                      {"tilt_db_per_octave", t.tilt_db_per_octave}});
    }
    styles.push_back({{"name", s.name},
                      {"f0_ratio", s.f0_ratio},
                      {"gain_db", s.gain_db},
                      {"tilt_db_per_octave", s.tilt_db_per_octave},
                      {"duration_scale", s.duration_scale},
                      {"f0_slope", s.f0_slope},
                      {"tags", tags}});
  }
  return {{"n_source_speakers", spec.n_source_speakers},
          {"n_target_speakers", spec.n_target_speakers},
          {"utterances_per_speaker", spec.utterances_per_speaker},
          {"min_phonemes", spec.min_phonemes},
          {"max_phonemes", spec.max_phonemes},
          {"script_size", spec.script_size},
          {"seed", spec.seed},
          {"styles", styles},
          {"signal",
           {{"sample_rate", spec.signal.sample_rate},
            {"fft_size", spec.signal.fft_size},
            {"window_ms", spec.signal.window_ms},
            {"hop_ms", spec.signal.hop_ms},
            {"mel_bins", spec.signal.mel_bins},
            {"fmin", spec.signal.fmin},
            {"fmax", spec.signal.fmax}}}};
}

CorpusSpec SpecFromJson(const json& j) {
  CorpusSpec spec;
  StrictObject obj(j, "corpus");
  obj.Get("n_source_speakers", &spec.n_source_speakers);
  obj.Get("n_target_speakers", &spec.n_target_speakers);
  obj.Get("utterances_per_speaker", &spec.utterances_per_speaker);
  obj.Get("min_phonemes", &spec.min_phonemes);
  obj.Get("max_phonemes", &spec.max_phonemes);
  obj.Get("script_size", &spec.script_size);
  obj.Get("seed", &spec.seed);
  if (const json* styles = obj.Child("styles")) {
    if (!styles->is_array()) throw ConfigError("corpus.styles must be a list");
    spec.styles.clear();
    for (const auto& sj : *styles) {
      StyleDef s;
      StrictObject so(sj, "corpus.styles[]");
      so.Get("name", &s.name);
      so.Get("f0_ratio", &s.f0_ratio);
      so.Get("gain_db", &s.gain_db);
      so.Get("tilt_db_per_octave", &s.tilt_db_per_octave);
      so.Get("duration_scale", &s.duration_scale);
      so.Get("f0_slope", &s.f0_slope);
      if (const json* tags = so.Child("tags")) {
        for (const auto& tj : *tags) {
          TagDef t;
          StrictObject to(tj, "corpus.styles[].tags[]");
          to.Get("text", &t.text);
          to.Get("intensity", &t.intensity);
          to.Get("tempo", &t.tempo);
          to.Get("gain_db", &t.gain_db);
          to.Get("tilt_db_per_octave", &t.tilt_db_per_octave);
          to.Finish();
          s.tags.push_back(t);
        }
      }
      so.Finish();
      spec.styles.push_back(std::move(s));
    }
  }
  if (const json* sig = obj.Child("signal")) {
    StrictObject so(*sig, "corpus.signal");
    so.Get("sample_rate", &spec.signal.sample_rate);
    so.Get("fft_size", &spec.signal.fft_size);
    so.Get("window_ms", &spec.signal.window_ms);
    so.Get("hop_ms", &spec.signal.hop_ms);
    so.Get("mel_bins", &spec.signal.mel_bins);
    so.Get("fmin", &spec.signal.fmin);
    so.Get("fmax", &spec.signal.fmax);
    so.Finish();
  }
  obj.Finish();
  return spec;
}

namespace {

json TensorToJson(const torch::Tensor& t) {
  auto c = t.to(torch::kFloat32).contiguous();
  return std::vector<float>(c.data_ptr<float>(), c.data_ptr<float>() + c.numel());
}

torch::Tensor TensorFromJson(const json& j) {
  auto v = j.get<std::vector<float>>();
  return torch::tensor(v, torch::kFloat32);
}

}  // namespace

void SaveCorpus(const Corpus& corpus, const fs::path& dir) {
  fs::create_directories(dir / "mel");
  fs::create_directories(dir / "wav");
  json utts = json::array();
  for (const auto& u : corpus.utterances) {
    utts.push_back({{"id", u.id},
                    {"speaker", u.speaker_id},
                    {"source_speaker", corpus.spec.is_source_speaker(u.speaker_id)},
                    {"tags", u.style_tags},
                    {"latent_style", u.latent_style},
                    {"style_name", corpus.spec.styles.at(u.latent_style).name},
                    {"phonemes", u.phonemes},
                    {"durations", u.durations},
                    {"frames", u.num_frames()},
                    {"samples", u.waveform.defined() ? u.waveform.size(0) : 0}});
    WriteArray(dir / "mel" / (u.id + ".bin"), u.mel);
    if (u.waveform.defined()) WriteArray(dir / "wav" / (u.id + ".bin"), u.waveform);
  }
  json manifest = {{"format", "tagstyle-corpus/1"},
                   {"spec", SpecToJson(corpus.spec)},
                   {"mel_stats",
                    {{"mean", TensorToJson(corpus.stats.mean)},
                     {"std", TensorToJson(corpus.stats.std)}}},
                   {"utterances", utts}};
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw InputError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

Corpus LoadCorpus(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw InputError("no corpus manifest in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("corrupt corpus manifest: " + std::string(e.what()));
  }
  Corpus corpus;
  corpus.spec = SpecFromJson(manifest.at("spec"));
  corpus.stats.mean = TensorFromJson(manifest.at("mel_stats").at("mean"));
  corpus.stats.std = TensorFromJson(manifest.at("mel_stats").at("std"));
  for (const auto& uj : manifest.at("utterances")) {
    Utterance u;
    u.id = uj.at("id").get<std::string>();
    u.speaker_id = uj.at("speaker").get<int>();
    u.style_tags = uj.at("tags").get<std::vector<std::string>>();
    u.latent_style = uj.at("latent_style").get<int>();
    u.phonemes = uj.at("phonemes").get<std::vector<std::int64_t>>();
    u.durations = uj.at("durations").get<std::vector<std::int64_t>>();
    u.mel = ReadArray(dir / "mel" / (u.id + ".bin"));
    const auto wav = dir / "wav" / (u.id + ".bin");
    if (fs::exists(wav)) u.waveform = ReadArray(wav);
    corpus.utterances.push_back(std::move(u));
  }
  return corpus;
}

}  // namespace tagstyle
