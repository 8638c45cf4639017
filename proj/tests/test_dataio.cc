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

#include "testing.h"

#include <cmath>
#include <fstream>
#include <iterator>
#include <set>

#include "tagstyle/array_io.h"
#include "tagstyle/batch.h"
#include "tagstyle/corpus.h"
#include "tagstyle/error.h"
#include "tagstyle/probe.h"
#include "tagstyle/signal.h"
#include "test_util.h"

using namespace tagstyle;

namespace {

torch::Tensor Sine(double hz, std::int64_t samples, int rate = 16000) {
  auto n = torch::arange(samples, torch::kFloat64);
  return torch::sin(2 * M_PI * hz * n / rate).to(torch::kFloat32);
}

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

CorpusSpec SmallSpec(std::uint64_t seed = 7) {
  CorpusSpec s;
  s.n_source_speakers = 2;
  s.n_target_speakers = 2;
  s.utterances_per_speaker = 8;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("signal constants land on whole samples") {
  SignalConfig cfg;
  CHECK(cfg.window_samples() == 800);
  CHECK(cfg.hop_samples() == 200);
  SignalConfig bad;
  bad.hop_ms = 12.53;
  CHECK_THROWS_AS(bad.Validate(), ConfigError);
}

TEST_CASE("one second gives 77 frames") {
  SignalConfig cfg;
  CHECK(FrameCount(16000, cfg) == (16000 - 800) / 200 + 1);
  auto mel = MelSpectrogram(Sine(300, 16000), cfg);
  CHECK(mel.size(0) == 77);
  CHECK(mel.size(1) == 120);
}

TEST_CASE("silence sits at the log floor") {
  auto mel = MelSpectrogram(torch::zeros({16000}), SignalConfig{});
  const float floor = static_cast<float>(std::log(1e-5));
  CHECK(torch::all(mel == floor).item<bool>());
}

TEST_CASE("440 Hz peaks in the filter centered nearest 440 Hz") {
  SignalConfig cfg;
  // Independent HTK centers: evenly spaced on 2595 log10(1 + f / 700).
  auto mel_of = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto hz_of = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  const double lo = mel_of(0.0), hi = mel_of(8000.0);
  int nearest = -1;
  double best = 1e9;
  for (int k = 0; k < 120; ++k) {
    const double c = hz_of(lo + (hi - lo) * (k + 1) / 121.0);
    if (std::abs(c - 440.0) < best) {
      best = std::abs(c - 440.0);
      nearest = k;
    }
  }
  auto mel = MelSpectrogram(Sine(440, 16000), cfg);
  auto arg = mel.argmax(1);
  CHECK(torch::all(arg == arg[0]).item<bool>());
  CHECK(arg[0].item<std::int64_t>() == nearest);
}

TEST_CASE("shifting by one hop shifts frames by one") {
  SignalConfig cfg;
  torch::manual_seed(0);
  auto x = torch::randn({8000});
  auto a = MelSpectrogram(x, cfg);
  auto b = MelSpectrogram(x.narrow(0, 200, 7800), cfg);
  REQUIRE(b.size(0) == a.size(0) - 1);
  CHECK(torch::allclose(a.narrow(0, 1, b.size(0)), b, 0, 1e-5));
}

TEST_CASE("too-short waveform is an input error") {
  CHECK_THROWS_AS(MelSpectrogram(torch::zeros({799}), SignalConfig{}), InputError);
}

TEST_CASE("array files round-trip bit-exactly") {
  auto dir = testing::TempDir("array");
  torch::manual_seed(1);
  for (auto dtype : {torch::kFloat32, torch::kFloat64, torch::kInt64, torch::kInt32}) {
    auto x = (torch::randn({5, 3}) * 100).to(dtype);
    WriteArray(dir / "x.bin", x);
    auto y = ReadArray(dir / "x.bin");
    CHECK((y.scalar_type() == x.scalar_type()));
    CHECK(torch::equal(x, y));
  }
  auto v = torch::randn({9});
  WriteArray(dir / "v.bin", v);
  CHECK(torch::equal(ReadArray(dir / "v.bin"), v));
  CHECK(std::filesystem::file_size(dir / "v.bin") == 16 + 9 * 4);
}

TEST_CASE("corpus generation is deterministic and byte-identical on disk") {
  auto a = GenerateCorpus(SmallSpec(7));
  auto b = GenerateCorpus(SmallSpec(7));
  auto da = testing::TempDir("corpus_a"), db = testing::TempDir("corpus_b");
  SaveCorpus(a, da);
  SaveCorpus(b, db);
  CHECK(Slurp(da / "manifest.json") == Slurp(db / "manifest.json"));
  for (const auto& u : a.utterances) {
    CHECK(Slurp(da / "mel" / (u.id + ".bin")) == Slurp(db / "mel" / (u.id + ".bin")));
    CHECK(Slurp(da / "wav" / (u.id + ".bin")) == Slurp(db / "wav" / (u.id + ".bin")));
  }
  auto c = GenerateCorpus(SmallSpec(8));
  CHECK_FALSE(torch::equal(a.utterances[0].waveform, c.utterances[0].waveform));
}

TEST_CASE("saved corpora load back exactly") {
  auto a = GenerateCorpus(SmallSpec());
  auto dir = testing::TempDir("corpus_rt");
  SaveCorpus(a, dir);
  auto b = LoadCorpus(dir);
  REQUIRE(b.utterances.size() == a.utterances.size());
  for (std::size_t i = 0; i < a.utterances.size(); ++i) {
    const auto& x = a.utterances[i];
    const auto& y = b.utterances[i];
    CHECK(x.id == y.id);
    CHECK(x.phonemes == y.phonemes);
    CHECK(x.style_tags == y.style_tags);
    CHECK(x.latent_style == y.latent_style);
    CHECK(x.speaker_id == y.speaker_id);
    CHECK(torch::equal(x.mel, y.mel));
    CHECK(torch::equal(x.waveform, y.waveform));
  }
  CHECK(torch::equal(a.stats.mean, b.stats.mean));
  CHECK(torch::equal(a.stats.std, b.stats.std));
  CHECK_THROWS_AS(LoadCorpus(dir / "missing"), InputError);
}

TEST_CASE("corpus structure: disjointness, tag counts, frame formula") {
  CorpusSpec spec;
  spec.n_source_speakers = 2;
  spec.n_target_speakers = 2;
  spec.utterances_per_speaker = 12;
  auto corpus = GenerateCorpus(spec);
  std::set<std::string> neutral_tags;
  for (const auto& t : spec.styles[0].tags) neutral_tags.insert(t.text);
  std::set<int> target_styles;
  for (const auto& u : corpus.utterances) {
    CHECK(u.style_tags.size() >= 1);
    CHECK(u.style_tags.size() <= 8);
    CHECK_FALSE(u.phonemes.empty());
    CHECK(u.mel.size(0) == FrameCount(u.waveform.size(0), spec.signal));
    std::int64_t total = 0;
    for (auto d : u.durations) total += d;
    CHECK(total == u.mel.size(0));
    if (spec.is_source_speaker(u.speaker_id)) {
      CHECK(u.latent_style == 0);
      for (const auto& t : u.style_tags) CHECK(neutral_tags.count(t) == 1);
    } else {
      target_styles.insert(u.latent_style);
    }
  }
  CHECK(target_styles.size() == spec.styles.size());
}

TEST_CASE("invalid corpus specs are configuration errors") {
  CorpusSpec s;
  s.styles.clear();
  CHECK_THROWS_AS(GenerateCorpus(s), ConfigError);
  CorpusSpec z;
  z.n_source_speakers = 0;
  z.n_target_speakers = 0;
  CHECK_THROWS_AS(GenerateCorpus(z), ConfigError);
  nlohmann::json j = SpecToJson(CorpusSpec{});
  j["bogus"] = 1;
  CHECK_THROWS_AS(SpecFromJson(j), ConfigError);
}

TEST_CASE("a linear probe separates the latent styles") {
  auto corpus = GenerateCorpus(CorpusSpec{});
  auto probe = StyleProbe::Fit(corpus);
  std::vector<torch::Tensor> mels;
  std::vector<int> labels;
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    mels.push_back(corpus.NormalizedMel(i));
    labels.push_back(corpus.utterances[i].latent_style);
  }
  CHECK(probe.Accuracy(mels, labels) >= 0.95);
}

TEST_CASE("batches: sizes, coverage, determinism, padding") {
  CorpusSpec spec;
  spec.n_source_speakers = 1;
  spec.n_target_speakers = 1;
  spec.utterances_per_speaker = 5;
  auto corpus = GenerateCorpus(spec);
  REQUIRE(corpus.utterances.size() == 10);

  BatchStream stream(corpus, 4, 11);
  CHECK(stream.batches_per_epoch() == 3);
  std::vector<std::int64_t> sizes;
  std::multiset<std::size_t> seen;
  for (int s = 0; s < 3; ++s) {
    auto idx = stream.IndicesAt(s);
    sizes.push_back(static_cast<std::int64_t>(idx.size()));
    seen.insert(idx.begin(), idx.end());
  }
  CHECK((sizes == std::vector<std::int64_t>{4, 4, 2}));
  for (std::size_t i = 0; i < 10; ++i) CHECK(seen.count(i) == 1);

  BatchStream again(corpus, 4, 11);
  for (int s = 0; s < 6; ++s) CHECK(again.IndicesAt(s) == stream.IndicesAt(s));
  CHECK(stream.EpochOrder(0) != stream.EpochOrder(1));

  BatchStream single(corpus, 1, 11);
  for (int s = 0; s < 10; ++s) {
    auto b = single.BatchAt(s);
    CHECK(b.mel.size(1) == b.mel_lengths[0].item<std::int64_t>());
    CHECK(b.phonemes.size(1) == b.phoneme_lengths[0].item<std::int64_t>());
  }

  auto b = stream.BatchAt(0);
  for (std::int64_t k = 0; k < b.size(); ++k) {
    const auto t = b.mel_lengths[k].item<std::int64_t>();
    CHECK(t <= b.mel.size(1));
    CHECK(b.mel_mask()[k].sum().item<std::int64_t>() == t);
    if (t < b.mel.size(1)) {
      CHECK(b.mel[k].narrow(0, t, b.mel.size(1) - t).abs().sum().item<double>() == 0);
    }
    const auto n = b.phoneme_lengths[k].item<std::int64_t>();
    CHECK(b.phoneme_mask()[k].sum().item<std::int64_t>() == n);
  }
  CHECK_THROWS_AS(BatchStream(corpus, 0, 1), ConfigError);
  Corpus empty;
  CHECK_THROWS_AS(BatchStream(empty, 4, 1), InputError);
}
