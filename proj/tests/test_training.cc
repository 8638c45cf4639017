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
#include <map>
#include <sstream>

#include "tagstyle/batch.h"
#include "tagstyle/error.h"
#include "tagstyle/training.h"
#include "test_util.h"

using namespace tagstyle;
using tagstyle::testing::TempDir;
using tagstyle::testing::TinyConfig;

namespace {

const Corpus& TinyCorpus() {
  static const Corpus corpus = GenerateCorpus(TinyConfig().corpus);
  return corpus;
}

std::map<std::string, torch::Tensor> Params(TagStyleModel& model) {
  std::map<std::string, torch::Tensor> out;
  for (const auto& p : model->named_parameters()) out[p.key()] = p.value().detach().clone();
  return out;
}

double MaxParamDiff(TagStyleModel& a, TagStyleModel& b) {
  auto pa = Params(a), pb = Params(b);
  double d = 0;
  for (auto& [k, v] : pa) d = std::max(d, (v - pb.at(k)).abs().max().item<double>());
  return d;
}

// Loss columns (everything but wall seconds) keyed by step.
std::map<long, std::vector<double>> ReadMetrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::map<long, std::vector<double>> out;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    long step;
    fields >> step;
    std::vector<double> v(9);
    for (auto& x : v) fields >> x;
    out[step] = v;
  }
  return out;
}

}  // namespace

TEST_CASE("style source selection frequencies") {
  std::mt19937_64 rng(11);
  auto a = torch::zeros({1, 2}), b = torch::ones({1, 2});
  std::vector<bool> chose;
  CHECK(SelectStyleEmbedding(b, a, rng, 1.0, &chose)[0][0].item<float>() == 1.0f);
  CHECK(chose[0]);
  CHECK(SelectStyleEmbedding(b, a, rng, 0.0, &chose)[0][0].item<float>() == 0.0f);
  CHECK_FALSE(chose[0]);

  const auto draws = DrawStyleSources(20000, 0.5, rng);
  long speech = 0;
  long pairs[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < draws.size(); ++i) {
    speech += draws[i];
    if (i + 1 < draws.size()) ++pairs[draws[i]][draws[i + 1]];
  }
  const double freq = static_cast<double>(speech) / draws.size();
  CHECK(freq >= 0.45);
  CHECK(freq <= 0.55);
  // Consecutive draws independent: 2x2 chi-square below the 0.001 cutoff.
  const double n = draws.size() - 1.0;
  double chi2 = 0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double row = pairs[i][0] + pairs[i][1], col = pairs[0][j] + pairs[1][j];
      const double e = row * col / n;
      chi2 += (pairs[i][j] - e) * (pairs[i][j] - e) / e;
    }
  }
  CHECK(chi2 < 10.83);
}

TEST_CASE("learning rate schedule and binarization ramp") {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.warmup_steps = 100;
  CHECK(LearningRate(c, 0) == doctest::Approx(1e-5));
  CHECK(LearningRate(c, 99) == doctest::Approx(1e-3));
  CHECK(LearningRate(c, 399) == doctest::Approx(5e-4));
  CHECK(BinarizationRamp(c, 0) == 0.0);
  CHECK(BinarizationRamp(c, c.binarization_warmup / 2) == doctest::Approx(0.5));
  CHECK(BinarizationRamp(c, c.binarization_warmup * 3) == 1.0);
}

TEST_CASE("config: strict keys, overrides, hash") {
  auto j = ExperimentConfigToJson(TinyConfig());
  auto c = ResolveConfig(j, {"train.steps=7", "loss.gamma=0.5"});
  CHECK(c.train.steps == 7);
  CHECK(c.loss.gamma == 0.5);
  CHECK(c.overrides.size() == 2);
  CHECK(c.Hash() != TinyConfig().Hash());
  auto steps_only = ResolveConfig(j, {"train.steps=99"});
  CHECK(steps_only.Hash() == TinyConfig().Hash());
  auto other_seed = ResolveConfig(j, {"train.seed=4"});
  CHECK(other_seed.Hash() != TinyConfig().Hash());

  CHECK_THROWS_AS(ResolveConfig(j, {"train.stpes=7"}), ConfigError);
  CHECK_THROWS_AS(ResolveConfig(j, {"train.steps"}), ConfigError);
  CHECK_THROWS_AS(ResolveConfig(j, {"model.d_model=-4"}), ConfigError);
  CHECK_THROWS_AS(ResolveConfig(j, {"model.n_mels=80"}), ConfigError);
  CHECK_THROWS_AS(ResolveConfig(j, {"train.p_style_source=1.5"}), ConfigError);
  auto bad = j;
  bad["extra"] = 1;
  CHECK_THROWS_AS(ExperimentConfigFromJson(bad), ConfigError);
}

TEST_CASE("one step reaches every trainable component") {
  auto config = TinyConfig();
  torch::manual_seed(0);
  TagStyleModel model(config.model);
  auto embedder = MakeEmbedder(config.model);
  BatchStream stream(TinyCorpus(), 4, config.train.seed);
  auto batch = stream.BatchAt(0);
  auto result = ComputeStep(model, *embedder, batch, 0, config);
  result.loss.total.backward();
  for (const auto& child : model->named_children()) {
    double g = 0;
    for (const auto& p : child.value()->parameters()) {
      if (p.grad().defined()) g += p.grad().abs().sum().item<double>();
    }
    INFO(child.key());
    CHECK(g > 0);
  }
  CHECK(std::abs(result.loss.report.Recompute(config.loss) - result.loss.report.total) <
        1e-7);
}

TEST_CASE("padded batch equals the average of single-utterance batches") {
  auto config = TinyConfig();
  torch::manual_seed(1);
  TagStyleModel model(config.model);
  model->eval();
  model->decoder->prenet_dropout_enabled = false;
  auto embedder = MakeEmbedder(config.model);
  torch::NoGradGuard no_grad;
  const auto& corpus = TinyCorpus();
  // Pick two utterances of different lengths.
  std::size_t a = 0, b = 1;
  while (corpus.utterances[b].num_frames() == corpus.utterances[a].num_frames()) ++b;
  const std::vector<std::size_t> both{a, b}, only_a{a}, only_b{b};
  StepOptions opts{StyleSource::kSpeech, false};
  auto pair = ComputeStep(model, *embedder, Collate(corpus, both), 0, config, opts);
  auto ra = ComputeStep(model, *embedder, Collate(corpus, only_a), 0, config, opts);
  auto rb = ComputeStep(model, *embedder, Collate(corpus, only_b), 0, config, opts);
  auto check = [](const torch::Tensor& p, const torch::Tensor& x, const torch::Tensor& y) {
    const double avg = 0.5 * (x.item<double>() + y.item<double>());
    CHECK(std::abs(p.item<double>() - avg) < 1e-4 * std::max(1.0, std::abs(avg)));
  };
  check(pair.terms.mel_l1, ra.terms.mel_l1, rb.terms.mel_l1);
  check(pair.terms.align_nll, ra.terms.align_nll, rb.terms.align_nll);
  check(pair.terms.duration_l2, ra.terms.duration_l2, rb.terms.duration_l2);
  check(pair.terms.s_emb, ra.terms.s_emb, rb.terms.s_emb);
  check(pair.terms.s_rec, ra.terms.s_rec, rb.terms.s_rec);
  CHECK(torch::allclose(pair.w_s[0], ra.w_s[0], 1e-4, 1e-5));
  CHECK(torch::allclose(pair.w_s[1], rb.w_s[0], 1e-4, 1e-5));
}

TEST_CASE("training is deterministic and resumes exactly") {
  auto config = TinyConfig();
  const auto& corpus = TinyCorpus();
  auto full_dir = TempDir("train_full");
  auto again_dir = TempDir("train_again");
  auto split_dir = TempDir("train_split");

  Trainer full(config, corpus, full_dir);
  full.Run();
  CHECK(full.step() == 10);
  Trainer again(config, corpus, again_dir);
  again.Run();
  CHECK(MaxParamDiff(full.model(), again.model()) == 0.0);

  {
    Trainer first(config, corpus, split_dir);
    first.Run(5);
  }
  Trainer resumed(config, corpus, split_dir);
  CHECK(resumed.step() == 5);
  resumed.Run();
  CHECK(MaxParamDiff(full.model(), resumed.model()) < 1e-7);

  auto m_full = ReadMetrics(full_dir / "metrics.log");
  auto m_split = ReadMetrics(split_dir / "metrics.log");
  CHECK(m_full.size() == 10);
  CHECK(m_split.size() == 10);
  // Steps are logged 0-based; 5..9 are the updates made after resuming.
  for (long s = 5; s <= 9; ++s) {
    for (std::size_t k = 0; k < 8; ++k) {
      CHECK(std::abs(m_full.at(s)[k] - m_split.at(s)[k]) < 1e-7);
    }
  }
  for (const auto& f : {"config.json", "params.pt", "optimizer.pt", "state.json"}) {
    CHECK(std::filesystem::exists(split_dir / f));
  }

  // The same directory with a different trajectory is refused.
  auto changed = config;
  changed.train.seed = 99;
  CHECK_THROWS_AS(Trainer(changed, corpus, split_dir), ConfigError);
  // A longer run continues from the stored step.
  auto longer = config;
  longer.train.steps = 12;
  Trainer extended(longer, corpus, full_dir);
  CHECK(extended.step() == 10);
}

TEST_CASE("loaded checkpoints synthesize") {
  auto config = TinyConfig();
  const auto& corpus = TinyCorpus();
  auto dir = TempDir("synth");
  Trainer trainer(config, corpus, dir);
  trainer.Run(2);
  auto loaded = LoadModel(dir);
  CHECK(loaded.step == 2);
  CHECK(MaxParamDiff(loaded.model, trainer.model()) == 0.0);

  SynthesisRequest req;
  req.phonemes = {3, 4, 5};
  req.speaker = 1;
  req.tags = {"happy"};
  req.prenet_dropout = false;
  auto out = Synthesize(loaded.model, *loaded.embedder, req);
  std::int64_t total = 0;
  for (auto d : out.durations) total += d;
  CHECK(out.durations.size() == 3);
  CHECK(out.mel.size(0) == total);
  CHECK(out.mel.size(1) == 120);
  auto again = Synthesize(loaded.model, *loaded.embedder, req);
  CHECK(torch::equal(out.mel, again.mel));

  req.reference = corpus.NormalizedMel(0);
  CHECK_THROWS_AS(Synthesize(loaded.model, *loaded.embedder, req), InputError);
  req.tags.clear();
  CHECK(Synthesize(loaded.model, *loaded.embedder, req).mel.size(1) == 120);
  req.speaker = 2;
  CHECK_THROWS_AS(Synthesize(loaded.model, *loaded.embedder, req), InputError);
  req.speaker = 0;
  req.phonemes.clear();
  CHECK_THROWS_AS(Synthesize(loaded.model, *loaded.embedder, req), InputError);
}
