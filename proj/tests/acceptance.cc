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

// Acceptance run. Prints one PASS/FAIL line per criterion plus INFO lines
// with the measured numbers, and exits non-zero if any criterion fails.
//
//   tagstyle_acceptance [CACHE_DIR]
//
// Trained checkpoints are kept under CACHE_DIR (default ./acceptance_cache)
// and reused when their config hash matches, so reruns only re-evaluate.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "oracles.h"
#include "tagstyle/alignment.h"
#include "tagstyle/batch.h"
#include "tagstyle/error.h"
#include "tagstyle/eval.h"
#include "tagstyle/losses.h"
#include "tagstyle/style_encoder.h"
#include "tagstyle/training.h"

namespace fs = std::filesystem;
using namespace tagstyle;

namespace {

// Pinned tolerances and thresholds.
constexpr int kOracleInstances = 200;
constexpr double kOracleTol = 1e-6;
constexpr double kOracleSeconds = 10.0;
constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr double kClosedFormTol = 1e-6;
constexpr double kOrthonormalValue = 4.54e-5;
constexpr std::int64_t kToySteps = 20000;
constexpr double kToyMelL1 = 0.15;
constexpr double kToyRetrieval = 0.90;
constexpr std::int64_t kSmokeSteps = 3000;
constexpr double kSmokeDecrease = 0.5;
constexpr double kSeenProbe = 0.85;
constexpr double kUnseenProbe = 0.60;
constexpr double kChance = 0.25;
constexpr int kSelectionDraws = 10000;
constexpr double kSelectionTol = 0.05;
constexpr double kTagMeanTol = 1e-6;
constexpr double kTotalTol = 1e-12;
constexpr std::int64_t kResumeAt = 5;
constexpr std::int64_t kResumeSteps = 10;
constexpr double kResumeTol = 1e-7;

int failures = 0;

void Report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << " " << name << ": "
            << detail << std::endl;
  if (!ok) ++failures;
}

void Info(const std::string& s) { std::cout << "INFO " << s << std::endl; }

std::string Fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// The CPU-sized model used for the 20k-step runs.
std::vector<std::string> ToyOverrides() {
  return {"model.d_model=128",         "model.d_speaker=32",
          "model.d_style=64",          "model.adaptation_hidden=128",
          "model.ref_channels=64",     "model.align_dim=64",
          "model.duration_channels=128", "model.prenet_dim=128",
          "model.decoder_units=256",   "model.postnet_channels=128",
          "train.steps=" + std::to_string(kToySteps)};
}

// Trains (or resumes) a run in `dir`. A directory left by a different
// config is discarded.
void TrainCached(const ExperimentConfig& config, const Corpus& corpus, const fs::path& dir) {
  try {
    Trainer t(config, corpus, dir);
    if (t.step() < config.train.steps) {
      Info("training " + dir.filename().string() + " from step " + std::to_string(t.step()));
    }
    t.Run();
  } catch (const ConfigError&) {
    Info("discarding stale cache " + dir.string());
    fs::remove_all(dir);
    Trainer t(config, corpus, dir);
    t.Run();
  }
}

double LastWallSeconds(const fs::path& metrics) {
  std::ifstream in(metrics);
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  std::istringstream f(last);
  std::string field;
  double v = 0;
  while (std::getline(f, field, '\t')) v = std::atof(field.c_str());
  return v;
}

// mel_l1 column of metrics.log, indexed by step.
std::vector<double> MelL1Column(const fs::path& metrics) {
  std::ifstream in(metrics);
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  while (std::getline(in, line)) {
    std::istringstream f(line);
    long step;
    double mel;
    f >> step >> mel;
    out.push_back(mel);
  }
  return out;
}

void CheckAlignerOracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937 rng(2026);
  double worst = 0;
  int path_mismatch = 0;
  for (int i = 0; i < kOracleInstances; ++i) {
    const int n = std::uniform_int_distribution<int>(1, 4)(rng);
    const int t = std::uniform_int_distribution<int>(n, 8)(rng);
    torch::manual_seed(i);
    auto log_a = torch::log_softmax(torch::randn({n, t}, torch::kFloat64) * 2, 0);
    worst = std::max(worst, std::abs(ForwardSumNll(log_a).item<double>() -
                                     oracle::BruteForceNll(log_a)));
    if (ViterbiPath(log_a) != oracle::BruteForceBestPath(log_a)) ++path_mismatch;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Report(1, "aligner oracle",
         worst < kOracleTol && path_mismatch == 0 && secs < kOracleSeconds,
         std::to_string(kOracleInstances) + " instances, max |nll - brute| " +
             Fmt("%.3g", worst) + ", viterbi mismatches " + std::to_string(path_mismatch) +
             ", " + Fmt("%.2f s", secs));
}

// Total loss of the tiny model as a function of a handful of parameter
// entries spread over the trainable components.
struct TotalLossProbe {
  ExperimentConfig config;
  TagStyleModel model{nullptr};
  std::unique_ptr<TagEmbedder> embedder;
  Batch batch;
  std::vector<torch::Tensor> params;

  explicit TotalLossProbe(int seed) {
    config = ExperimentConfig();
    config.corpus.n_source_speakers = 1;
    config.corpus.n_target_speakers = 1;
    config.corpus.utterances_per_speaker = 2;
    config.corpus.max_phonemes = 5;
    config.corpus.seed = 10 + seed;
    auto& m = config.model;
    m.num_speakers = 2;
    m.d_model = 8;
    m.d_speaker = 4;
    m.d_style = 4;
    m.d_sem = 16;
    m.adaptation_hidden = 8;
    m.ref_channels = 4;
    m.align_dim = 4;
    m.duration_channels = 8;
    m.prenet_dim = 8;
    m.decoder_units = 8;
    m.postnet_channels = 8;
    config.train.seed = seed;
    config.train.binarization_warmup = 1;
    config.Validate();
    const auto corpus = GenerateCorpus(config.corpus);
    torch::manual_seed(seed);
    model = TagStyleModel(config.model);
    model->to(torch::kFloat64);
    embedder = MakeEmbedder(config.model);
    // One utterance per speaker.
    const std::vector<std::size_t> idx{0, 2};
    batch = Collate(corpus, idx);
    params = {model->adaptation->fc3->bias, model->reference_encoder->out->bias,
              model->aligner->text_conv2->bias, model->duration_predictor->out->bias,
              model->decoder->projection->bias, model->style_proj->bias};
  }

  torch::Tensor Flat() {
    std::vector<torch::Tensor> parts;
    for (auto& p : params) parts.push_back(p.detach().narrow(0, 0, std::min<std::int64_t>(3, p.size(0))));
    return torch::cat(parts).clone();
  }

  void Assign(const torch::Tensor& flat) {
    torch::NoGradGuard g;
    std::int64_t off = 0;
    for (auto& p : params) {
      const auto k = std::min<std::int64_t>(3, p.size(0));
      p.narrow(0, 0, k).copy_(flat.narrow(0, off, k));
      off += k;
    }
  }

  double Total() { return ComputeStep(model, *embedder, batch, 5, config).loss.total.item<double>(); }

  torch::Tensor Grad() {
    model->zero_grad();
    ComputeStep(model, *embedder, batch, 5, config).loss.total.backward();
    std::vector<torch::Tensor> parts;
    for (auto& p : params) {
      parts.push_back(p.grad().narrow(0, 0, std::min<std::int64_t>(3, p.size(0))));
    }
    return torch::cat(parts).clone();
  }
};

void CheckGradients() {
  std::ostringstream detail;
  bool ok = true;
  for (int seed = 0; seed < 3; ++seed) {
    torch::manual_seed(100 + seed);
    auto log_a = torch::log_softmax(torch::randn({3, 6}, torch::kFloat64), 0);
    auto x = log_a.clone().requires_grad_(true);
    ForwardSumNll(x).backward();
    auto fd = oracle::FiniteDifference(
        [](const torch::Tensor& v) { return ForwardSumNll(v).item<double>(); }, log_a, kFdStep);
    const double e1 = oracle::RelativeError(x.grad(), fd);

    auto wt = torch::randn({4, 6}, torch::kFloat64), wp = torch::randn({4, 6}, torch::kFloat64);
    auto y = wt.clone().requires_grad_(true);
    StyleContrastiveLoss(y, wp, 0.1).backward();
    auto fd2 = oracle::FiniteDifference(
        [&](const torch::Tensor& v) { return StyleContrastiveLoss(v, wp, 0.1).item<double>(); },
        wt, kFdStep);
    const double e2 = oracle::RelativeError(y.grad(), fd2);

    TotalLossProbe probe(seed);
    const auto x0 = probe.Flat();
    const auto analytic = probe.Grad();
    auto fd3 = oracle::FiniteDifference(
        [&](const torch::Tensor& v) {
          probe.Assign(v);
          return probe.Total();
        },
        x0, kFdStep);
    probe.Assign(x0);
    const double e3 = oracle::RelativeError(analytic, fd3);

    ok = ok && e1 < kFdRelTol && e2 < kFdRelTol && e3 < kFdRelTol;
    detail << (seed ? "; " : "") << "forward_sum " << Fmt("%.2g", e1) << " contrastive "
           << Fmt("%.2g", e2) << " total " << Fmt("%.2g", e3);
  }
  Report(2, "finite-difference gradients", ok, "relative errors " + detail.str());
}

void CheckClosedForms() {
  auto same = torch::ones({4, 8}, torch::kFloat64);
  const double a = StyleContrastiveLoss(same, same, 0.1).item<double>();
  auto eye = torch::eye(2, torch::kFloat64);
  const double b = StyleContrastiveLoss(eye, eye, 0.1).item<double>();
  Report(3, "closed-form contrastive values",
         std::abs(a - std::log(4.0)) < kClosedFormTol &&
             std::abs(b - kOrthonormalValue) < kClosedFormTol,
         Fmt("identical N=4 -> %.9f", a) + Fmt(" (log 4 = %.9f)", std::log(4.0)) +
             Fmt(", orthonormal N=2 -> %.4g", b));
}

struct ToyRuns {
  EvalReport full, ablation;
};

ToyRuns CheckToyOverfit(const fs::path& cache) {
  // Smoke: 12 utterances, 3k steps.
  auto smoke = LoadExperimentConfig(
      "", {"corpus.n_source_speakers=1", "corpus.n_target_speakers=1",
           "corpus.utterances_per_speaker=6", "model.num_speakers=2", "model.d_model=128",
           "model.d_speaker=32", "model.d_style=64", "model.adaptation_hidden=128",
           "model.ref_channels=64", "model.align_dim=64", "model.duration_channels=128",
           "model.prenet_dim=128", "model.decoder_units=256", "model.postnet_channels=128",
           "train.batch_size=4", "train.steps=" + std::to_string(kSmokeSteps)});
  const auto smoke_corpus = GenerateCorpus(smoke.corpus);
  TrainCached(smoke, smoke_corpus, cache / "smoke");
  const auto mel = MelL1Column(cache / "smoke" / "metrics.log");
  double first = 0, last = 0;
  for (int i = 0; i < 100; ++i) {
    first += mel.at(i) / 100;
    last += mel.at(mel.size() - 100 + i) / 100;
  }
  const bool smoke_ok = mel.size() == static_cast<std::size_t>(kSmokeSteps) &&
                        last <= (1 - kSmokeDecrease) * first;

  const auto config = LoadExperimentConfig("", ToyOverrides());
  auto overrides = ToyOverrides();
  overrides.push_back("train.use_contrastive=false");
  const auto ablation = LoadExperimentConfig("", overrides);
  const auto corpus = GenerateCorpus(config.corpus);
  TrainCached(config, corpus, cache / "main");
  TrainCached(ablation, corpus, cache / "no_contrastive");

  ToyRuns runs;
  {
    auto m = LoadModel(cache / "main");
    runs.full = Evaluate(m.model, *m.embedder, corpus, m.config);
    WriteReport(runs.full, cache / "main" / "eval");

    // Speech-side style similarity across speakers, same vs different style.
    torch::NoGradGuard g;
    m.model->eval();
    std::vector<torch::Tensor> ws;
    for (std::size_t s = 0; s < corpus.utterances.size(); s += 32) {
      std::vector<std::size_t> idx;
      for (auto i = s; i < std::min(corpus.utterances.size(), s + 32); ++i) idx.push_back(i);
      auto b = Collate(corpus, idx);
      ws.push_back(m.model->reference_encoder(b.mel, b.mel_lengths));
    }
    auto w = torch::nn::functional::normalize(torch::cat(ws), {});
    auto cos = torch::mm(w, w.t());
    double same = 0, diff = 0;
    long ns = 0, nd = 0;
    for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
      for (std::size_t j = 0; j < corpus.utterances.size(); ++j) {
        const auto& a = corpus.utterances[i];
        const auto& b = corpus.utterances[j];
        if (a.speaker_id == b.speaker_id) continue;
        const double c = cos[i][j].item<double>();
        if (a.latent_style == b.latent_style) {
          same += c;
          ++ns;
        } else {
          diff += c;
          ++nd;
        }
      }
    }
    Info(Fmt("cross-speaker w_s cosine: same style %.3f", same / ns) +
         Fmt(", different style %.3f", diff / nd));
  }
  {
    auto m = LoadModel(cache / "no_contrastive");
    runs.ablation = EvaluateRetrieval(m.model, *m.embedder, corpus, m.config);
  }
  const auto& r = runs.full;
  Info(Fmt("toy run wall time %.0f s", LastWallSeconds(cache / "main" / "metrics.log")));
  Info(Fmt("toy duration MAE %.3f frames per phoneme (predicted vs aligner)", r.duration_mae));
  Report(4, "toy overfit",
         smoke_ok && r.mel_l1 < kToyMelL1 && r.retrieval >= kToyRetrieval,
         Fmt("20k steps: mel L1 %.4f", r.mel_l1) + Fmt(" (< %.2f)", kToyMelL1) +
             Fmt(", retrieval %.4f", r.retrieval) + Fmt(" (>= %.2f)", kToyRetrieval) +
             Fmt("; smoke mel_l1 first-100 mean %.4f", first) +
             Fmt(" -> last-100 mean %.4f", last) +
             Fmt(" (%.1f%% decrease)", 100 * (1 - last / first)));
  return runs;
}

void CheckTransfer(const EvalReport& r) {
  const double seen = r.seen.Accuracy(), unseen = r.unseen.Accuracy();
  Report(5, "cross-speaker transfer probe",
         seen >= kSeenProbe && unseen >= kUnseenProbe && seen > kChance && unseen > kChance &&
             unseen <= seen,
         Fmt("seen %.4f", seen) + Fmt(" (>= %.2f)", kSeenProbe) + Fmt(", unseen %.4f", unseen) +
             Fmt(" (>= %.2f)", kUnseenProbe) + Fmt(", chance %.2f", kChance));
}

void CheckAblation(const ToyRuns& runs) {
  Report(6, "ablation direction", runs.ablation.retrieval < runs.full.retrieval,
         Fmt("retrieval without contrastive %.4f", runs.ablation.retrieval) +
             Fmt(" vs full %.4f", runs.full.retrieval));
}

void CheckProtocol() {
  std::mt19937_64 rng(7);
  const auto draws = DrawStyleSources(kSelectionDraws, TrainConfig{}.p_style_source, rng);
  long speech = 0;
  for (bool d : draws) speech += d;
  const double freq = static_cast<double>(speech) / kSelectionDraws;

  StubEmbedder embedder(256, 0);
  const std::vector<std::string> tags{"happy", "very happy", "bright", "cheerful"};
  auto hand = torch::zeros({256}, torch::kFloat64);
  for (const auto& t : tags) hand += embedder.Embed(t);
  hand /= 4.0;
  const double mean_err = (MeanTagEmbedding(tags, embedder) - hand).abs().max().item<double>();
  torch::manual_seed(0);
  AdaptationLayer adaptation(256, 32, 16);
  adaptation->to(torch::kFloat64);
  const double enc_err =
      (TagEncode(tags, embedder, adaptation) - adaptation(hand)).abs().max().item<double>();

  const LossWeights w;
  auto z = torch::zeros({}, torch::kFloat64);
  const double total =
      TotalLoss({z, z, z, z, z, z, torch::full({}, 2.0, torch::kFloat64)}, w).report.total;
  const bool ok = std::abs(freq - 0.5) <= kSelectionTol && mean_err < kTagMeanTol &&
                  enc_err < kTagMeanTol && w.alpha == 1.0 && w.beta == 1.0 && w.gamma == 0.01 &&
                  std::abs(total - 0.02) < kTotalTol;
  Report(7, "protocol invariants", ok,
         Fmt("w_s frequency %.4f", freq) + " over " + std::to_string(kSelectionDraws) +
             Fmt(" draws, tag mean error %.2g", std::max(mean_err, enc_err)) +
             Fmt(", s_con=2 total %.6f", total) + Fmt(" (alpha %.1f", w.alpha) +
             Fmt(" beta %.1f", w.beta) + Fmt(" gamma %.2f)", w.gamma));
}

void CheckResume(const fs::path& cache) {
  auto config = LoadExperimentConfig(
      "", {"corpus.n_source_speakers=1", "corpus.n_target_speakers=1",
           "corpus.utterances_per_speaker=6", "corpus.max_phonemes=6", "model.num_speakers=2",
           "model.d_model=32", "model.d_speaker=8", "model.d_style=16", "model.d_sem=64",
           "model.adaptation_hidden=32", "model.ref_channels=16", "model.align_dim=16",
           "model.duration_channels=32", "model.prenet_dim=32", "model.decoder_units=32",
           "model.postnet_channels=32", "train.batch_size=4", "train.warmup_steps=4",
           "train.binarization_warmup=8", "train.seed=3",
           "train.steps=" + std::to_string(kResumeAt + kResumeSteps)});
  const auto corpus = GenerateCorpus(config.corpus);
  const auto a_dir = cache / "resume_straight", b_dir = cache / "resume_split";
  fs::remove_all(a_dir);
  fs::remove_all(b_dir);
  std::vector<LossReport> straight, split;
  {
    Trainer t(config, corpus, a_dir);
    for (std::int64_t s = 0; s < config.train.steps; ++s) {
      t.Run(s + 1);
      straight.push_back(t.last_report());
    }
  }
  {
    Trainer t(config, corpus, b_dir);
    t.Run(kResumeAt);
  }
  Trainer t(config, corpus, b_dir);
  for (std::int64_t s = kResumeAt; s < config.train.steps; ++s) {
    t.Run(s + 1);
    split.push_back(t.last_report());
  }
  double worst = 0;
  for (std::int64_t k = 0; k < kResumeSteps; ++k) {
    const auto& x = straight[kResumeAt + k];
    const auto& y = split[k];
    for (auto [p, q] : {std::pair{x.mel_l1, y.mel_l1}, {x.align_nll, y.align_nll},
                        {x.binarization, y.binarization}, {x.duration_l2, y.duration_l2},
                        {x.s_emb, y.s_emb}, {x.s_rec, y.s_rec}, {x.s_con, y.s_con},
                        {x.total, y.total}}) {
      worst = std::max(worst, std::abs(p - q));
    }
  }
  Report(8, "deterministic resume", worst <= kResumeTol,
         "interrupted at step " + std::to_string(kResumeAt) + ", " +
             std::to_string(kResumeSteps) + " post-resume steps, max loss difference " +
             Fmt("%.3g", worst));
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  const fs::path cache = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_cache");
  fs::create_directories(cache);
  try {
    CheckAlignerOracle();
    CheckGradients();
    CheckClosedForms();
    CheckProtocol();
    CheckResume(cache);
    const auto runs = CheckToyOverfit(cache);
    CheckTransfer(runs.full);
    CheckAblation(runs);
  } catch (const std::exception& e) {
    std::cout << "FAIL acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
