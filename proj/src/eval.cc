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

#include "tagstyle/eval.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "tagstyle/array_io.h"
#include "tagstyle/batch.h"
#include "tagstyle/error.h"
#include "tagstyle/rng.h"

namespace tagstyle {

namespace {

constexpr std::uint64_t kEvalOrderStream = 0xe7a1;
constexpr std::uint64_t kPromptStream = 0x9a0b;
constexpr std::uint64_t kSynthStream = 0x5a;

// Restores model mode and the decoder dropout flag on scope exit.
class EvalScope {
 public:
  EvalScope(TagStyleModel& model, bool prenet_dropout)
      : model_(model),
        was_training_(model->is_training()),
        dropout_(model->decoder->prenet_dropout_enabled) {
    model_->eval();
    model_->decoder->prenet_dropout_enabled = prenet_dropout;
  }
  ~EvalScope() {
    model_->train(was_training_);
    model_->decoder->prenet_dropout_enabled = dropout_;
  }

 private:
  TagStyleModel& model_;
  bool was_training_;
  bool dropout_;
};

double Cosine(const torch::Tensor& a, const torch::Tensor& b) {
  return torch::nn::functional::cosine_similarity(
             a.unsqueeze(0), b.unsqueeze(0),
             torch::nn::functional::CosineSimilarityFuncOptions().dim(1))
      .item<double>();
}

nlohmann::json GridToJson(const TransferGrid& g) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : g.cells) {
    cells.push_back({{"speaker", c.speaker},
                     {"style", c.style},
                     {"correct", c.correct},
                     {"total", c.total}});
  }
  return {{"accuracy", g.Accuracy()},
          {"cells", cells},
          {"labels", g.labels},
          {"predicted", g.predicted}};
}

}  // namespace

double RetrievalAccuracy(const torch::Tensor& w_t, const torch::Tensor& w_p) {
  if (w_t.dim() != 2 || w_t.sizes() != w_p.sizes() || w_t.size(0) < 1) {
    throw InputError("retrieval expects matching [B >= 1, d] inputs");
  }
  auto a = torch::nn::functional::normalize(
      w_t.to(torch::kFloat64), torch::nn::functional::NormalizeFuncOptions().dim(1));
  auto b = torch::nn::functional::normalize(
      w_p.to(torch::kFloat64), torch::nn::functional::NormalizeFuncOptions().dim(1));
  auto best = torch::matmul(a, b.t()).argmax(1);
  auto hits = (best == torch::arange(w_t.size(0), best.options())).sum();
  return hits.item<double>() / static_cast<double>(w_t.size(0));
}

double TransferGrid::Accuracy() const {
  if (labels.empty()) return 0.0;
  int correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += labels[i] == predicted[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

EvalReport EvaluateRetrieval(TagStyleModel& model, const TagEmbedder& embedder,
                             const Corpus& corpus, const ExperimentConfig& config,
                             const EvalOptions& options) {
  if (corpus.utterances.empty()) throw InputError("cannot evaluate on an empty corpus");
  if (options.batch_size < 1) throw ConfigError("eval batch size must be >= 1");
  torch::NoGradGuard no_grad;
  EvalScope scope(model, options.prenet_dropout);

  std::vector<std::size_t> order(corpus.utterances.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(MixSeed(options.seed, kEvalOrderStream));
  std::shuffle(order.begin(), order.end(), rng);

  EvalReport rep;
  std::vector<torch::Tensor> wt, wp;
  double correct = 0, mel_l1 = 0, dur_err = 0;
  std::int64_t phonemes = 0;
  StepOptions so;
  so.style_source = StyleSource::kTags;
  so.sample_tags = false;
  for (std::size_t start = 0, chunk = 0; start < order.size();
       start += options.batch_size, ++chunk) {
    const auto end = std::min(order.size(), start + options.batch_size);
    std::span<const std::size_t> idx(order.data() + start, end - start);
    const Batch batch = Collate(corpus, idx);
    const auto r = ComputeStep(model, embedder, batch,
                               config.train.steps + static_cast<std::int64_t>(chunk),
                               config, so);
    const auto b = batch.size();
    wt.push_back(r.w_t.to(torch::kFloat32));
    wp.push_back(r.w_p.to(torch::kFloat32));
    rep.batch_sizes.push_back(b);
    correct += RetrievalAccuracy(r.w_t, r.w_p) * b;

    auto target = batch.mel.to(r.mel.mel_after.scalar_type());
    auto m = batch.mel_mask().to(target.scalar_type()).unsqueeze(-1);
    auto per = ((r.mel.mel_after - target).abs() * m).sum({1, 2}) /
               (batch.mel_lengths.to(target.scalar_type()) * target.size(2));
    mel_l1 += per.sum().item<double>();
    for (std::int64_t k = 0; k < b; ++k) {
      const auto n = batch.phoneme_lengths[k].item<std::int64_t>();
      const auto pred = DurationsFromLog(r.log_duration[k].narrow(0, 0, n));
      auto ref = r.hard.durations[k];
      for (std::int64_t i = 0; i < n; ++i) {
        dur_err += std::abs(pred[i] - ref[i].item<std::int64_t>());
      }
      phonemes += n;
      rep.utterance_ids.push_back(corpus.utterances[idx[k]].id);
    }
  }
  const auto total = static_cast<double>(order.size());
  rep.retrieval = correct / total;
  rep.mel_l1 = mel_l1 / total;
  rep.duration_mae = dur_err / static_cast<double>(phonemes);
  rep.w_t = torch::cat(wt, 0);
  rep.w_p = torch::cat(wp, 0);
  return rep;
}

void EvaluateTransfer(TagStyleModel& model, const TagEmbedder& embedder,
                      const Corpus& corpus, const EvalOptions& options,
                      EvalReport* report) {
  const auto& spec = corpus.spec;
  const int n_styles = static_cast<int>(spec.styles.size());
  const StyleProbe probe = StyleProbe::Fit(corpus, options.probe_iterations,
                                           options.probe_l2);
  {
    std::vector<torch::Tensor> mels;
    std::vector<int> labels;
    for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
      mels.push_back(corpus.NormalizedMel(i));
      labels.push_back(corpus.utterances[i].latent_style);
    }
    report->probe_train_accuracy = probe.Accuracy(mels, labels);
  }

  const auto u = corpus.utterances.size();
  std::vector<torch::Tensor> seen_feats, unseen_feats;
  for (int spk = 0; spk < spec.num_speakers(); ++spk) {
    const bool source = spec.is_source_speaker(spk);
    for (int s = source ? 1 : 0; s < n_styles; ++s) {
      TransferGrid& grid = source ? report->unseen : report->seen;
      auto& feats = source ? unseen_feats : seen_feats;
      GridCell cell{spk, s, 0, 0};
      const auto& tags = spec.styles[s].tags;
      for (std::size_t k = 0; k < tags.size(); ++k) {
        const auto pick = MixSeed(options.seed, kPromptStream, spk, s, k) % u;
        SynthesisRequest req;
        req.phonemes = corpus.utterances[pick].phonemes;
        req.speaker = spk;
        req.tags = {tags[k].text};
        req.prenet_dropout = options.prenet_dropout;
        req.seed = MixSeed(options.seed, kSynthStream, spk, s, k);
        const auto res = Synthesize(model, embedder, req);
        const int pred = probe.Predict(res.mel);
        feats.push_back(StyleProbe::Features(res.mel).to(torch::kFloat32));
        grid.labels.push_back(s);
        grid.predicted.push_back(pred);
        cell.correct += pred == s;
        ++cell.total;
      }
      grid.cells.push_back(cell);
    }
  }
  if (!seen_feats.empty()) report->seen.features = torch::stack(seen_feats);
  if (!unseen_feats.empty()) report->unseen.features = torch::stack(unseen_feats);
}

void EvaluateComposition(TagStyleModel& model, const TagEmbedder& embedder,
                         const Corpus& corpus, EvalReport* report) {
  torch::NoGradGuard no_grad;
  const auto& styles = corpus.spec.styles;
  auto encode = [&](const std::string& tag) {
    return TagEncode({tag}, embedder, model->adaptation).to(torch::kFloat64);
  };
  // Per style: (quantified tag, its base tag) pairs, and the set of bases.
  std::vector<std::vector<std::pair<std::string, std::string>>> pairs(styles.size());
  std::vector<std::set<std::string>> bases(styles.size());
  for (std::size_t s = 0; s < styles.size(); ++s) {
    std::set<std::string> vocab;
    for (const auto& t : styles[s].tags) vocab.insert(t.text);
    for (const auto& t : styles[s].tags) {
      for (const std::string q : {"very ", "little "}) {
        if (t.text.rfind(q, 0) == 0 && vocab.count(t.text.substr(q.size()))) {
          pairs[s].emplace_back(t.text, t.text.substr(q.size()));
          bases[s].insert(t.text.substr(q.size()));
        }
      }
    }
  }
  std::int64_t hits = 0, trials = 0;
  for (std::size_t s = 0; s < styles.size(); ++s) {
    for (const auto& [quantified, base] : pairs[s]) {
      const auto q = encode(quantified);
      const double own = Cosine(q, encode(base));
      for (std::size_t o = 0; o < styles.size(); ++o) {
        if (o == s) continue;
        for (const auto& other : bases[o]) {
          hits += own > Cosine(q, encode(other));
          ++trials;
        }
      }
    }
  }
  report->composition_trials = trials;
  report->composition_rate = trials ? static_cast<double>(hits) / trials : 0.0;
}

EvalReport Evaluate(TagStyleModel& model, const TagEmbedder& embedder,
                    const Corpus& corpus, const ExperimentConfig& config,
                    const EvalOptions& options) {
  EvalReport rep = EvaluateRetrieval(model, embedder, corpus, config, options);
  EvaluateTransfer(model, embedder, corpus, options, &rep);
  EvaluateComposition(model, embedder, corpus, &rep);
  return rep;
}

nlohmann::json ReportToJson(const EvalReport& r) {
  return {{"step", r.step},
          {"retrieval_accuracy", r.retrieval},
          {"retrieval_batch_sizes", r.batch_sizes},
          {"utterance_ids", r.utterance_ids},
          {"mel_l1", r.mel_l1},
          {"duration_mae_frames", r.duration_mae},
          {"probe_train_accuracy", r.probe_train_accuracy},
          {"seen", GridToJson(r.seen)},
          {"unseen", GridToJson(r.unseen)},
          {"composition_rate", r.composition_rate},
          {"composition_trials", r.composition_trials}};
}

std::string ReportToText(const EvalReport& r) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "checkpoint step        %lld\n",
                static_cast<long long>(r.step));
  out << buf;
  std::snprintf(buf, sizeof(buf), "retrieval accuracy     %.4f  (batches of %lld)\n",
                r.retrieval,
                static_cast<long long>(r.batch_sizes.empty() ? 0 : r.batch_sizes[0]));
  out << buf;
  std::snprintf(buf, sizeof(buf), "train mel L1           %.4f\n", r.mel_l1);
  out << buf;
  std::snprintf(buf, sizeof(buf), "duration MAE (frames)  %.4f\n", r.duration_mae);
  out << buf;
  std::snprintf(buf, sizeof(buf), "probe train accuracy   %.4f\n", r.probe_train_accuracy);
  out << buf;
  std::snprintf(buf, sizeof(buf), "seen transfer probe    %.4f  (%zu mels)\n",
                r.seen.Accuracy(), r.seen.labels.size());
  out << buf;
  std::snprintf(buf, sizeof(buf), "unseen transfer probe  %.4f  (%zu mels)\n",
                r.unseen.Accuracy(), r.unseen.labels.size());
  out << buf;
  std::snprintf(buf, sizeof(buf), "tag composition rate   %.4f  (%lld trials)\n",
                r.composition_rate, static_cast<long long>(r.composition_trials));
  out << buf;
  for (const auto* g : {&r.seen, &r.unseen}) {
    out << (g == &r.seen ? "seen cells" : "unseen cells") << " (speaker style correct/total)\n";
    for (const auto& c : g->cells) {
      std::snprintf(buf, sizeof(buf), "  %2d %2d %d/%d\n", c.speaker, c.style, c.correct,
                    c.total);
      out << buf;
    }
  }
  return out.str();
}

void WriteReport(const EvalReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "report.txt");
    out << ReportToText(r);
  }
  {
    std::ofstream out(dir / "report.json");
    out << ReportToJson(r).dump(2) << "\n";
  }
  if (r.w_t.defined()) WriteArray(dir / "w_t.bin", r.w_t);
  if (r.w_p.defined()) WriteArray(dir / "w_p.bin", r.w_p);
  if (r.seen.features.defined()) WriteArray(dir / "seen_features.bin", r.seen.features);
  if (r.unseen.features.defined()) {
    WriteArray(dir / "unseen_features.bin", r.unseen.features);
  }
}

}  // namespace tagstyle
