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

#ifndef TAGSTYLE_EVAL_H_
#define TAGSTYLE_EVAL_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"
#include "tagstyle/corpus.h"
#include "tagstyle/model.h"
#include "tagstyle/probe.h"
#include "tagstyle/training.h"

namespace tagstyle {

// Fraction of rows i whose argmax_j cos(w_t[i], w_p[j]) is i.
double RetrievalAccuracy(const torch::Tensor& w_t, const torch::Tensor& w_p);

struct EvalOptions {
  int batch_size = 16;
  std::uint64_t seed = 0;
  bool prenet_dropout = true;
  int probe_iterations = 1500;
  double probe_l2 = 1e-3;
};

// One (speaker, style) cell of a transfer grid.
struct GridCell {
  int speaker = 0;
  int style = 0;
  int correct = 0;
  int total = 0;
};

struct TransferGrid {
  std::vector<GridCell> cells;
  torch::Tensor features;      // [K, D] probe features of the synthesized mels
  std::vector<int> labels;     // intended style
  std::vector<int> predicted;  // probe output

  double Accuracy() const;
};

struct EvalReport {
  std::int64_t step = 0;
  // Tag-driven teacher-forced pass over the corpus in fixed batches.
  double retrieval = 0;
  double mel_l1 = 0;        // masked mean |mel_after - target|, normalized units
  double duration_mae = 0;  // |predicted - aligner| frames per phoneme
  torch::Tensor w_t, w_p;   // [U, d_style] in batch order
  std::vector<std::int64_t> batch_sizes;
  std::vector<std::string> utterance_ids;
  // Autoregressive tag-driven synthesis scored by a linear style probe fit
  // on the corpus. seen: target speakers x all styles; unseen: source
  // speakers x non-neutral styles.
  double probe_train_accuracy = 0;
  TransferGrid seen, unseen;
  // Quantifier probe over tags "very X" / "little X": rate of
  // cos(w_t(q X), w_t(X)) > cos(w_t(q X), w_t(Y)) over other styles' Y.
  double composition_rate = 0;
  std::int64_t composition_trials = 0;
};

// Retrieval, reconstruction and duration metrics only.
EvalReport EvaluateRetrieval(TagStyleModel& model, const TagEmbedder& embedder,
                             const Corpus& corpus, const ExperimentConfig& config,
                             const EvalOptions& options = {});

// Probe grids over the corpus' speakers and styles.
void EvaluateTransfer(TagStyleModel& model, const TagEmbedder& embedder,
                      const Corpus& corpus, const EvalOptions& options,
                      EvalReport* report);

void EvaluateComposition(TagStyleModel& model, const TagEmbedder& embedder,
                         const Corpus& corpus, EvalReport* report);

EvalReport Evaluate(TagStyleModel& model, const TagEmbedder& embedder,
                    const Corpus& corpus, const ExperimentConfig& config,
                    const EvalOptions& options = {});

nlohmann::json ReportToJson(const EvalReport& report);
std::string ReportToText(const EvalReport& report);

// report.txt, report.json and the raw arrays (w_t.bin, w_p.bin,
// seen_features.bin, unseen_features.bin) from which the numbers follow.
void WriteReport(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace tagstyle

#endif  // TAGSTYLE_EVAL_H_
