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

#ifndef TAGSTYLE_LOSSES_H_
#define TAGSTYLE_LOSSES_H_

#include <string>

#include <torch/torch.h>

#include "json.hpp"

namespace tagstyle {

struct LossWeights {
  double alpha = 1.0;  // s_emb
  double beta = 1.0;   // s_rec
  double gamma = 0.01; // s_con
  double tau = 0.1;    // contrastive temperature, fixed

  void Validate() const;
};

nlohmann::json LossWeightsToJson(const LossWeights& w);
LossWeights LossWeightsFromJson(const nlohmann::json& j);

// Mean over batch and dimensions of (a - b)^2. [B, d] each.
torch::Tensor StyleMse(const torch::Tensor& a, const torch::Tensor& b);

// Symmetric InfoNCE over cosine similarities / tau with diagonal positives.
// The softmax denominators include the positive. Throws InputError for
// B < 2 and NumericError for a zero vector.
torch::Tensor StyleContrastiveLoss(const torch::Tensor& w_t, const torch::Tensor& w_p,
                                   double tau);

// Masked mean |pred - target| per utterance, for both predictions, summed,
// then averaged over the batch. mel tensors [B, T, M], mask [B, T] bool.
// Throws InputError if any utterance has no valid frame.
torch::Tensor MelL1(const torch::Tensor& before, const torch::Tensor& after,
                    const torch::Tensor& target, const torch::Tensor& mask);

// Per-utterance masked mean of (pred - log(1 + frames))^2, batch mean.
// pred [B, N], frames [B, N] int64, mask [B, N] bool.
torch::Tensor DurationL2(const torch::Tensor& pred_log, const torch::Tensor& frames,
                         const torch::Tensor& mask);

// Per-term scalars feeding the weighted sum. `binarization` is already
// multiplied by its warm-up ramp.
struct LossTerms {
  torch::Tensor mel_l1, align_nll, binarization, duration_l2, s_emb, s_rec, s_con;
};

struct LossReport {
  double mel_l1 = 0, align_nll = 0, binarization = 0, duration_l2 = 0;
  double s_emb = 0, s_rec = 0, s_con = 0, total = 0;

  // The weighted sum recomputed from the stored terms.
  double Recompute(const LossWeights& w) const;
};

struct WeightedLoss {
  torch::Tensor total;
  LossReport report;
};

// total = mel_l1 + align_nll + binarization + duration_l2
//       + alpha s_emb + beta s_rec + gamma s_con.
// Throws NumericError naming the first non-finite term.
WeightedLoss TotalLoss(const LossTerms& terms, const LossWeights& w);

}  // namespace tagstyle

#endif  // TAGSTYLE_LOSSES_H_
