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

#include "tagstyle/losses.h"

#include <cmath>
#include <utility>

#include "tagstyle/error.h"
#include "tagstyle/json_util.h"

namespace tagstyle {

void LossWeights::Validate() const {
  if (!(alpha > 0)) throw ConfigError("loss.alpha must be > 0");
  if (!(beta > 0)) throw ConfigError("loss.beta must be > 0");
  if (!(gamma > 0)) throw ConfigError("loss.gamma must be > 0");
  if (!(tau > 0)) throw ConfigError("loss.tau must be > 0");
}

nlohmann::json LossWeightsToJson(const LossWeights& w) {
  return {{"alpha", w.alpha}, {"beta", w.beta}, {"gamma", w.gamma}, {"tau", w.tau}};
}

LossWeights LossWeightsFromJson(const nlohmann::json& j) {
  LossWeights w;
  StrictObject o(j, "loss");
  o.Get("alpha", &w.alpha);
  o.Get("beta", &w.beta);
  o.Get("gamma", &w.gamma);
  o.Get("tau", &w.tau);
  o.Finish();
  w.Validate();
  return w;
}

torch::Tensor StyleMse(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) throw InputError("style MSE: shape mismatch");
  return (a - b).pow(2).mean();
}

torch::Tensor StyleContrastiveLoss(const torch::Tensor& w_t, const torch::Tensor& w_p,
                                   double tau) {
  if (w_t.dim() != 2 || w_t.sizes() != w_p.sizes()) {
    throw InputError("contrastive loss: inputs must both be [B, d]");
  }
  const auto b = w_t.size(0);
  if (b < 2) throw InputError("contrastive loss needs at least 2 pairs");
  auto nt = w_t.norm(2, 1, true);
  auto np = w_p.norm(2, 1, true);
  if ((nt == 0).any().item<bool>() || (np == 0).any().item<bool>()) {
    throw NumericError("contrastive loss: zero style vector");
  }
  auto logits = torch::matmul(w_t / nt, (w_p / np).t()) / tau;
  auto target = torch::arange(b, torch::kInt64);
  auto rows = torch::nn::functional::cross_entropy(logits, target);
  auto cols = torch::nn::functional::cross_entropy(logits.t(), target);
  return 0.5 * (rows + cols);
}

torch::Tensor MelL1(const torch::Tensor& before, const torch::Tensor& after,
                    const torch::Tensor& target, const torch::Tensor& mask) {
  if (before.sizes() != target.sizes() || after.sizes() != target.sizes() ||
      target.dim() != 3 || mask.dim() != 2 || mask.size(0) != target.size(0) ||
      mask.size(1) != target.size(1)) {
    throw InputError("mel L1: shape mismatch");
  }
  auto m = mask.to(target.scalar_type());
  auto frames = m.sum(1);
  if ((frames == 0).any().item<bool>()) throw InputError("mel L1: empty mask");
  auto m3 = m.unsqueeze(-1);
  auto denom = frames * target.size(2);
  auto per_utt = ((before - target).abs() * m3).sum({1, 2}) / denom +
                 ((after - target).abs() * m3).sum({1, 2}) / denom;
  return per_utt.mean();
}

torch::Tensor DurationL2(const torch::Tensor& pred_log, const torch::Tensor& frames,
                         const torch::Tensor& mask) {
  if (pred_log.sizes() != frames.sizes() || pred_log.sizes() != mask.sizes()) {
    throw InputError("duration L2: shape mismatch");
  }
  auto m = mask.to(pred_log.scalar_type());
  auto count = m.sum(1);
  if ((count == 0).any().item<bool>()) throw InputError("duration L2: empty mask");
  auto target = torch::log1p(frames.to(pred_log.scalar_type()));
  return (((pred_log - target).pow(2) * m).sum(1) / count).mean();
}

double LossReport::Recompute(const LossWeights& w) const {
  return mel_l1 + align_nll + binarization + duration_l2 + w.alpha * s_emb +
         w.beta * s_rec + w.gamma * s_con;
}

WeightedLoss TotalLoss(const LossTerms& t, const LossWeights& w) {
  const std::pair<const char*, const torch::Tensor*> named[] = {
      {"mel_l1", &t.mel_l1},           {"align_nll", &t.align_nll},
      {"binarization", &t.binarization}, {"duration_l2", &t.duration_l2},
      {"s_emb", &t.s_emb},             {"s_rec", &t.s_rec},
      {"s_con", &t.s_con}};
  for (const auto& [name, v] : named) {
    if (!v->defined() || v->numel() != 1) {
      throw InputError(std::string("loss term ") + name + " must be a scalar");
    }
    if (!std::isfinite(v->item<double>())) {
      throw NumericError(std::string("non-finite loss term: ") + name);
    }
  }
  WeightedLoss out;
  // Summed in double so the logged total matches its terms to 1e-7.
  auto d = [](const torch::Tensor& x) { return x.to(torch::kFloat64); };
  out.total = d(t.mel_l1) + d(t.align_nll) + d(t.binarization) + d(t.duration_l2) +
              w.alpha * d(t.s_emb) + w.beta * d(t.s_rec) + w.gamma * d(t.s_con);
  auto& r = out.report;
  r.mel_l1 = t.mel_l1.item<double>();
  r.align_nll = t.align_nll.item<double>();
  r.binarization = t.binarization.item<double>();
  r.duration_l2 = t.duration_l2.item<double>();
  r.s_emb = t.s_emb.item<double>();
  r.s_rec = t.s_rec.item<double>();
  r.s_con = t.s_con.item<double>();
  r.total = out.total.item<double>();
  return out;
}

}  // namespace tagstyle
