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

#include "tagstyle/probe.h"

#include "tagstyle/error.h"

namespace tagstyle {

torch::Tensor StyleProbe::Features(const torch::Tensor& mel) {
  if (mel.dim() != 2 || mel.size(0) < 1) {
    throw InputError("probe expects a [frames, bins] mel");
  }
  auto m = mel.to(torch::kFloat64);
  return m.mean(0);
}

StyleProbe StyleProbe::Fit(const Corpus& corpus, int iterations, double l2) {
  std::vector<torch::Tensor> mels;
  std::vector<int> labels;
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    mels.push_back(corpus.NormalizedMel(i));
    labels.push_back(corpus.utterances[i].latent_style);
  }
  return Fit(mels, labels, static_cast<int>(corpus.spec.styles.size()),
             iterations, l2);
}

StyleProbe StyleProbe::Fit(const std::vector<torch::Tensor>& mels,
                           const std::vector<int>& labels, int num_classes,
                           int iterations, double l2) {
  if (mels.empty() || mels.size() != labels.size()) {
    throw InputError("probe needs one label per mel");
  }
  std::vector<torch::Tensor> feats;
  for (const auto& m : mels) feats.push_back(Features(m));
  auto x = torch::stack(feats);
  auto y = torch::tensor(std::vector<std::int64_t>(labels.begin(), labels.end()),
                         torch::kInt64);

  StyleProbe probe;
  probe.feat_mean_ = x.mean(0);
  probe.feat_std_ = x.std(0, /*unbiased=*/false).clamp_min(1e-6);
  x = (x - probe.feat_mean_) / probe.feat_std_;

  const auto dims = x.size(1);
  auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  auto w = torch::zeros({dims, num_classes}, opts).requires_grad_(true);
  auto b = torch::zeros({num_classes}, opts).requires_grad_(true);
  torch::optim::Adam opt({w, b}, torch::optim::AdamOptions(0.05));
  for (int it = 0; it < iterations; ++it) {
    opt.zero_grad();
    auto logits = torch::matmul(x, w) + b;
    auto loss = torch::nn::functional::cross_entropy(logits, y) +
                l2 * w.pow(2).sum();
    loss.backward();
    opt.step();
  }
  probe.weight_ = w.detach();
  probe.bias_ = b.detach();
  return probe;
}

int StyleProbe::Predict(const torch::Tensor& mel) const {
  auto f = (Features(mel) - feat_mean_) / feat_std_;
  auto logits = torch::matmul(f, weight_) + bias_;
  return static_cast<int>(logits.argmax().item<std::int64_t>());
}

double StyleProbe::Accuracy(const std::vector<torch::Tensor>& mels,
                            const std::vector<int>& labels) const {
  if (mels.empty()) return 0.0;
  int correct = 0;
  for (std::size_t i = 0; i < mels.size(); ++i) {
    correct += Predict(mels[i]) == labels.at(i);
  }
  return static_cast<double>(correct) / mels.size();
}

}  // namespace tagstyle
