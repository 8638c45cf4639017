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

#ifndef TAGSTYLE_PROBE_H_
#define TAGSTYLE_PROBE_H_

#include <vector>

#include <torch/torch.h>

#include "tagstyle/corpus.h"

namespace tagstyle {

// Multinomial logistic regression from utterance-level mel statistics
// (per-bin temporal mean) to the latent style.
class StyleProbe {
 public:
  // Utterance features of a normalized mel [frames, bins] -> [bins].
  static torch::Tensor Features(const torch::Tensor& mel);

  // Fits on every utterance of the corpus (normalized mels).
  static StyleProbe Fit(const Corpus& corpus, int iterations = 1500,
                        double l2 = 1e-3);
  static StyleProbe Fit(const std::vector<torch::Tensor>& mels,
                        const std::vector<int>& labels, int num_classes,
                        int iterations = 1500, double l2 = 1e-3);

  int Predict(const torch::Tensor& mel) const;
  double Accuracy(const std::vector<torch::Tensor>& mels,
                  const std::vector<int>& labels) const;

 private:
  torch::Tensor feat_mean_, feat_std_;  // [D], float64
  torch::Tensor weight_, bias_;         // [D, C], [C], float64
};

}  // namespace tagstyle

#endif  // TAGSTYLE_PROBE_H_
