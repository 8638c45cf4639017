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

#ifndef TAGSTYLE_STYLE_ENCODER_H_
#define TAGSTYLE_STYLE_ENCODER_H_

#include <cstdint>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace tagstyle {

// Frozen sentence embedder for style tags. Implementations must be
// deterministic and must report dim() before any training starts.
class TagEmbedder {
 public:
  virtual ~TagEmbedder() = default;
  virtual std::int64_t dim() const = 0;
  // [dim()] float64. Throws InputError on empty text.
  virtual torch::Tensor Embed(const std::string& text) const = 0;
};

// Bag-of-tokens embedder: each whitespace token maps to a unit Gaussian
// direction seeded by its hash; token directions are averaged and the
// result renormalized. "very angry" therefore shares a component with
// "angry".
class StubEmbedder : public TagEmbedder {
 public:
  explicit StubEmbedder(std::int64_t dim = 256, std::uint64_t hash_seed = 0);

  std::int64_t dim() const override { return dim_; }
  torch::Tensor Embed(const std::string& text) const override;

 private:
  torch::Tensor TokenVector(const std::string& token) const;

  std::int64_t dim_;
  std::uint64_t hash_seed_;
  mutable std::mutex mu_;
  mutable std::map<std::string, torch::Tensor> cache_;
};

// Mean of the embeddings of the distinct tags in `tags`, float64 [d_sem].
// Duplicates collapse and order does not matter.
torch::Tensor MeanTagEmbedding(const std::vector<std::string>& tags,
                               const TagEmbedder& embedder);

// Random nonempty subset: size uniform in [1, n], then a uniform subset of
// that size. Returned in input order.
std::vector<std::string> SampleTags(const std::vector<std::string>& tags,
                                    std::mt19937_64& rng);

// Three linear layers with ReLU between them, d_sem -> d_style.
struct AdaptationLayerImpl : torch::nn::Module {
  AdaptationLayerImpl(std::int64_t d_sem, std::int64_t d_hidden,
                      std::int64_t d_style);
  torch::Tensor forward(const torch::Tensor& semantic);

  torch::nn::Linear fc1{nullptr}, fc2{nullptr}, fc3{nullptr};
};
TORCH_MODULE(AdaptationLayer);

// w_t for a tag set: adaptation(mean tag embedding), [d_style].
torch::Tensor TagEncode(const std::vector<std::string>& tags,
                        const TagEmbedder& embedder,
                        AdaptationLayer& adaptation);

struct ReferenceEncoderOptions {
  std::int64_t n_mels = 120;
  std::int64_t channels = 128;
  std::int64_t kernel_size = 3;
  std::int64_t heads = 2;
  std::int64_t d_style = 128;
};

// Mel -> speech-side style vector. Spectral FC stack, two residual temporal
// convolutions, residual multi-head self-attention, output projection and a
// length-masked temporal average.
//
// Temporal convolutions replicate each sequence's own edge frames, so a
// constant mel yields the same vector at any length, and frames beyond a
// sequence's length never influence it.
struct ReferenceEncoderImpl : torch::nn::Module {
  explicit ReferenceEncoderImpl(const ReferenceEncoderOptions& opts);

  // mel [B, T, n_mels], lengths [B] int64 -> [B, d_style].
  // Throws InputError if any length is < 1.
  torch::Tensor forward(const torch::Tensor& mel, const torch::Tensor& lengths);

  ReferenceEncoderOptions opts;
  torch::nn::Linear spectral1{nullptr}, spectral2{nullptr};
  torch::nn::Conv1d temporal1{nullptr}, temporal2{nullptr};
  torch::nn::MultiheadAttention attention{nullptr};
  torch::nn::Linear out{nullptr};
};
TORCH_MODULE(ReferenceEncoder);

// Masked temporal mean: x [B, T, C], lengths [B] -> [B, C].
torch::Tensor MaskedMeanPool(const torch::Tensor& x, const torch::Tensor& lengths);

}  // namespace tagstyle

#endif  // TAGSTYLE_STYLE_ENCODER_H_
