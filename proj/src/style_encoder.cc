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

#include "tagstyle/style_encoder.h"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "tagstyle/error.h"
#include "tagstyle/rng.h"

namespace tagstyle {

namespace F = torch::nn::functional;

StubEmbedder::StubEmbedder(std::int64_t dim, std::uint64_t hash_seed)
    : dim_(dim), hash_seed_(hash_seed) {
  if (dim < 1) throw ConfigError("embedder dim must be >= 1");
}

torch::Tensor StubEmbedder::TokenVector(const std::string& token) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = cache_.find(token);
  if (it != cache_.end()) return it->second;
  std::mt19937_64 rng(MixSeed(hash_seed_, Fnv1a(token)));
  std::normal_distribution<double> normal(0.0, 1.0);
  auto v = torch::empty({dim_}, torch::kFloat64);
  auto a = v.accessor<double, 1>();
  for (std::int64_t i = 0; i < dim_; ++i) a[i] = normal(rng);
  v /= v.norm();
  cache_.emplace(token, v);
  return v;
}

torch::Tensor StubEmbedder::Embed(const std::string& text) const {
  std::istringstream in(text);
  std::string token;
  auto sum = torch::zeros({dim_}, torch::kFloat64);
  int count = 0;
  while (in >> token) {
    sum += TokenVector(token);
    ++count;
  }
  if (count == 0) throw InputError("cannot embed an empty style tag");
  return sum / sum.norm();
}

torch::Tensor MeanTagEmbedding(const std::vector<std::string>& tags,
                               const TagEmbedder& embedder) {
  const std::set<std::string> unique(tags.begin(), tags.end());
  if (unique.empty()) throw InputError("style tag set is empty");
  auto sum = torch::zeros({embedder.dim()}, torch::kFloat64);
  for (const auto& t : unique) sum += embedder.Embed(t);
  return sum / static_cast<double>(unique.size());
}

std::vector<std::string> SampleTags(const std::vector<std::string>& tags,
                                    std::mt19937_64& rng) {
  if (tags.empty()) throw InputError("cannot sample from an empty tag set");
  const auto n = tags.size();
  const auto k = std::uniform_int_distribution<std::size_t>(1, n)(rng);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Partial Fisher-Yates: the first k entries are a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = std::uniform_int_distribution<std::size_t>(i, n - 1)(rng);
    std::swap(order[i], order[j]);
  }
  order.resize(k);
  std::sort(order.begin(), order.end());
  std::vector<std::string> out;
  out.reserve(k);
  for (auto i : order) out.push_back(tags[i]);
  return out;
}

AdaptationLayerImpl::AdaptationLayerImpl(std::int64_t d_sem,
                                         std::int64_t d_hidden,
                                         std::int64_t d_style) {
  fc1 = register_module("fc1", torch::nn::Linear(d_sem, d_hidden));
  fc2 = register_module("fc2", torch::nn::Linear(d_hidden, d_hidden));
  fc3 = register_module("fc3", torch::nn::Linear(d_hidden, d_style));
}

torch::Tensor AdaptationLayerImpl::forward(const torch::Tensor& semantic) {
  auto h = torch::relu(fc1(semantic));
  h = torch::relu(fc2(h));
  return fc3(h);
}

torch::Tensor TagEncode(const std::vector<std::string>& tags,
                        const TagEmbedder& embedder,
                        AdaptationLayer& adaptation) {
  auto mean = MeanTagEmbedding(tags, embedder);
  const auto dtype = adaptation->fc1->weight.scalar_type();
  return adaptation->forward(mean.to(dtype));
}

torch::Tensor MaskedMeanPool(const torch::Tensor& x,
                             const torch::Tensor& lengths) {
  auto mask = (torch::arange(x.size(1), lengths.options()).unsqueeze(0) <
               lengths.unsqueeze(1))
                  .to(x.scalar_type())
                  .unsqueeze(-1);
  return (x * mask).sum(1) / lengths.to(x.scalar_type()).unsqueeze(-1);
}

namespace {

// Pads every sequence in [B, T, C] with copies of its own first/last valid
// frame and returns [B, C, T + 2 * pad] ready for an unpadded Conv1d.
torch::Tensor ReplicatePadPerSequence(const torch::Tensor& x,
                                      const torch::Tensor& lengths,
                                      std::int64_t pad) {
  const auto t = x.size(1);
  auto pos = torch::arange(-pad, t + pad, lengths.options()).unsqueeze(0);
  auto idx = torch::minimum(pos.clamp_min(0), (lengths - 1).unsqueeze(1));
  idx = idx.unsqueeze(-1).expand({x.size(0), t + 2 * pad, x.size(2)});
  return torch::gather(x, 1, idx).transpose(1, 2);
}

}  // namespace

ReferenceEncoderImpl::ReferenceEncoderImpl(const ReferenceEncoderOptions& o)
    : opts(o) {
  if (o.channels % o.heads != 0) {
    throw ConfigError("reference encoder heads must divide its channels");
  }
  if (o.kernel_size % 2 == 0) {
    throw ConfigError("reference encoder kernel size must be odd");
  }
  spectral1 = register_module("spectral1", torch::nn::Linear(o.n_mels, o.channels));
  spectral2 = register_module("spectral2", torch::nn::Linear(o.channels, o.channels));
  temporal1 = register_module(
      "temporal1",
      torch::nn::Conv1d(torch::nn::Conv1dOptions(o.channels, o.channels, o.kernel_size)));
  temporal2 = register_module(
      "temporal2",
      torch::nn::Conv1d(torch::nn::Conv1dOptions(o.channels, o.channels, o.kernel_size)));
  attention = register_module(
      "attention", torch::nn::MultiheadAttention(
                       torch::nn::MultiheadAttentionOptions(o.channels, o.heads)));
  out = register_module("out", torch::nn::Linear(o.channels, o.d_style));
}

torch::Tensor ReferenceEncoderImpl::forward(const torch::Tensor& mel,
                                            const torch::Tensor& lengths) {
  if (mel.dim() != 3 || mel.size(2) != opts.n_mels) {
    throw InputError("reference encoder expects [B, T, " +
                     std::to_string(opts.n_mels) + "] input");
  }
  if (lengths.numel() != mel.size(0) || lengths.min().item<std::int64_t>() < 1 ||
      lengths.max().item<std::int64_t>() > mel.size(1)) {
    throw InputError("reference mel lengths must lie in [1, T]");
  }
  const auto pad = opts.kernel_size / 2;
  auto h = torch::relu(spectral1(mel));
  h = torch::relu(spectral2(h));
  for (auto* conv : {&temporal1, &temporal2}) {
    auto c = (*conv)(ReplicatePadPerSequence(h, lengths, pad)).transpose(1, 2);
    h = h + torch::relu(c);
  }
  auto key_padding = torch::arange(mel.size(1), lengths.options()).unsqueeze(0) >=
                     lengths.unsqueeze(1);
  auto seq = h.transpose(0, 1);  // [T, B, C]
  auto attended = std::get<0>(attention(seq, seq, seq, key_padding,
                                        /*need_weights=*/false));
  h = h + attended.transpose(0, 1);
  return MaskedMeanPool(out(h), lengths);
}

}  // namespace tagstyle
