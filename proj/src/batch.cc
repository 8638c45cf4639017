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

#include "tagstyle/batch.h"

#include <algorithm>
#include <numeric>
#include <random>

#include "tagstyle/error.h"
#include "tagstyle/rng.h"

namespace tagstyle {

torch::Tensor LengthMask(const torch::Tensor& lengths, std::int64_t max_len) {
  auto range = torch::arange(max_len, lengths.options());
  return range.unsqueeze(0) < lengths.unsqueeze(1);
}

torch::Tensor Batch::mel_mask() const {
  return LengthMask(mel_lengths, mel.size(1));
}

torch::Tensor Batch::phoneme_mask() const {
  return LengthMask(phoneme_lengths, phonemes.size(1));
}

Batch Collate(const Corpus& corpus, std::span<const std::size_t> indices) {
  if (indices.empty()) throw InputError("cannot collate an empty batch");
  const auto b = static_cast<std::int64_t>(indices.size());
  std::int64_t t_max = 0, n_max = 0;
  for (auto i : indices) {
    const auto& u = corpus.utterances.at(i);
    t_max = std::max(t_max, u.num_frames());
    n_max = std::max<std::int64_t>(n_max, static_cast<std::int64_t>(u.phonemes.size()));
  }
  const auto n_mels = corpus.utterances.at(indices[0]).mel.size(1);

  Batch batch;
  batch.mel = torch::zeros({b, t_max, n_mels}, torch::kFloat32);
  batch.mel_lengths = torch::empty({b}, torch::kInt64);
  batch.phonemes = torch::full({b, n_max}, kPadSymbol, torch::kInt64);
  batch.phoneme_lengths = torch::empty({b}, torch::kInt64);
  batch.speakers = torch::empty({b}, torch::kInt64);
  for (std::int64_t k = 0; k < b; ++k) {
    const auto idx = indices[k];
    const auto& u = corpus.utterances[idx];
    const auto t = u.num_frames();
    const auto n = static_cast<std::int64_t>(u.phonemes.size());
    batch.mel[k].narrow(0, 0, t).copy_(corpus.NormalizedMel(idx));
    batch.mel_lengths[k] = t;
    batch.phonemes[k].narrow(0, 0, n).copy_(
        torch::tensor(u.phonemes, torch::kInt64));
    batch.phoneme_lengths[k] = n;
    batch.speakers[k] = u.speaker_id;
    batch.tags.push_back(u.style_tags);
    batch.latent_styles.push_back(u.latent_style);
    batch.indices.push_back(idx);
  }
  return batch;
}

BatchStream::BatchStream(const Corpus& corpus, int batch_size,
                         std::uint64_t seed)
    : corpus_(&corpus), batch_size_(batch_size), seed_(seed) {
  if (batch_size <= 0) throw ConfigError("batch_size must be > 0");
  if (corpus.utterances.empty()) throw InputError("corpus is empty");
  const auto n = static_cast<std::int64_t>(corpus.utterances.size());
  batches_per_epoch_ = (n + batch_size - 1) / batch_size;
}

std::vector<std::size_t> BatchStream::EpochOrder(std::int64_t epoch) const {
  std::vector<std::size_t> order(corpus_->utterances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(MixSeed(seed_, 0xba7c4, static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::vector<std::size_t> BatchStream::IndicesAt(std::int64_t step) const {
  const auto epoch = step / batches_per_epoch_;
  const auto within = step % batches_per_epoch_;
  const auto order = EpochOrder(epoch);
  const auto begin = static_cast<std::size_t>(within * batch_size_);
  const auto end = std::min(order.size(), begin + batch_size_);
  return {order.begin() + begin, order.begin() + end};
}

Batch BatchStream::BatchAt(std::int64_t step) const {
  const auto idx = IndicesAt(step);
  return Collate(*corpus_, idx);
}

}  // namespace tagstyle
