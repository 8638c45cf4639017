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

#ifndef TAGSTYLE_BATCH_H_
#define TAGSTYLE_BATCH_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "tagstyle/corpus.h"

namespace tagstyle {

// Zero-padded batch. The reference mel of every item is its own target mel,
// so there is no separate reference tensor.
struct Batch {
  torch::Tensor mel;              // [B, T_max, mel_bins] normalized, float32
  torch::Tensor mel_lengths;      // [B] int64
  torch::Tensor phonemes;         // [B, N_max] int64, kPadSymbol padded
  torch::Tensor phoneme_lengths;  // [B] int64
  torch::Tensor speakers;         // [B] int64
  std::vector<std::vector<std::string>> tags;
  std::vector<int> latent_styles;
  std::vector<std::size_t> indices;  // positions in the corpus

  std::int64_t size() const { return mel.size(0); }
  // [B, T_max] bool, true on valid frames.
  torch::Tensor mel_mask() const;
  // [B, N_max] bool, true on valid phonemes.
  torch::Tensor phoneme_mask() const;
};

torch::Tensor LengthMask(const torch::Tensor& lengths, std::int64_t max_len);

Batch Collate(const Corpus& corpus, std::span<const std::size_t> indices);

// Deterministic epoch-shuffled batching. Epoch e uses a permutation keyed
// by (seed, e); the final batch of an epoch may be short.
class BatchStream {
 public:
  // Throws ConfigError if batch_size <= 0 and InputError on an empty corpus.
  BatchStream(const Corpus& corpus, int batch_size, std::uint64_t seed);

  std::int64_t batches_per_epoch() const { return batches_per_epoch_; }
  std::vector<std::size_t> EpochOrder(std::int64_t epoch) const;
  // Corpus indices of the global batch number `step` (0-based).
  std::vector<std::size_t> IndicesAt(std::int64_t step) const;
  Batch BatchAt(std::int64_t step) const;

 private:
  const Corpus* corpus_;
  int batch_size_;
  std::uint64_t seed_;
  std::int64_t batches_per_epoch_;
};

}  // namespace tagstyle

#endif  // TAGSTYLE_BATCH_H_
