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

// Phoneme-to-frame alignment.
//
// A_soft is an N x T matrix whose columns are distributions over phonemes.
// A monotonic path assigns one phoneme to every frame, starts at phoneme 0,
// ends at phoneme N-1, and from one frame to the next either stays or moves
// to the next phoneme. Such paths exist iff T >= N and visit every phoneme.

#ifndef TAGSTYLE_ALIGNMENT_H_
#define TAGSTYLE_ALIGNMENT_H_

#include <cstdint>
#include <vector>

#include <torch/torch.h>

namespace tagstyle {

// log() clamp used wherever an alignment probability may be exactly zero.
inline constexpr double kAlignLogFloor = 1e-12;

// Euclidean distances. [N, d] x [T, d] -> [N, T], or batched
// [B, N, d] x [B, T, d] -> [B, N, T]. Exact zero for identical rows, with a
// zero (not NaN) gradient there. Throws InputError on dimension mismatch.
torch::Tensor PairwiseDistance(const torch::Tensor& text_enc,
                               const torch::Tensor& mel_enc);

// Softmax of -D over the phoneme axis (dim -2). Throws NumericError if D
// has non-finite entries.
torch::Tensor SoftAlign(const torch::Tensor& distance);
torch::Tensor LogSoftAlign(const torch::Tensor& distance);

// -log of the total probability of all monotonic paths through A_soft,
// given log A_soft [N, T]. Differentiable; the gradient with respect to
// log A_soft is minus the path posterior. Throws InputError if T < N and
// NumericError if no path has nonzero probability.
torch::Tensor ForwardSumNll(const torch::Tensor& log_a_soft);

// Batched form: log_a_soft [B, N_max, T_max], lengths [B] -> [B] losses.
// Cells outside each item's (N_b, T_b) block are ignored.
torch::Tensor ForwardSumNll(const torch::Tensor& log_a_soft,
                            const torch::Tensor& text_lengths,
                            const torch::Tensor& mel_lengths);

// Most probable monotonic path as a row index per frame. Ties prefer
// staying on the current phoneme, i.e. advancing as late as possible.
std::vector<std::int64_t> ViterbiPath(const torch::Tensor& log_a_soft);

// Binary [N, T] matrix with A[path[t], t] = 1.
torch::Tensor PathToHard(const std::vector<std::int64_t>& path,
                         std::int64_t num_phonemes);

// Hard alignment from probabilities A_soft [N, T].
torch::Tensor ViterbiHardAlign(const torch::Tensor& a_soft);

// Batched Viterbi over log A_soft [B, N_max, T_max] -> hard [B, N_max, T_max]
// (dtype of the input, zero outside each item's block) and durations
// [B, N_max] int64 (zero on padding).
struct HardAlignment {
  torch::Tensor hard;
  torch::Tensor durations;
};
HardAlignment ViterbiHardAlign(const torch::Tensor& log_a_soft,
                               const torch::Tensor& text_lengths,
                               const torch::Tensor& mel_lengths);

// -sum(A_hard * log A_soft), with log clamped at kAlignLogFloor. When
// `clamped_cells` is given it receives the number of hard-path cells whose
// soft probability fell below the floor.
torch::Tensor BinarizationLoss(const torch::Tensor& a_soft,
                               const torch::Tensor& a_hard,
                               std::int64_t* clamped_cells = nullptr);

// Same quantity from log A_soft, batched: [B, N, T] x [B, N, T] -> [B].
torch::Tensor BinarizationLossFromLog(const torch::Tensor& log_a_soft,
                                      const torch::Tensor& a_hard);

// Row sums of a valid hard alignment. Throws InputError unless every column
// has exactly one 1 and the selected rows form a monotonic path.
std::vector<std::int64_t> DurationsFromHard(const torch::Tensor& a_hard);

// True if `path` is a monotonic path over `num_phonemes` rows.
bool IsMonotonicPath(const std::vector<std::int64_t>& path,
                     std::int64_t num_phonemes);

// Log beta-binomial prior over phonemes for every frame, [N, T]: frame j
// (1-based) draws a phoneme index from BetaBinomial(N - 1, s j, s (T - j + 1)),
// which concentrates mass near the diagonal.
torch::Tensor AlignmentLogPrior(std::int64_t n, std::int64_t t, double scaling = 1.0);

// Batched prior [B, N_max, T_max]; zero outside each item's block.
torch::Tensor AlignmentLogPrior(const torch::Tensor& text_lengths,
                                const torch::Tensor& mel_lengths, std::int64_t n_max,
                                std::int64_t t_max, double scaling = 1.0);

// Two small convolutional encoders that map the style-conditioned text
// encoding and the mel frames into a shared space, followed by distance and
// softmax over phonemes.
struct AlignerOptions {
  std::int64_t d_text = 256;
  std::int64_t n_mels = 120;
  std::int64_t d_align = 128;
  std::int64_t kernel_size = 3;
};

struct AlignerImpl : torch::nn::Module {
  explicit AlignerImpl(const AlignerOptions& opts);

  // text [B, N, d_text], mel [B, T, n_mels], masks bool [B, N] / [B, T].
  // Returns log A_soft [B, N, T]; rows of padded phonemes are -inf. A
  // log prior [B, N, T], when given, is added to -D before the softmax.
  torch::Tensor forward(const torch::Tensor& text, const torch::Tensor& text_mask,
                        const torch::Tensor& mel, const torch::Tensor& mel_mask,
                        const torch::Tensor& log_prior = {});

  AlignerOptions opts;
  torch::nn::Conv1d text_conv1{nullptr}, text_conv2{nullptr};
  torch::nn::Conv1d mel_conv1{nullptr}, mel_conv2{nullptr};
};
TORCH_MODULE(Aligner);

}  // namespace tagstyle

#endif  // TAGSTYLE_ALIGNMENT_H_
