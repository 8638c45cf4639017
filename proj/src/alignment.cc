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

#include "tagstyle/alignment.h"

#include <cmath>
#include <limits>
#include <string>

#include "tagstyle/error.h"

namespace tagstyle {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double LogAddExp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

void CheckPathExists(std::int64_t n, std::int64_t t) {
  if (n < 1 || t < n) {
    throw InputError("no monotonic alignment exists for " + std::to_string(n) +
                     " phonemes over " + std::to_string(t) + " frames");
  }
}

// Row-major view of one [N, T] block inside a [N_max, T_max] double buffer.
struct Block {
  const double* data;
  std::int64_t stride;
  double operator()(std::int64_t i, std::int64_t t) const {
    return data[i * stride + t];
  }
};

// Forward-backward over one block. Writes the path posterior into `post`
// (same layout) and returns log Z.
double ForwardBackward(Block la, std::int64_t n, std::int64_t t, double* post) {
  std::vector<double> alpha(n * t, kNegInf), beta(n * t, kNegInf);
  auto A = [&](std::int64_t i, std::int64_t j) -> double& { return alpha[i * t + j]; };
  auto Bt = [&](std::int64_t i, std::int64_t j) -> double& { return beta[i * t + j]; };

  A(0, 0) = la(0, 0);
  for (std::int64_t j = 1; j < t; ++j) {
    const std::int64_t hi = std::min(n - 1, j);
    for (std::int64_t i = 0; i <= hi; ++i) {
      double prev = A(i, j - 1);
      if (i > 0) prev = LogAddExp(prev, A(i - 1, j - 1));
      A(i, j) = prev == kNegInf ? kNegInf : prev + la(i, j);
    }
  }
  const double log_z = A(n - 1, t - 1);
  if (!std::isfinite(log_z)) {
    throw NumericError("forward-sum: every monotonic path has zero probability");
  }

  Bt(n - 1, t - 1) = 0.0;
  for (std::int64_t j = t - 2; j >= 0; --j) {
    const std::int64_t lo = std::max<std::int64_t>(0, n - 1 - (t - 1 - j));
    for (std::int64_t i = lo; i < n; ++i) {
      double stay = Bt(i, j + 1) == kNegInf ? kNegInf : Bt(i, j + 1) + la(i, j + 1);
      double move = kNegInf;
      if (i + 1 < n && Bt(i + 1, j + 1) != kNegInf) {
        move = Bt(i + 1, j + 1) + la(i + 1, j + 1);
      }
      Bt(i, j) = LogAddExp(stay, move);
    }
  }

  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < t; ++j) {
      const double s = A(i, j) + Bt(i, j);
      post[i * la.stride + j] = s == kNegInf ? 0.0 : std::exp(s - log_z);
    }
  }
  return log_z;
}

std::vector<std::int64_t> ViterbiBlock(Block la, std::int64_t n, std::int64_t t) {
  CheckPathExists(n, t);
  std::vector<double> delta(n * t, kNegInf);
  // advanced[i*t + j]: the best way into (i, j) came from (i-1, j-1).
  std::vector<char> advanced(n * t, 0);
  auto D = [&](std::int64_t i, std::int64_t j) -> double& { return delta[i * t + j]; };

  D(0, 0) = la(0, 0);
  for (std::int64_t j = 1; j < t; ++j) {
    const std::int64_t hi = std::min(n - 1, j);
    for (std::int64_t i = 0; i <= hi; ++i) {
      const bool can_stay = i <= j - 1;
      const bool can_move = i >= 1;
      const double stay = can_stay ? D(i, j - 1) : kNegInf;
      const double move = can_move ? D(i - 1, j - 1) : kNegInf;
      // On ties take the advance here: the path then stays on earlier
      // phonemes for as long as possible.
      const bool take_move = can_move && (!can_stay || move >= stay);
      advanced[i * t + j] = take_move;
      D(i, j) = (take_move ? move : stay) + la(i, j);
    }
  }

  std::vector<std::int64_t> path(t);
  std::int64_t i = n - 1;
  for (std::int64_t j = t - 1; j >= 0; --j) {
    path[j] = i;
    if (j > 0 && advanced[i * t + j]) --i;
  }
  return path;
}

class ForwardSumFunction
    : public torch::autograd::Function<ForwardSumFunction> {
 public:
  static torch::Tensor forward(torch::autograd::AutogradContext* ctx,
                               const torch::Tensor& log_a,
                               const torch::Tensor& text_lengths,
                               const torch::Tensor& mel_lengths) {
    auto la = log_a.detach().to(torch::kFloat64).contiguous();
    if (torch::isnan(la).any().item<bool>()) {
      throw NumericError("forward-sum: log A_soft contains NaN");
    }
    const auto b = la.size(0), n_max = la.size(1), t_max = la.size(2);
    auto n_len = text_lengths.to(torch::kInt64).contiguous();
    auto t_len = mel_lengths.to(torch::kInt64).contiguous();
    auto post = torch::zeros_like(la);
    auto nll = torch::empty({b}, torch::kFloat64);
    const double* src = la.data_ptr<double>();
    double* dst = post.data_ptr<double>();
    for (std::int64_t k = 0; k < b; ++k) {
      const auto n = n_len[k].item<std::int64_t>();
      const auto t = t_len[k].item<std::int64_t>();
      CheckPathExists(n, t);
      if (n > n_max || t > t_max) throw InputError("forward-sum: length exceeds padding");
      const auto offset = k * n_max * t_max;
      nll[k] = -ForwardBackward({src + offset, t_max}, n, t, dst + offset);
    }
    ctx->save_for_backward({post});
    return nll.to(log_a.scalar_type());
  }

  static torch::autograd::tensor_list backward(
      torch::autograd::AutogradContext* ctx,
      torch::autograd::tensor_list grad_outputs) {
    auto post = ctx->get_saved_variables()[0];
    auto g = grad_outputs[0].to(torch::kFloat64).view({-1, 1, 1});
    auto grad = (-post * g).to(grad_outputs[0].scalar_type());
    return {grad, torch::Tensor(), torch::Tensor()};
  }
};

}  // namespace

torch::Tensor PairwiseDistance(const torch::Tensor& text_enc,
                               const torch::Tensor& mel_enc) {
  if (text_enc.dim() != mel_enc.dim() || text_enc.dim() < 2 ||
      text_enc.size(-1) != mel_enc.size(-1)) {
    throw InputError("pairwise distance needs matching [.., N, d] and [.., T, d]");
  }
  auto diff = text_enc.unsqueeze(-2) - mel_enc.unsqueeze(-3);  // [.., N, T, d]
  auto sq = diff.pow(2).sum(-1);
  auto positive = sq > 0;
  auto safe = torch::where(positive, sq, torch::ones_like(sq));
  return torch::where(positive, torch::sqrt(safe), torch::zeros_like(sq));
}

torch::Tensor LogSoftAlign(const torch::Tensor& distance) {
  if (!torch::isfinite(distance).all().item<bool>()) {
    throw NumericError("soft alignment: distance matrix is not finite");
  }
  return torch::log_softmax(-distance, -2);
}

torch::Tensor SoftAlign(const torch::Tensor& distance) {
  return LogSoftAlign(distance).exp();
}

torch::Tensor ForwardSumNll(const torch::Tensor& log_a_soft) {
  if (log_a_soft.dim() != 2) throw InputError("forward-sum expects [N, T]");
  auto lens = [](std::int64_t v) { return torch::full({1}, v, torch::kInt64); };
  return ForwardSumFunction::apply(log_a_soft.unsqueeze(0),
                                   lens(log_a_soft.size(0)),
                                   lens(log_a_soft.size(1)))
      .squeeze(0);
}

torch::Tensor ForwardSumNll(const torch::Tensor& log_a_soft,
                            const torch::Tensor& text_lengths,
                            const torch::Tensor& mel_lengths) {
  if (log_a_soft.dim() != 3) throw InputError("forward-sum expects [B, N, T]");
  return ForwardSumFunction::apply(log_a_soft, text_lengths, mel_lengths);
}

std::vector<std::int64_t> ViterbiPath(const torch::Tensor& log_a_soft) {
  if (log_a_soft.dim() != 2) throw InputError("viterbi expects [N, T]");
  auto la = log_a_soft.detach().to(torch::kFloat64).contiguous();
  return ViterbiBlock({la.data_ptr<double>(), la.size(1)}, la.size(0), la.size(1));
}

torch::Tensor PathToHard(const std::vector<std::int64_t>& path,
                         std::int64_t num_phonemes) {
  const auto t = static_cast<std::int64_t>(path.size());
  auto hard = torch::zeros({num_phonemes, t}, torch::kFloat64);
  auto h = hard.accessor<double, 2>();
  for (std::int64_t j = 0; j < t; ++j) {
    if (path[j] < 0 || path[j] >= num_phonemes) throw InputError("path row out of range");
    h[path[j]][j] = 1.0;
  }
  return hard;
}

torch::Tensor ViterbiHardAlign(const torch::Tensor& a_soft) {
  auto la = torch::log(a_soft.detach().to(torch::kFloat64));
  return PathToHard(ViterbiPath(la), a_soft.size(0)).to(a_soft.scalar_type());
}

HardAlignment ViterbiHardAlign(const torch::Tensor& log_a_soft,
                               const torch::Tensor& text_lengths,
                               const torch::Tensor& mel_lengths) {
  auto la = log_a_soft.detach().to(torch::kFloat64).contiguous();
  const auto b = la.size(0), n_max = la.size(1), t_max = la.size(2);
  auto hard = torch::zeros({b, n_max, t_max}, torch::kFloat64);
  auto durations = torch::zeros({b, n_max}, torch::kInt64);
  auto h = hard.accessor<double, 3>();
  auto d = durations.accessor<std::int64_t, 2>();
  for (std::int64_t k = 0; k < b; ++k) {
    const auto n = text_lengths[k].item<std::int64_t>();
    const auto t = mel_lengths[k].item<std::int64_t>();
    const auto path =
        ViterbiBlock({la.data_ptr<double>() + k * n_max * t_max, t_max}, n, t);
    for (std::int64_t j = 0; j < t; ++j) {
      h[k][path[j]][j] = 1.0;
      ++d[k][path[j]];
    }
  }
  return {hard.to(log_a_soft.scalar_type()), durations};
}

torch::Tensor BinarizationLoss(const torch::Tensor& a_soft,
                               const torch::Tensor& a_hard,
                               std::int64_t* clamped_cells) {
  if (a_soft.sizes() != a_hard.sizes()) {
    throw InputError("binarization loss: A_soft and A_hard shapes differ");
  }
  if (clamped_cells) {
    *clamped_cells = ((a_hard > 0) & (a_soft < kAlignLogFloor)).sum().item<std::int64_t>();
  }
  return -(a_hard * torch::log(a_soft.clamp_min(kAlignLogFloor))).sum();
}

torch::Tensor BinarizationLossFromLog(const torch::Tensor& log_a_soft,
                                      const torch::Tensor& a_hard) {
  if (log_a_soft.sizes() != a_hard.sizes() || log_a_soft.dim() != 3) {
    throw InputError("binarization loss: expected matching [B, N, T] inputs");
  }
  const double floor = std::log(kAlignLogFloor);
  return -(a_hard * log_a_soft.clamp_min(floor)).sum({1, 2});
}

bool IsMonotonicPath(const std::vector<std::int64_t>& path,
                     std::int64_t num_phonemes) {
  if (path.empty() || path.front() != 0 || path.back() != num_phonemes - 1) {
    return false;
  }
  for (std::size_t j = 1; j < path.size(); ++j) {
    const auto step = path[j] - path[j - 1];
    if (step != 0 && step != 1) return false;
  }
  return true;
}

std::vector<std::int64_t> DurationsFromHard(const torch::Tensor& a_hard) {
  if (a_hard.dim() != 2) throw InputError("hard alignment must be [N, T]");
  auto h = a_hard.detach().to(torch::kFloat64).contiguous();
  const auto n = h.size(0), t = h.size(1);
  auto acc = h.accessor<double, 2>();
  std::vector<std::int64_t> path(t);
  for (std::int64_t j = 0; j < t; ++j) {
    std::int64_t ones = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      if (acc[i][j] == 1.0) {
        path[j] = i;
        ++ones;
      } else if (acc[i][j] != 0.0) {
        throw InputError("hard alignment must be binary");
      }
    }
    if (ones != 1) throw InputError("hard alignment column without exactly one 1");
  }
  if (!IsMonotonicPath(path, n)) {
    throw InputError("hard alignment is not a monotonic path");
  }
  std::vector<std::int64_t> durations(n, 0);
  for (auto i : path) ++durations[i];
  return durations;
}

AlignerImpl::AlignerImpl(const AlignerOptions& o) : opts(o) {
  const auto pad = o.kernel_size / 2;
  auto conv = [&](std::int64_t in, std::int64_t out) {
    return torch::nn::Conv1d(
        torch::nn::Conv1dOptions(in, out, o.kernel_size).padding(pad));
  };
  text_conv1 = register_module("text_conv1", conv(o.d_text, o.d_align));
  text_conv2 = register_module("text_conv2", conv(o.d_align, o.d_align));
  mel_conv1 = register_module("mel_conv1", conv(o.n_mels, o.d_align));
  mel_conv2 = register_module("mel_conv2", conv(o.d_align, o.d_align));
}

torch::Tensor AlignmentLogPrior(std::int64_t n, std::int64_t t, double scaling) {
  if (n < 1 || t < 1) throw InputError("alignment prior needs N, T >= 1");
  if (!(scaling > 0)) throw InputError("alignment prior scaling must be > 0");
  auto out = torch::empty({n, t}, torch::kFloat64);
  auto o = out.accessor<double, 2>();
  const double m = static_cast<double>(n - 1);
  auto lbeta = [](double x, double y) {
    return std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y);
  };
  for (std::int64_t j = 0; j < t; ++j) {
    const double a = scaling * (j + 1);
    const double b = scaling * (t - j);
    for (std::int64_t k = 0; k < n; ++k) {
      const double log_choose =
          std::lgamma(m + 1) - std::lgamma(k + 1.0) - std::lgamma(m - k + 1);
      o[k][j] = log_choose + lbeta(k + a, m - k + b) - lbeta(a, b);
    }
  }
  return out;
}

torch::Tensor AlignmentLogPrior(const torch::Tensor& text_lengths,
                                const torch::Tensor& mel_lengths, std::int64_t n_max,
                                std::int64_t t_max, double scaling) {
  const auto b = text_lengths.size(0);
  auto out = torch::zeros({b, n_max, t_max}, torch::kFloat64);
  for (std::int64_t k = 0; k < b; ++k) {
    const auto n = text_lengths[k].item<std::int64_t>();
    const auto t = mel_lengths[k].item<std::int64_t>();
    out[k].narrow(0, 0, n).narrow(1, 0, t).copy_(AlignmentLogPrior(n, t, scaling));
  }
  return out;
}

torch::Tensor AlignerImpl::forward(const torch::Tensor& text,
                                   const torch::Tensor& text_mask,
                                   const torch::Tensor& mel,
                                   const torch::Tensor& mel_mask,
                                   const torch::Tensor& log_prior) {
  auto tm = text_mask.to(text.scalar_type()).unsqueeze(1);  // [B, 1, N]
  auto mm = mel_mask.to(mel.scalar_type()).unsqueeze(1);    // [B, 1, T]
  auto x = text.transpose(1, 2) * tm;
  x = torch::relu(text_conv1(x)) * tm;
  x = text_conv2(x) * tm;
  auto y = mel.transpose(1, 2) * mm;
  y = torch::relu(mel_conv1(y)) * mm;
  y = mel_conv2(y) * mm;
  auto distance = PairwiseDistance(x.transpose(1, 2), y.transpose(1, 2));
  auto scores = -distance;
  if (log_prior.defined()) scores = scores + log_prior.to(scores.scalar_type());
  auto logits = scores.masked_fill(text_mask.logical_not().unsqueeze(-1),
                                        -std::numeric_limits<double>::infinity());
  return torch::log_softmax(logits, 1);
}

}  // namespace tagstyle
