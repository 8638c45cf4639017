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

#include "tagstyle/signal.h"

#include <cmath>
#include <string>

#include "tagstyle/error.h"

namespace tagstyle {

namespace {

int WholeSamples(double ms, int sample_rate, const char* what) {
  const double samples = ms * sample_rate / 1000.0;
  const double rounded = std::round(samples);
  if (std::abs(samples - rounded) > 1e-9 || rounded < 1) {
    throw ConfigError(std::string("signal.") + what +
                      " is not a positive whole number of samples");
  }
  return static_cast<int>(rounded);
}

}  // namespace

int SignalConfig::window_samples() const {
  return WholeSamples(window_ms, sample_rate, "window_ms");
}

int SignalConfig::hop_samples() const {
  return WholeSamples(hop_ms, sample_rate, "hop_ms");
}

void SignalConfig::Validate() const {
  if (sample_rate <= 0) throw ConfigError("signal.sample_rate must be > 0");
  if (mel_bins < 1) throw ConfigError("signal.mel_bins must be >= 1");
  if (fft_size < 2) throw ConfigError("signal.fft_size must be >= 2");
  if (window_samples() > fft_size) {
    throw ConfigError("signal.fft_size must cover the analysis window");
  }
  hop_samples();
  if (!(fmin >= 0.0 && fmax > fmin && fmax <= sample_rate / 2.0)) {
    throw ConfigError("signal.fmin/fmax must satisfy 0 <= fmin < fmax <= sr/2");
  }
}

std::int64_t FrameCount(std::int64_t num_samples, const SignalConfig& cfg) {
  const std::int64_t win = cfg.window_samples();
  if (num_samples < win) return 0;
  return (num_samples - win) / cfg.hop_samples() + 1;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double MelToHz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelFilterbank::MelFilterbank(const SignalConfig& cfg) {
  cfg.Validate();
  const int n_freq = cfg.num_fft_bins();
  const int n_mels = cfg.mel_bins;
  const double mel_lo = HzToMel(cfg.fmin);
  const double mel_hi = HzToMel(cfg.fmax);

  // n_mels + 2 equally spaced points on the mel axis; filter m peaks at m+1.
  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    edges[i] = MelToHz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
  }
  center_hz_.assign(edges.begin() + 1, edges.end() - 1);

  weights_ = torch::zeros({n_freq, n_mels}, torch::kFloat32);
  auto w = weights_.accessor<float, 2>();
  const double bin_hz = static_cast<double>(cfg.sample_rate) / cfg.fft_size;
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < n_freq; ++k) {
      const double f = k * bin_hz;
      double v = 0.0;
      if (f > lo && f <= mid) {
        v = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        v = (hi - f) / (hi - mid);
      }
      w[k][m] = static_cast<float>(v);
    }
  }
}

torch::Tensor MelSpectrogram(const torch::Tensor& waveform,
                             const SignalConfig& cfg) {
  cfg.Validate();
  if (waveform.dim() != 1) throw InputError("waveform must be rank 1");
  const int win = cfg.window_samples();
  const int hop = cfg.hop_samples();
  if (waveform.size(0) < win) {
    throw InputError("waveform shorter than one analysis window (" +
                     std::to_string(waveform.size(0)) + " < " +
                     std::to_string(win) + " samples)");
  }
  // Filterbanks are cheap to build but mel extraction runs per utterance;
  // cache the last one.
  thread_local SignalConfig cached_cfg{};
  thread_local torch::Tensor cached_fb;
  thread_local torch::Tensor cached_window;
  if (!cached_fb.defined() || cached_cfg.sample_rate != cfg.sample_rate ||
      cached_cfg.fft_size != cfg.fft_size ||
      cached_cfg.window_ms != cfg.window_ms ||
      cached_cfg.mel_bins != cfg.mel_bins || cached_cfg.fmin != cfg.fmin ||
      cached_cfg.fmax != cfg.fmax) {
    cached_cfg = cfg;
    cached_fb = MelFilterbank(cfg).weights().to(torch::kFloat64);
    cached_window = torch::hann_window(
        win, torch::TensorOptions().dtype(torch::kFloat64));
  }

  torch::NoGradGuard no_grad;
  auto x = waveform.to(torch::kFloat64);
  auto frames = x.unfold(0, win, hop) * cached_window;  // [F, win]
  frames = torch::constant_pad_nd(frames, {0, cfg.fft_size - win});
  auto spec = torch::fft::rfft(frames, cfg.fft_size, -1);
  auto power = torch::real(spec * torch::conj(spec));  // [F, n_freq]
  auto mel = torch::matmul(power, cached_fb);
  return torch::log(torch::clamp_min(mel, kLogFloor)).to(torch::kFloat32);
}

}  // namespace tagstyle
