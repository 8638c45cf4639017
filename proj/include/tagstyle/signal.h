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

#ifndef TAGSTYLE_SIGNAL_H_
#define TAGSTYLE_SIGNAL_H_

#include <cstdint>
#include <vector>

#include <torch/torch.h>

namespace tagstyle {

// Energies below this are clamped before the log.
inline constexpr double kLogFloor = 1e-5;

struct SignalConfig {
  int sample_rate = 16000;
  int fft_size = 1024;
  double window_ms = 50.0;
  double hop_ms = 12.5;
  int mel_bins = 120;
  double fmin = 0.0;
  double fmax = 8000.0;

  int window_samples() const;
  int hop_samples() const;
  int num_fft_bins() const { return fft_size / 2 + 1; }

  // Throws ConfigError when window/hop do not land on whole samples, the
  // window exceeds the FFT size, or the mel range is empty.
  void Validate() const;
};

// floor((num_samples - window) / hop) + 1, or 0 when shorter than a window.
std::int64_t FrameCount(std::int64_t num_samples, const SignalConfig& cfg);

double HzToMel(double hz);
double MelToHz(double mel);

// Triangular mel filterbank on the HTK mel scale, unit peak height.
class MelFilterbank {
 public:
  explicit MelFilterbank(const SignalConfig& cfg);

  // [num_fft_bins, mel_bins], float32.
  const torch::Tensor& weights() const { return weights_; }
  // Peak frequency of every filter, in Hz.
  const std::vector<double>& center_hz() const { return center_hz_; }

 private:
  torch::Tensor weights_;
  std::vector<double> center_hz_;
};

// Log mel energies, shape [frames, mel_bins], float32. Frames are taken
// without centering: frame j covers samples [j*hop, j*hop + window).
// Throws InputError if the waveform is shorter than one window.
torch::Tensor MelSpectrogram(const torch::Tensor& waveform,
                             const SignalConfig& cfg);

}  // namespace tagstyle

#endif  // TAGSTYLE_SIGNAL_H_
