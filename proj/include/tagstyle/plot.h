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

// Static PNG plots. No text rendering; axes are implied by layout.

#ifndef TAGSTYLE_PLOT_H_
#define TAGSTYLE_PLOT_H_

#include <cstdint>
#include <filesystem>
#include <vector>

#include <torch/torch.h>

namespace tagstyle {

struct Image {
  int width = 0, height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, top row first

  Image(int w, int h);
  void Set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

void WritePng(const std::filesystem::path& path, const Image& image);
// Width and height stored in a PNG header. Throws InputError if unreadable.
std::pair<int, int> PngSize(const std::filesystem::path& path);

// Mel [frames, bins] as a heatmap: time left to right, low bins at the
// bottom, each cell `scale` pixels square.
void PlotMel(const std::filesystem::path& path, const torch::Tensor& mel, int scale = 4);

// Soft alignment [N, T] in grey, hard path cells in red. Phoneme 0 at top.
void PlotAlignment(const std::filesystem::path& path, const torch::Tensor& a_soft,
                   const torch::Tensor& a_hard, int scale = 8);

// Paired bars per phoneme: `first` in blue, `second` (optional) in orange.
void PlotDurations(const std::filesystem::path& path,
                   const std::vector<std::int64_t>& first,
                   const std::vector<std::int64_t>& second = {});

// Projection of K vectors [K, d] onto their top two principal axes. Signs
// are fixed so the largest-magnitude loading of each axis is positive.
torch::Tensor Project2D(const torch::Tensor& vectors);

// Scatter of points [K, 2] colored by label. Returns the number drawn.
std::int64_t PlotScatter(const std::filesystem::path& path, const torch::Tensor& points,
                         const std::vector<int>& labels, int size = 400);

}  // namespace tagstyle

#endif  // TAGSTYLE_PLOT_H_
