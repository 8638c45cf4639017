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

#include "tagstyle/plot.h"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "tagstyle/error.h"

namespace tagstyle {

namespace {

struct Rgb {
  std::uint8_t r, g, b;
};

constexpr Rgb kPalette[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},
                            {214, 39, 40},  {148, 103, 189}, {140, 86, 75},
                            {227, 119, 194}, {127, 127, 127}};

// Dark blue -> yellow.
Rgb Heat(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return {static_cast<std::uint8_t>(255 * std::sqrt(v)),
          static_cast<std::uint8_t>(255 * v),
          static_cast<std::uint8_t>(255 * (0.35 * (1 - v)) + 40 * v)};
}

void FillRect(Image* img, int x0, int y0, int w, int h, Rgb c) {
  for (int y = std::max(0, y0); y < std::min(img->height, y0 + h); ++y) {
    for (int x = std::max(0, x0); x < std::min(img->width, x0 + w); ++x) {
      img->Set(x, y, c.r, c.g, c.b);
    }
  }
}

}  // namespace

Image::Image(int w, int h) : width(w), height(h), rgb(3 * w * h, 255) {
  if (w < 1 || h < 1) throw InputError("image dimensions must be positive");
}

void Image::Set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  auto* p = &rgb[3 * (static_cast<std::size_t>(y) * width + x)];
  p[0] = r;
  p[1] = g;
  p[2] = b;
}

void WritePng(const std::filesystem::path& path, const Image& image) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw InputError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(&image.rgb[3 * static_cast<std::size_t>(y) *
                                                         image.width]));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::pair<int, int> PngSize(const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) throw InputError("cannot open " + path.string());
  unsigned char header[24];
  if (std::fread(header, 1, sizeof(header), fp.get()) != sizeof(header) ||
      png_sig_cmp(header, 0, 8) != 0) {
    throw InputError(path.string() + " is not a PNG file");
  }
  auto be32 = [&](int off) {
    return (header[off] << 24) | (header[off + 1] << 16) | (header[off + 2] << 8) |
           header[off + 3];
  };
  return {be32(16), be32(20)};
}

void PlotMel(const std::filesystem::path& path, const torch::Tensor& mel, int scale) {
  if (mel.dim() != 2 || mel.size(0) < 1) throw InputError("mel plot expects [frames, bins]");
  auto m = mel.detach().to(torch::kFloat64).contiguous();
  const double lo = m.min().item<double>(), hi = m.max().item<double>();
  const double span = hi > lo ? hi - lo : 1.0;
  const int frames = static_cast<int>(m.size(0)), bins = static_cast<int>(m.size(1));
  Image img(frames * scale, bins * scale);
  auto a = m.accessor<double, 2>();
  for (int t = 0; t < frames; ++t) {
    for (int k = 0; k < bins; ++k) {
      FillRect(&img, t * scale, (bins - 1 - k) * scale, scale, scale,
               Heat((a[t][k] - lo) / span));
    }
  }
  WritePng(path, img);
}

void PlotAlignment(const std::filesystem::path& path, const torch::Tensor& a_soft,
                   const torch::Tensor& a_hard, int scale) {
  if (a_soft.dim() != 2 || a_soft.sizes() != a_hard.sizes()) {
    throw InputError("alignment plot expects matching [N, T] matrices");
  }
  auto s = a_soft.detach().to(torch::kFloat64).contiguous();
  auto h = a_hard.detach().to(torch::kFloat64).contiguous();
  const int n = static_cast<int>(s.size(0)), t = static_cast<int>(s.size(1));
  Image img(t * scale, n * scale);
  auto sa = s.accessor<double, 2>();
  auto ha = h.accessor<double, 2>();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < t; ++j) {
      const auto g = static_cast<std::uint8_t>(255 * (1 - std::clamp(sa[i][j], 0.0, 1.0)));
      FillRect(&img, j * scale, i * scale, scale, scale, {g, g, g});
      if (ha[i][j] > 0.5) {
        const int inset = scale / 4;
        FillRect(&img, j * scale + inset, i * scale + inset, scale - 2 * inset,
                 scale - 2 * inset, {220, 30, 30});
      }
    }
  }
  WritePng(path, img);
}

void PlotDurations(const std::filesystem::path& path,
                   const std::vector<std::int64_t>& first,
                   const std::vector<std::int64_t>& second) {
  if (first.empty()) throw InputError("duration plot needs at least one phoneme");
  if (!second.empty() && second.size() != first.size()) {
    throw InputError("duration plot: series lengths differ");
  }
  std::int64_t top = 1;
  for (auto d : first) top = std::max(top, d);
  for (auto d : second) top = std::max(top, d);
  const int bar = 10, gap = 6, unit = 12;
  const int per = second.empty() ? bar + gap : 2 * bar + gap;
  const int width = static_cast<int>(first.size()) * per + gap;
  const int height = static_cast<int>(top) * unit + 2 * gap;
  Image img(width, height);
  for (std::size_t i = 0; i < first.size(); ++i) {
    const int x = gap + static_cast<int>(i) * per;
    const int h1 = static_cast<int>(first[i]) * unit;
    FillRect(&img, x, height - gap - h1, bar, h1, kPalette[0]);
    if (!second.empty()) {
      const int h2 = static_cast<int>(second[i]) * unit;
      FillRect(&img, x + bar, height - gap - h2, bar, h2, kPalette[1]);
    }
  }
  FillRect(&img, 0, height - gap, width, 1, {0, 0, 0});
  WritePng(path, img);
}

torch::Tensor Project2D(const torch::Tensor& vectors) {
  if (vectors.dim() != 2 || vectors.size(0) < 1) {
    throw InputError("projection expects [K >= 1, d] vectors");
  }
  auto x = vectors.detach().to(torch::kFloat64);
  x = x - x.mean(0, true);
  auto [u, s, vh] = torch::linalg_svd(x, /*full_matrices=*/false);
  const auto k = std::min<std::int64_t>(2, vh.size(0));
  auto axes = vh.narrow(0, 0, k).clone();
  for (std::int64_t i = 0; i < k; ++i) {
    const auto j = axes[i].abs().argmax().item<std::int64_t>();
    if (axes[i][j].item<double>() < 0) axes[i].neg_();
  }
  auto pts = torch::matmul(x, axes.t());
  if (k < 2) pts = torch::cat({pts, torch::zeros({pts.size(0), 2 - k}, pts.options())}, 1);
  return pts;
}

std::int64_t PlotScatter(const std::filesystem::path& path, const torch::Tensor& points,
                         const std::vector<int>& labels, int size) {
  if (points.dim() != 2 || points.size(1) != 2 ||
      points.size(0) != static_cast<std::int64_t>(labels.size())) {
    throw InputError("scatter expects [K, 2] points and K labels");
  }
  auto p = points.detach().to(torch::kFloat64).contiguous();
  auto lo = std::get<0>(p.min(0)), hi = std::get<0>(p.max(0));
  auto span = (hi - lo).clamp_min(1e-12);
  Image img(size, size);
  const int margin = 12, dot = 3;
  auto a = p.accessor<double, 2>();
  std::int64_t drawn = 0;
  for (std::int64_t i = 0; i < p.size(0); ++i) {
    const double fx = (a[i][0] - lo[0].item<double>()) / span[0].item<double>();
    const double fy = (a[i][1] - lo[1].item<double>()) / span[1].item<double>();
    const int x = margin + static_cast<int>(fx * (size - 2 * margin));
    const int y = size - margin - static_cast<int>(fy * (size - 2 * margin));
    const auto& c = kPalette[static_cast<std::size_t>(std::max(0, labels[i])) % 8];
    FillRect(&img, x - dot, y - dot, 2 * dot + 1, 2 * dot + 1, c);
    ++drawn;
  }
  WritePng(path, img);
  return drawn;
}

}  // namespace tagstyle
