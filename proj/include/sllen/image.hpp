/*
 * Copyright 2026 SLLEN Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <string>
#include <vector>

#include "sllen/tensor.hpp"

namespace sllen {

enum class ColorSpace { RGB, GRAY };

// Channel-first raster in [0,1]: (3,H,W) for color, (1,H,W) for grayscale.
struct ImageTensor {
  Tensor data;
  ColorSpace color_space = ColorSpace::RGB;

  ImageTensor() = default;
  ImageTensor(Tensor t, ColorSpace cs);

  int channels() const { return data.dim(0); }
  int height() const { return data.dim(1); }
  int width() const { return data.dim(2); }

  static ImageTensor rgb(Tensor t) { return ImageTensor(std::move(t), ColorSpace::RGB); }
  static ImageTensor gray(Tensor t) { return ImageTensor(std::move(t), ColorSpace::GRAY); }
};

struct GradientField {
  Tensor gx;
  Tensor gy;
};

// Integer class-id raster for segmentation metrics.
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<int> ids;  // row-major

  int at(int h, int w) const { return ids[static_cast<size_t>(h) * width + w]; }
};

// 8-bit PNG/JPEG (16-bit PNG also readable); values scaled to [0,1].
ImageTensor load_image(const std::string& path);

// Clamp to [0,1], quantize to 8-bit, write. Round-trip error <= 1/510.
void save_image(const ImageTensor& img, const std::string& path);

LabelMap load_label_map(const std::string& path);

// Forward differences; the last column of gx and last row of gy are zero.
GradientField spatial_gradients(const Tensor& img);
inline GradientField spatial_gradients(const ImageTensor& img) {
  return spatial_gradients(img.data);
}

// Per-channel mean of (|gx|+|gy|)/2.
std::vector<double> avg_gradient(const Tensor& img);
inline std::vector<double> avg_gradient(const ImageTensor& img) { return avg_gradient(img.data); }

// Illumination map U = low / (enhanced + eps).
ImageTensor retinex_decompose(const ImageTensor& low, const ImageTensor& enhanced,
                              double eps = 1e-4);

// Pad bottom/right with mirrored rows/cols so H and W become multiples of m.
ImageTensor pad_reflect_to_multiple(const ImageTensor& img, int m);
ImageTensor crop(const ImageTensor& img, int y0, int x0, int h, int w);

// Channel mean, then min-max normalized to [0,1]; constant maps become 0.5.
ImageTensor render_normalized(const Tensor& u);

// Raw illumination dump: 12-byte header (magic "UMAP", u16 C/H/W/reserved,
// little-endian) followed by float32 CHW data.
void write_umap(const Tensor& u, const std::string& path);
Tensor read_umap(const std::string& path);

// Luma 0.299 R + 0.587 G + 0.114 B; grayscale images pass through.
Tensor to_gray(const ImageTensor& img);

}  // namespace sllen
