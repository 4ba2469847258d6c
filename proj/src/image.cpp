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

#include "sllen/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace sllen {

namespace {

std::string lower_ext(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

bool supported_ext(const std::string& ext) {
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

ImageTensor::ImageTensor(Tensor t, ColorSpace cs) : data(std::move(t)), color_space(cs) {
  if (data.rank() != 3) raise(Err::DegenerateShape, "image tensor must be (C,H,W)");
  int c = data.dim(0);
  if ((cs == ColorSpace::RGB && c != 3) || (cs == ColorSpace::GRAY && c != 1))
    raise(Err::DegenerateShape,
          "channel count " + std::to_string(c) + " inconsistent with color space");
}

ImageTensor load_image(const std::string& path) {
  if (!std::filesystem::exists(path)) raise(Err::FileNotFound, path);
  if (!supported_ext(lower_ext(path)))
    raise(Err::UnsupportedFormat, path + " (expected .png/.jpg/.jpeg)");
  cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (m.empty()) raise(Err::CorruptImage, path);

  double denom;
  if (m.depth() == CV_8U)
    denom = 255.0;
  else if (m.depth() == CV_16U)
    denom = 65535.0;
  else
    raise(Err::UnsupportedFormat, path + ": unsupported bit depth");

  int ch = m.channels();
  if (ch != 1 && ch != 3 && ch != 4) raise(Err::CorruptImage, path + ": unexpected channel count");

  int h = m.rows, w = m.cols;
  bool gray = ch == 1;
  Tensor t({gray ? 1 : 3, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (gray) {
        double v = m.depth() == CV_8U ? m.at<uint8_t>(y, x) : m.at<uint16_t>(y, x);
        t.at(0, y, x) = v / denom;
      } else if (ch == 3) {
        // OpenCV stores BGR.
        if (m.depth() == CV_8U) {
          auto px = m.at<cv::Vec3b>(y, x);
          t.at(0, y, x) = px[2] / denom;
          t.at(1, y, x) = px[1] / denom;
          t.at(2, y, x) = px[0] / denom;
        } else {
          auto px = m.at<cv::Vec3w>(y, x);
          t.at(0, y, x) = px[2] / denom;
          t.at(1, y, x) = px[1] / denom;
          t.at(2, y, x) = px[0] / denom;
        }
      } else {
        if (m.depth() == CV_8U) {
          auto px = m.at<cv::Vec4b>(y, x);
          t.at(0, y, x) = px[2] / denom;
          t.at(1, y, x) = px[1] / denom;
          t.at(2, y, x) = px[0] / denom;
        } else {
          auto px = m.at<cv::Vec4w>(y, x);
          t.at(0, y, x) = px[2] / denom;
          t.at(1, y, x) = px[1] / denom;
          t.at(2, y, x) = px[0] / denom;
        }
      }
    }
  }
  if (!t.all_finite()) raise(Err::CorruptImage, path + ": non-finite values");
  return gray ? ImageTensor::gray(std::move(t)) : ImageTensor::rgb(std::move(t));
}

void save_image(const ImageTensor& img, const std::string& path) {
  if (!img.data.all_finite()) raise(Err::IoError, "refusing to save non-finite image");
  int h = img.height(), w = img.width();
  bool gray = img.color_space == ColorSpace::GRAY;
  cv::Mat m(h, w, gray ? CV_8UC1 : CV_8UC3);
  auto q = [](double v) {
    v = std::clamp(v, 0.0, 1.0);
    return static_cast<uint8_t>(std::lround(v * 255.0));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (gray) {
        m.at<uint8_t>(y, x) = q(img.data.at(0, y, x));
      } else {
        m.at<cv::Vec3b>(y, x) =
            cv::Vec3b(q(img.data.at(2, y, x)), q(img.data.at(1, y, x)), q(img.data.at(0, y, x)));
      }
    }
  }
  std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  // Write to a temp file first so readers never observe partial output.
  std::string tmp = path + ".tmp" + lower_ext(path);
  bool ok = false;
  try {
    ok = cv::imwrite(tmp, m);
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    raise(Err::IoError, "failed to encode " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) raise(Err::IoError, "failed to move " + tmp + " to " + path);
}

LabelMap load_label_map(const std::string& path) {
  if (!std::filesystem::exists(path)) raise(Err::FileNotFound, path);
  cv::Mat m = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (m.empty()) raise(Err::CorruptImage, path);
  LabelMap lm;
  lm.height = m.rows;
  lm.width = m.cols;
  lm.ids.resize(static_cast<size_t>(m.rows) * m.cols);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x)
      lm.ids[static_cast<size_t>(y) * m.cols + x] = m.at<uint8_t>(y, x);
  return lm;
}

GradientField spatial_gradients(const Tensor& img) {
  if (img.rank() != 3) raise(Err::DegenerateShape, "spatial_gradients expects (C,H,W)");
  int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  if (h < 2 || w < 2)
    raise(Err::DegenerateShape, "spatial_gradients needs H,W >= 2, got " + shape_str(img.shape()));
  GradientField g{Tensor(img.shape()), Tensor(img.shape())};
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        g.gx.at(ch, y, x) = x + 1 < w ? img.at(ch, y, x + 1) - img.at(ch, y, x) : 0.0;
        g.gy.at(ch, y, x) = y + 1 < h ? img.at(ch, y + 1, x) - img.at(ch, y, x) : 0.0;
      }
  return g;
}

std::vector<double> avg_gradient(const Tensor& img) {
  GradientField g = spatial_gradients(img);
  int c = img.dim(0);
  int64_t hw = static_cast<int64_t>(img.dim(1)) * img.dim(2);
  std::vector<double> out(static_cast<size_t>(c));
  for (int ch = 0; ch < c; ++ch) {
    double s = 0.0;
    const double* gx = g.gx.data() + ch * hw;
    const double* gy = g.gy.data() + ch * hw;
    for (int64_t i = 0; i < hw; ++i) s += 0.5 * (std::fabs(gx[i]) + std::fabs(gy[i]));
    out[static_cast<size_t>(ch)] = s / static_cast<double>(hw);
  }
  return out;
}

ImageTensor retinex_decompose(const ImageTensor& low, const ImageTensor& enhanced, double eps) {
  if (!low.data.same_shape(enhanced.data))
    raise(Err::ShapeMismatch, "retinex_decompose " + shape_str(low.data.shape()) + " vs " +
                                  shape_str(enhanced.data.shape()));
  if (eps < 0.0) raise(Err::InvalidParam, "retinex_decompose eps must be >= 0");
  Tensor u(low.data.shape());
  for (int64_t i = 0; i < u.numel(); ++i) u[i] = low.data[i] / (enhanced.data[i] + eps);
  return ImageTensor(std::move(u), low.color_space);
}

ImageTensor pad_reflect_to_multiple(const ImageTensor& img, int m) {
  if (m < 1) raise(Err::InvalidParam, "pad multiple must be >= 1");
  int h = img.height(), w = img.width(), c = img.channels();
  int ph = (m - h % m) % m;
  int pw = (m - w % m) % m;
  if (ph == 0 && pw == 0) return img;
  int nh = h + ph, nw = w + pw;
  // Mirror indices without repeating the border sample; needs src dim >= 2.
  auto reflect = [](int i, int n) { return i < n ? i : 2 * n - 2 - i; };
  if ((ph > 0 && h < 2) || (pw > 0 && w < 2))
    raise(Err::DegenerateShape, "image too small to mirror-pad");
  if (ph >= h || pw >= w)
    raise(Err::DegenerateShape, "padding exceeds image size; image too small for multiple " +
                                    std::to_string(m));
  Tensor t({c, nh, nw});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < nh; ++y)
      for (int x = 0; x < nw; ++x) t.at(ch, y, x) = img.data.at(ch, reflect(y, h), reflect(x, w));
  return ImageTensor(std::move(t), img.color_space);
}

ImageTensor crop(const ImageTensor& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > img.height() || x0 + w > img.width())
    raise(Err::DegenerateShape, "crop out of bounds");
  int c = img.channels();
  Tensor t({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) t.at(ch, y, x) = img.data.at(ch, y0 + y, x0 + x);
  return ImageTensor(std::move(t), img.color_space);
}

ImageTensor render_normalized(const Tensor& u) {
  if (u.rank() != 3) raise(Err::DegenerateShape, "render_normalized expects (C,H,W)");
  int c = u.dim(0), h = u.dim(1), w = u.dim(2);
  Tensor g({1, h, w});
  int64_t hw = static_cast<int64_t>(h) * w;
  for (int64_t i = 0; i < hw; ++i) {
    double s = 0.0;
    for (int ch = 0; ch < c; ++ch) s += u[ch * hw + i];
    g[i] = s / c;
  }
  double lo = g.min_value(), hi = g.max_value();
  if (hi - lo < 1e-12) {
    g.fill(0.5);
  } else {
    for (int64_t i = 0; i < hw; ++i) g[i] = (g[i] - lo) / (hi - lo);
  }
  return ImageTensor::gray(std::move(g));
}

void write_umap(const Tensor& u, const std::string& path) {
  if (u.rank() != 3) raise(Err::DegenerateShape, "write_umap expects (C,H,W)");
  if (u.dim(0) > 65535 || u.dim(1) > 65535 || u.dim(2) > 65535)
    raise(Err::InvalidParam, "umap dims exceed u16 header range");
  std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) raise(Err::IoError, "cannot open " + path);
  f.write("UMAP", 4);
  uint16_t hdr[4] = {static_cast<uint16_t>(u.dim(0)), static_cast<uint16_t>(u.dim(1)),
                     static_cast<uint16_t>(u.dim(2)), 0};
  f.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  std::vector<float> buf(static_cast<size_t>(u.numel()));
  for (int64_t i = 0; i < u.numel(); ++i) buf[static_cast<size_t>(i)] = static_cast<float>(u[i]);
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!f) raise(Err::IoError, "short write to " + path);
}

Tensor read_umap(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) raise(Err::FileNotFound, path);
  char magic[4];
  uint16_t hdr[4];
  f.read(magic, 4);
  f.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
  if (!f || std::memcmp(magic, "UMAP", 4) != 0) raise(Err::CorruptImage, path + ": bad umap header");
  Tensor u({hdr[0], hdr[1], hdr[2]});
  std::vector<float> buf(static_cast<size_t>(u.numel()));
  f.read(reinterpret_cast<char*>(buf.data()),
         static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!f) raise(Err::CorruptImage, path + ": truncated umap data");
  for (int64_t i = 0; i < u.numel(); ++i) u[i] = buf[static_cast<size_t>(i)];
  return u;
}

Tensor to_gray(const ImageTensor& img) {
  int h = img.height(), w = img.width();
  Tensor g({h, w});
  int64_t hw = static_cast<int64_t>(h) * w;
  if (img.channels() == 1) {
    for (int64_t i = 0; i < hw; ++i) g[i] = img.data[i];
    return g;
  }
  for (int64_t i = 0; i < hw; ++i)
    g[i] = 0.299 * img.data[i] + 0.587 * img.data[hw + i] + 0.114 * img.data[2 * hw + i];
  return g;
}

}  // namespace sllen
