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

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sllen/common.hpp"
#include "sllen/image.hpp"

using namespace sllen;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
  fs::path p = fs::temp_directory_path() / (std::string("sllen_img_") + tag);
  fs::create_directories(p);
  return p;
}

ImageTensor noise_image(int h, int w, uint64_t seed) {
  Tensor t({3, h, w});
  Rng rng(seed);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform();
  return ImageTensor::rgb(std::move(t));
}

// Quantize to the 8-bit grid so a PNG round trip is lossless.
ImageTensor on_grid(ImageTensor img) {
  for (int64_t i = 0; i < img.data.numel(); ++i)
    img.data[i] = std::round(img.data[i] * 255.0) / 255.0;
  return img;
}

}  // namespace

TEST_CASE("png round trip is exact on the 8-bit grid") {
  fs::path dir = temp_dir("png");
  ImageTensor img = on_grid(noise_image(13, 9, 1));
  save_image(img, (dir / "a.png").string());
  ImageTensor back = load_image((dir / "a.png").string());
  CHECK(back.channels() == 3);
  CHECK(back.height() == 13);
  CHECK(back.width() == 9);
  CHECK(max_abs_diff(back.data, img.data) == 0.0);
  fs::remove_all(dir);
}

TEST_CASE("jpeg survives with bounded loss") {
  fs::path dir = temp_dir("jpg");
  // A smooth ramp compresses well; noise would not.
  Tensor t({3, 24, 24});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 24; ++x) t.at(c, y, x) = (y + x) / 46.0;
  ImageTensor img = ImageTensor::rgb(std::move(t));
  save_image(img, (dir / "a.jpg").string());
  ImageTensor back = load_image((dir / "a.jpg").string());
  CHECK(back.height() == 24);
  double worst = max_abs_diff(back.data, img.data);
  CHECK(worst < 0.1);
  fs::remove_all(dir);
}

TEST_CASE("load failures carry the right error codes") {
  fs::path dir = temp_dir("bad");
  CHECK_THROWS_AS(load_image((dir / "missing.png").string()), Error);
  try {
    load_image((dir / "missing.png").string());
  } catch (const Error& e) {
    CHECK(e.code() == Err::FileNotFound);
  }

  std::ofstream((dir / "junk.png").string()) << "this is not a png";
  try {
    load_image((dir / "junk.png").string());
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Err::CorruptImage);
  }

  std::ofstream((dir / "notes.txt").string()) << "text";
  try {
    load_image((dir / "notes.txt").string());
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Err::UnsupportedFormat);
  }
  fs::remove_all(dir);
}

TEST_CASE("gradients, average gradient and luma") {
  Tensor plane = Tensor::from({1, 2, 2}, {0, 1, 0, 1});
  GradientField g = spatial_gradients(plane);
  CHECK(g.gx.at(0, 0, 0) == 1.0);
  CHECK(g.gx.at(0, 0, 1) == 0.0);  // last column clamps to zero
  CHECK(g.gy.at(0, 1, 0) == 0.0);  // last row clamps to zero
  CHECK(avg_gradient(plane)[0] == 0.25);

  // Per-channel results stay independent.
  Tensor two({2, 2, 2});
  two.fill(0.0);
  two.at(1, 0, 1) = 1.0;
  std::vector<double> ag = avg_gradient(two);
  CHECK(ag[0] == 0.0);
  CHECK(ag[1] > 0.0);

  Tensor rgb({3, 1, 1});
  rgb.at(0, 0, 0) = 1.0;
  Tensor gray = to_gray(ImageTensor::rgb(rgb));
  CHECK(gray.rank() == 2);
  CHECK(gray.at(0, 0) == doctest::Approx(0.299).epsilon(1e-12));
}

TEST_CASE("reflect padding reaches the next multiple and mirrors content") {
  ImageTensor img = noise_image(13, 10, 7);
  ImageTensor padded = pad_reflect_to_multiple(img, 8);
  CHECK(padded.height() == 16);
  CHECK(padded.width() == 16);
  // Top-left block is the original.
  for (int y = 0; y < 13; ++y)
    for (int x = 0; x < 10; ++x)
      CHECK(padded.data.at(0, y, x) == img.data.at(0, y, x));
  // First mirrored column repeats the second-to-last real one.
  CHECK(padded.data.at(1, 5, 10) == img.data.at(1, 5, 8));
  CHECK(padded.data.at(2, 13, 3) == img.data.at(2, 11, 3));

  ImageTensor cropped = crop(padded, 0, 0, 13, 10);
  CHECK(max_abs_diff(cropped.data, img.data) == 0.0);

  // Already-aligned input passes through untouched.
  ImageTensor ok = noise_image(16, 8, 8);
  CHECK(max_abs_diff(pad_reflect_to_multiple(ok, 8).data, ok.data) == 0.0);
}

TEST_CASE("illumination decomposition") {
  ImageTensor low = noise_image(6, 6, 21);
  ImageTensor same = retinex_decompose(low, low);
  // enhanced == low gives U == low/(low+eps), just under 1.
  CHECK(same.data.max_value() < 1.0);
  CHECK(same.data.min_value() > 0.0);
  for (int64_t i = 0; i < same.data.numel(); ++i)
    CHECK(same.data[i] ==
          doctest::Approx(low.data[i] / (low.data[i] + 1e-4)).epsilon(1e-12));

  // Doubling the output halves the map.
  ImageTensor bright = low;
  bright.data = low.data;
  for (int64_t i = 0; i < bright.data.numel(); ++i) bright.data[i] = low.data[i] * 2.0;
  ImageTensor u = retinex_decompose(low, bright);
  CHECK(u.data.mean_value() < same.data.mean_value());
}

TEST_CASE("normalized rendering handles constant maps") {
  Tensor flat = Tensor::full({3, 4, 4}, 0.42);
  ImageTensor rendered = render_normalized(flat);
  CHECK(rendered.channels() == 1);
  CHECK(max_abs_diff(rendered.data, Tensor::full({1, 4, 4}, 0.5)) == 0.0);

  Tensor ramp = Tensor::from({1, 1, 3}, {2.0, 3.0, 4.0});
  ImageTensor r = render_normalized(ramp);
  CHECK(r.data[0] == 0.0);
  CHECK(r.data[1] == 0.5);
  CHECK(r.data[2] == 1.0);
}

TEST_CASE("raw illumination dumps round trip through the UMAP container") {
  fs::path dir = temp_dir("umap");
  Tensor u({2, 3, 5});
  Rng rng(31);
  for (int64_t i = 0; i < u.numel(); ++i) u[i] = rng.uniform(0.0, 4.0);
  // Stored as float32, so snap the fixture to float precision first.
  for (int64_t i = 0; i < u.numel(); ++i) u[i] = static_cast<float>(u[i]);

  fs::path file = dir / "maps" / "a.umap";  // parent dir is created on demand
  write_umap(u, file.string());
  Tensor back = read_umap(file.string());
  CHECK(back.rank() == 3);
  CHECK(back.dim(0) == 2);
  CHECK(back.dim(1) == 3);
  CHECK(back.dim(2) == 5);
  CHECK(max_abs_diff(back, u) == 0.0);

  // Header magic is enforced.
  std::ofstream((dir / "bad.umap").string(), std::ios::binary) << "XXXXgarbage";
  CHECK_THROWS_AS(read_umap((dir / "bad.umap").string()), Error);
  fs::remove_all(dir);
}

TEST_CASE("label maps load from 8-bit class-id rasters") {
  fs::path dir = temp_dir("labels");
  Tensor ids({1, 2, 3});
  ids.at(0, 0, 0) = 0.0;
  ids.at(0, 0, 1) = 5.0 / 255.0;
  ids.at(0, 0, 2) = 20.0 / 255.0;
  ids.at(0, 1, 0) = 1.0 / 255.0;
  ids.at(0, 1, 1) = 1.0 / 255.0;
  ids.at(0, 1, 2) = 0.0;
  save_image(ImageTensor::gray(ids), (dir / "m.png").string());
  LabelMap m = load_label_map((dir / "m.png").string());
  CHECK(m.height == 2);
  CHECK(m.width == 3);
  CHECK(m.at(0, 1) == 5);
  CHECK(m.at(0, 2) == 20);
  CHECK(m.at(1, 0) == 1);
  CHECK(m.at(1, 2) == 0);
  fs::remove_all(dir);
}
