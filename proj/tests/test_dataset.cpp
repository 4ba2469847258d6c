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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "sllen/common.hpp"
#include "sllen/dataset.hpp"

using namespace sllen;
namespace fs = std::filesystem;

namespace {

ImageTensor noise_image(int h, int w, uint64_t seed) {
  Tensor t({3, h, w});
  Rng rng(seed);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform();
  return ImageTensor::rgb(std::move(t));
}

fs::path write_set(const char* tag, const std::vector<std::string>& stems, int h = 8, int w = 8) {
  fs::path dir = fs::temp_directory_path() / (std::string("sllen_ds_") + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  uint64_t seed = 100;
  for (const auto& s : stems) save_image(noise_image(h, w, seed++), (dir / (s + ".png")).string());
  return dir;
}

std::vector<SamplePair> synthetic_pairs(int n, int h, int w) {
  std::vector<SamplePair> pairs;
  for (int i = 0; i < n; ++i) {
    SamplePair p;
    p.id = "p" + std::to_string(i);
    ImageTensor ref = noise_image(h, w, 40 + static_cast<uint64_t>(i));
    p.low = darken(ref, 2.2, 0.5, 0);
    p.reference = ref;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace

TEST_CASE("paired scan matches stems and reports strays") {
  fs::path low = write_set("low", {"a", "b", "c"});
  fs::path ref = write_set("ref", {"a", "c", "d"});
  ScanReport rep = scan_paired_dir(low.string(), ref.string());
  REQUIRE(rep.pairs.size() == 2);
  CHECK(rep.pairs[0].id == "a");
  CHECK(rep.pairs[1].id == "c");
  CHECK(rep.pairs[0].reference.has_value());
  CHECK(rep.pairs[0].low.height() == 8);
  REQUIRE(rep.unmatched_low.size() == 1);
  CHECK(rep.unmatched_low[0] == "b");
  REQUIRE(rep.unmatched_ref.size() == 1);
  CHECK(rep.unmatched_ref[0] == "d");
  fs::remove_all(low);
  fs::remove_all(ref);
}

TEST_CASE("unpaired scan rejects an empty directory") {
  fs::path dir = fs::temp_directory_path() / "sllen_ds_empty";
  fs::remove_all(dir);
  fs::create_directories(dir);
  try {
    scan_unpaired_dir(dir.string());
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Err::EmptyDataset);
  }

  fs::path some = write_set("some", {"x", "y"});
  std::vector<SamplePair> pairs = scan_unpaired_dir(some.string());
  CHECK(pairs.size() == 2);
  CHECK_FALSE(pairs[0].reference.has_value());
  fs::remove_all(dir);
  fs::remove_all(some);
}

TEST_CASE("darkening applies the stated power curve") {
  ImageTensor img = noise_image(6, 6, 3);
  ImageTensor out = darken(img, 2.5, 0.6, 99);
  for (int64_t i = 0; i < img.data.numel(); ++i)
    CHECK(out.data[i] ==
          doctest::Approx(0.6 * std::pow(img.data[i], 2.5)).epsilon(1e-12));

  // Unset parameters are drawn from the seed, reproducibly and in range.
  ImageTensor d1 = darken(img, std::nullopt, std::nullopt, 7);
  ImageTensor d2 = darken(img, std::nullopt, std::nullopt, 7);
  ImageTensor d3 = darken(img, std::nullopt, std::nullopt, 8);
  CHECK(max_abs_diff(d1.data, d2.data) == 0.0);
  CHECK(max_abs_diff(d1.data, d3.data) > 0.0);
  CHECK(d1.data.max_value() <= 0.9);  // scale never exceeds 0.9
  CHECK(d1.data.min_value() >= 0.0);
}

TEST_CASE("epoch batching is a pure function of its arguments") {
  std::vector<SamplePair> pairs = synthetic_pairs(7, 12, 10);

  auto a = epoch_batches(pairs, 3, 0, 11, 4);
  auto b = epoch_batches(pairs, 3, 0, 11, 4);
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == 3);  // 3 + 3 + 1, partial batch kept
  CHECK(a.back().size() == 1);
  for (size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].ids == b[i].ids);
    for (int j = 0; j < a[i].size(); ++j) {
      CHECK(max_abs_diff(a[i].lows[static_cast<size_t>(j)].data,
                         b[i].lows[static_cast<size_t>(j)].data) == 0.0);
      CHECK(a[i].crops[static_cast<size_t>(j)].y == b[i].crops[static_cast<size_t>(j)].y);
    }
  }

  // Every id appears exactly once per epoch.
  std::multiset<std::string> seen;
  for (const auto& batch : a)
    for (const auto& id : batch.ids) seen.insert(id);
  CHECK(seen.size() == 7);
  CHECK(std::set<std::string>(seen.begin(), seen.end()).size() == 7);

  // A different epoch reshuffles (for this fixture, observably).
  auto later = epoch_batches(pairs, 3, 0, 11, 5);
  bool any_diff = false;
  for (size_t i = 0; i < later.size() && !any_diff; ++i) any_diff = later[i].ids != a[i].ids;
  CHECK(any_diff);
}

TEST_CASE("patch cropping stays in bounds and is reference-aligned") {
  std::vector<SamplePair> pairs = synthetic_pairs(4, 20, 16);
  auto batches = epoch_batches(pairs, 2, 8, 5, 0);
  for (const auto& batch : batches) {
    REQUIRE(batch.has_references());
    for (int j = 0; j < batch.size(); ++j) {
      const auto& crop = batch.crops[static_cast<size_t>(j)];
      CHECK(crop.h == 8);
      CHECK(crop.w == 8);
      CHECK(crop.y >= 0);
      CHECK(crop.x >= 0);
      CHECK(crop.y + crop.h <= 20);
      CHECK(crop.x + crop.w <= 16);
      const auto& lw = batch.lows[static_cast<size_t>(j)];
      CHECK(lw.height() == 8);
      CHECK(lw.width() == 8);
      // Low and reference crops come from the same window: the darkening
      // curve must map one onto the other pixel for pixel.
      const auto& rf = batch.references[static_cast<size_t>(j)];
      for (int64_t i = 0; i < lw.data.numel(); ++i)
        CHECK(lw.data[i] == doctest::Approx(0.5 * std::pow(rf.data[i], 2.2)).epsilon(1e-9));
    }
  }

  try {
    epoch_batches(pairs, 2, 32, 5, 0);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Err::PatchLargerThanImage);
  }
}

TEST_CASE("full-frame batches skip cropping") {
  std::vector<SamplePair> pairs = synthetic_pairs(2, 9, 11);
  auto batches = epoch_batches(pairs, 2, 0, 1, 0);
  REQUIRE(batches.size() == 1);
  for (int j = 0; j < batches[0].size(); ++j) {
    CHECK(batches[0].lows[static_cast<size_t>(j)].height() == 9);
    CHECK(batches[0].lows[static_cast<size_t>(j)].width() == 11);
    CHECK(batches[0].crops[static_cast<size_t>(j)].h == 9);
    CHECK(batches[0].crops[static_cast<size_t>(j)].w == 11);
  }
}
