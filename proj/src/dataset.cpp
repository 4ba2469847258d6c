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

#include "sllen/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

namespace sllen {

namespace {

bool supported_image(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::map<std::string, std::string> stem_map(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) raise(Err::FileNotFound, dir + " is not a directory");
  std::map<std::string, std::string> m;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && supported_image(e.path())) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& p : files) m.emplace(p.stem().string(), p.string());  // first ext wins
  return m;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> list_images(const std::string& dir) {
  auto m = stem_map(dir);
  return {m.begin(), m.end()};
}

ScanReport scan_paired_dir(const std::string& low_dir, const std::string& ref_dir,
                           const std::string& labels_dir) {
  auto lows = stem_map(low_dir);
  auto refs = stem_map(ref_dir);
  std::map<std::string, std::string> labels;
  if (!labels_dir.empty()) labels = stem_map(labels_dir);

  ScanReport report;
  for (const auto& [stem, path] : lows) {
    auto it = refs.find(stem);
    if (it == refs.end()) {
      report.unmatched_low.push_back(stem);
      continue;
    }
    SamplePair sp;
    sp.id = stem;
    sp.low = load_image(path);
    sp.reference = load_image(it->second);
    if (!sp.low.data.same_shape(sp.reference->data))
      raise(Err::ShapeMismatch, "pair '" + stem + "': low " + shape_str(sp.low.data.shape()) +
                                    " vs ref " + shape_str(sp.reference->data.shape()));
    if (auto lit = labels.find(stem); lit != labels.end()) sp.label_map = load_label_map(lit->second);
    report.pairs.push_back(std::move(sp));
  }
  for (const auto& [stem, path] : refs)
    if (!lows.count(stem)) report.unmatched_ref.push_back(stem);
  if (report.pairs.empty())
    raise(Err::EmptyDataset, "no matched pairs between " + low_dir + " and " + ref_dir);
  return report;
}

std::vector<SamplePair> scan_unpaired_dir(const std::string& low_dir) {
  auto lows = stem_map(low_dir);
  std::vector<SamplePair> out;
  for (const auto& [stem, path] : lows) {
    SamplePair sp;
    sp.id = stem;
    sp.low = load_image(path);
    out.push_back(std::move(sp));
  }
  if (out.empty()) raise(Err::EmptyDataset, "no images in " + low_dir);
  return out;
}

ImageTensor darken(const ImageTensor& img, std::optional<double> gamma,
                   std::optional<double> scale, uint64_t seed) {
  Rng rng(mix64(seed));
  double g = gamma ? *gamma : rng.uniform(2.0, 5.0);
  double s = scale ? *scale : rng.uniform(0.4, 0.9);
  if (g < 1.0) raise(Err::InvalidParam, "darken gamma must be >= 1");
  if (s <= 0.0 || s > 1.0) raise(Err::InvalidParam, "darken scale must be in (0,1]");
  Tensor out(img.data.shape());
  for (int64_t i = 0; i < out.numel(); ++i) {
    double v = std::clamp(img.data[i], 0.0, 1.0);
    out[i] = s * std::pow(v, g);
  }
  return ImageTensor(std::move(out), img.color_space);
}

std::vector<Batch> epoch_batches(const std::vector<SamplePair>& pairs, int batch_size, int patch,
                                 uint64_t seed, int64_t epoch) {
  if (pairs.empty()) raise(Err::EmptyDataset, "no samples to batch");
  if (batch_size < 1) raise(Err::InvalidParam, "batch_size must be >= 1");
  if (patch < 0 || (patch > 0 && patch % 8 != 0))
    raise(Err::InvalidParam, "patch must be 0 or a positive multiple of 8");

  Rng rng(hash_combine(seed, static_cast<uint64_t>(epoch)));
  std::vector<int> order(pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);

  std::vector<Batch> batches;
  Batch cur;
  for (int idx : order) {
    const SamplePair& sp = pairs[static_cast<size_t>(idx)];
    CropInfo ci{0, 0, sp.low.height(), sp.low.width()};
    ImageTensor low = sp.low;
    std::optional<ImageTensor> ref = sp.reference;
    if (patch > 0) {
      if (patch > sp.low.height() || patch > sp.low.width())
        raise(Err::PatchLargerThanImage, "patch " + std::to_string(patch) + " exceeds image '" +
                                             sp.id + "' " + shape_str(sp.low.data.shape()));
      ci.y = rng.uniform_int(0, sp.low.height() - patch);
      ci.x = rng.uniform_int(0, sp.low.width() - patch);
      ci.h = ci.w = patch;
      low = crop(sp.low, ci.y, ci.x, patch, patch);
      if (ref) ref = crop(*ref, ci.y, ci.x, patch, patch);
    }
    cur.lows.push_back(std::move(low));
    if (ref) cur.references.push_back(std::move(*ref));
    cur.ids.push_back(sp.id);
    cur.crops.push_back(ci);
    if (cur.size() == batch_size) {
      batches.push_back(std::move(cur));
      cur = Batch{};
    }
  }
  if (cur.size() > 0) batches.push_back(std::move(cur));
  return batches;
}

}  // namespace sllen
