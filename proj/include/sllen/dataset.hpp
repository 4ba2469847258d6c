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

#include <optional>
#include <string>
#include <vector>

#include "sllen/image.hpp"

namespace sllen {

struct SamplePair {
  std::string id;
  ImageTensor low;
  std::optional<ImageTensor> reference;
  std::optional<LabelMap> label_map;
};

struct ScanReport {
  std::vector<SamplePair> pairs;             // lexicographic by id
  std::vector<std::string> unmatched_low;    // stems without a reference
  std::vector<std::string> unmatched_ref;    // stems without a low image
};

// (stem, path) for every supported image in dir, sorted by stem.
std::vector<std::pair<std::string, std::string>> list_images(const std::string& dir);

// Pair low/ref images by file stem. Unmatched stems are reported, not
// dropped silently. labels_dir may be empty.
ScanReport scan_paired_dir(const std::string& low_dir, const std::string& ref_dir,
                           const std::string& labels_dir = "");

// Lows only (no references). Errors with EmptyDataset when nothing matches.
std::vector<SamplePair> scan_unpaired_dir(const std::string& low_dir);

// out = scale * img^gamma. Unset gamma/scale are drawn from the seed:
// gamma ~ U[2,5], scale ~ U[0.4,0.9].
ImageTensor darken(const ImageTensor& img, std::optional<double> gamma,
                   std::optional<double> scale, uint64_t seed);

struct CropInfo {
  int y = 0, x = 0, h = 0, w = 0;
};

struct Batch {
  std::vector<ImageTensor> lows;
  std::vector<ImageTensor> references;  // empty when unpaired
  std::vector<std::string> ids;
  std::vector<CropInfo> crops;

  int size() const { return static_cast<int>(lows.size()); }
  bool has_references() const { return !references.empty(); }
};

// One epoch of shuffled batches with random patch crops (patch = 0 keeps
// full images). Pure function of (pairs, batch_size, patch, seed, epoch);
// the last partial batch is emitted.
std::vector<Batch> epoch_batches(const std::vector<SamplePair>& pairs, int batch_size, int patch,
                                 uint64_t seed, int64_t epoch);

}  // namespace sllen
