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
#include <utility>
#include <vector>

#include "sllen/tensor.hpp"

namespace sllen {

// Weight-file container: a text manifest (one line per block with name,
// dtype, and shape) followed by raw little-endian data. Network weights use
// f32 blocks; optimizer state uses f64 so a resumed run continues bitwise.
//
//   SLLENBLK 1
//   header <single-line JSON>
//   block <name> <f32|f64> <ndim> <d0> <d1> ...
//   ...
//   data
//   <raw bytes, block order>

struct Block {
  std::string name;
  bool f64 = false;
  Tensor tensor;
};

class BlockWriter {
 public:
  void set_header(std::string json_line) { header_ = std::move(json_line); }
  void add(const std::string& name, const Tensor& t, bool f64 = false);
  void write(const std::string& path) const;

 private:
  std::string header_ = "{}";
  std::vector<Block> blocks_;
};

struct BlockFile {
  std::string header;
  std::vector<Block> blocks;

  const Block* find(const std::string& name) const;
  // Fetch a block that must exist with exactly this shape.
  const Tensor& expect(const std::string& name, const std::vector<int>& shape) const;
};

BlockFile read_blocks(const std::string& path);

// Whole-file text write through a temp file + rename, so readers never see
// a half-written file.
void write_text_atomic(const std::string& path, const std::string& content);

}  // namespace sllen
