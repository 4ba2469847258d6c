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

#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "sllen/common.hpp"
#include "sllen/serialize.hpp"

using namespace sllen;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
  fs::path dir = fs::temp_directory_path() / "sllen_ser";
  fs::create_directories(dir);
  return dir / name;
}

Tensor filled(const std::vector<int>& shape, uint64_t seed) {
  Tensor t(shape);
  Rng rng(seed);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-3.0, 3.0);
  return t;
}

}  // namespace

TEST_CASE("block container round trip") {
  fs::path path = temp_file("roundtrip.bin");
  Tensor w = filled({2, 3, 3, 3}, 1);
  Tensor b = filled({2}, 2);
  Tensor m = filled({2, 3, 3, 3}, 3);

  BlockWriter writer;
  writer.set_header("{\"purpose\":\"test\",\"step\":12}");
  writer.add("conv.w", w);              // f32 block
  writer.add("conv.b", b);              // f32 block
  writer.add("adam.m.conv.w", m, true); // f64 block
  writer.write(path.string());

  BlockFile file = read_blocks(path.string());
  CHECK(file.header.find("\"step\":12") != std::string::npos);
  REQUIRE(file.blocks.size() == 3);
  CHECK(file.blocks[0].name == "conv.w");
  CHECK_FALSE(file.blocks[0].f64);
  CHECK(file.blocks[2].f64);

  // f32 blocks come back at float precision, f64 blocks bitwise.
  const Block* cw = file.find("conv.w");
  REQUIRE(cw != nullptr);
  CHECK(cw->tensor.rank() == 4);
  for (int64_t i = 0; i < w.numel(); ++i)
    CHECK(cw->tensor[i] == static_cast<double>(static_cast<float>(w[i])));
  const Block* am = file.find("adam.m.conv.w");
  REQUIRE(am != nullptr);
  CHECK(max_abs_diff(am->tensor, m) == 0.0);

  CHECK(file.find("nothing.here") == nullptr);
  fs::remove(path);
}

TEST_CASE("expect enforces presence and shape") {
  fs::path path = temp_file("expect.bin");
  BlockWriter writer;
  writer.add("w", filled({4, 2}, 9));
  writer.write(path.string());

  BlockFile file = read_blocks(path.string());
  CHECK(file.expect("w", {4, 2}).numel() == 8);
  try {
    file.expect("w", {2, 4});
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Err::WeightLoadError);
  }
  try {
    file.expect("missing", {1});
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Err::WeightLoadError);
  }
  fs::remove(path);
}

TEST_CASE("corrupted containers are rejected") {
  fs::path path = temp_file("corrupt.bin");
  BlockWriter writer;
  writer.set_header("{}");
  writer.add("w", filled({8, 8}, 5));
  writer.write(path.string());

  // Truncate the data section.
  {
    auto size = fs::file_size(path);
    fs::resize_file(path, size - 64);
    CHECK_THROWS_AS(read_blocks(path.string()), Error);
  }

  // Break the magic line.
  {
    std::ofstream out(path.string(), std::ios::binary | std::ios::trunc);
    out << "NOTMAGIC 1\ndata\n";
  }
  try {
    read_blocks(path.string());
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Err::WeightLoadError);
  }

  CHECK_THROWS_AS(read_blocks((temp_file("absent.bin")).string()), Error);
  fs::remove(path);
}

TEST_CASE("atomic text writes replace content wholesale") {
  fs::path path = temp_file("atomic.txt");
  write_text_atomic(path.string(), "first\n");
  write_text_atomic(path.string(), "second line\nmore\n");
  std::ifstream in(path.string());
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(all == "second line\nmore\n");
  CHECK_FALSE(fs::exists(path.string() + ".tmp"));
  fs::remove(path);
}
