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

#include "sllen/serialize.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace sllen {

void BlockWriter::add(const std::string& name, const Tensor& t, bool f64) {
  if (name.empty() || name.find(' ') != std::string::npos ||
      name.find('\n') != std::string::npos)
    raise(Err::InvalidParam, "block name must be non-empty and free of whitespace: '" + name + "'");
  for (const Block& b : blocks_)
    if (b.name == name) raise(Err::InvalidParam, "duplicate block name: " + name);
  blocks_.push_back(Block{name, f64, t});
}

void BlockWriter::write(const std::string& path) const {
  if (header_.find('\n') != std::string::npos)
    raise(Err::InvalidParam, "header must be a single line");
  std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) raise(Err::IoError, "cannot open " + tmp);
    f << "SLLENBLK 1\n";
    f << "header " << header_ << "\n";
    for (const Block& b : blocks_) {
      f << "block " << b.name << " " << (b.f64 ? "f64" : "f32") << " "
        << b.tensor.rank();
      for (int d : b.tensor.shape()) f << " " << d;
      f << "\n";
    }
    f << "data\n";
    for (const Block& b : blocks_) {
      if (b.f64) {
        f.write(reinterpret_cast<const char*>(b.tensor.data()),
                static_cast<std::streamsize>(sizeof(double) * b.tensor.numel()));
      } else {
        std::vector<float> buf(static_cast<size_t>(b.tensor.numel()));
        for (int64_t i = 0; i < b.tensor.numel(); ++i)
          buf[static_cast<size_t>(i)] = static_cast<float>(b.tensor[i]);
        f.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(sizeof(float) * buf.size()));
      }
    }
    if (!f) raise(Err::IoError, "short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) raise(Err::IoError, "failed to move " + tmp + " to " + path);
}

const Block* BlockFile::find(const std::string& name) const {
  for (const Block& b : blocks)
    if (b.name == name) return &b;
  return nullptr;
}

const Tensor& BlockFile::expect(const std::string& name, const std::vector<int>& shape) const {
  const Block* b = find(name);
  if (!b) raise(Err::WeightLoadError, "missing block '" + name + "'");
  if (b->tensor.shape() != shape)
    raise(Err::WeightLoadError, "block '" + name + "' has shape " +
                                    shape_str(b->tensor.shape()) + ", expected " +
                                    shape_str(shape));
  return b->tensor;
}

BlockFile read_blocks(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) raise(Err::FileNotFound, path);
  std::string line;
  if (!std::getline(f, line) || line != "SLLENBLK 1")
    raise(Err::WeightLoadError, path + ": not a weight file (bad magic)");

  BlockFile out;
  struct Pending {
    std::string name;
    bool f64;
    std::vector<int> shape;
  };
  std::vector<Pending> pending;
  bool saw_data = false;
  while (std::getline(f, line)) {
    if (line == "data") {
      saw_data = true;
      break;
    }
    std::istringstream ss(line);
    std::string kind;
    ss >> kind;
    if (kind == "header") {
      size_t pos = line.find(' ');
      out.header = pos == std::string::npos ? "{}" : line.substr(pos + 1);
    } else if (kind == "block") {
      Pending pb;
      std::string dtype;
      int ndim = 0;
      ss >> pb.name >> dtype >> ndim;
      if (!ss || (dtype != "f32" && dtype != "f64") || ndim < 0 || ndim > 8)
        raise(Err::WeightLoadError, path + ": malformed manifest line: " + line);
      pb.f64 = dtype == "f64";
      for (int i = 0; i < ndim; ++i) {
        int d = 0;
        ss >> d;
        if (!ss || d <= 0)
          raise(Err::WeightLoadError, path + ": malformed manifest line: " + line);
        pb.shape.push_back(d);
      }
      pending.push_back(std::move(pb));
    } else {
      raise(Err::WeightLoadError, path + ": unexpected manifest line: " + line);
    }
  }
  if (!saw_data) raise(Err::WeightLoadError, path + ": missing data section");

  for (const Pending& pb : pending) {
    Tensor t(pb.shape);
    if (pb.f64) {
      f.read(reinterpret_cast<char*>(t.data()),
             static_cast<std::streamsize>(sizeof(double) * t.numel()));
    } else {
      std::vector<float> buf(static_cast<size_t>(t.numel()));
      f.read(reinterpret_cast<char*>(buf.data()),
             static_cast<std::streamsize>(sizeof(float) * buf.size()));
      for (int64_t i = 0; i < t.numel(); ++i) t[i] = buf[static_cast<size_t>(i)];
    }
    if (!f) raise(Err::WeightLoadError, path + ": truncated data for block '" + pb.name + "'");
    out.blocks.push_back(Block{pb.name, pb.f64, std::move(t)});
  }
  return out;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) raise(Err::IoError, "cannot open " + tmp);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) raise(Err::IoError, "short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) raise(Err::IoError, "failed to move " + tmp + " to " + path);
}

}  // namespace sllen
