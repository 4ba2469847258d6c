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

#include "sllen/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace sllen {

const char* err_name(Err e) {
  switch (e) {
    case Err::FileNotFound: return "FileNotFound";
    case Err::UnsupportedFormat: return "UnsupportedFormat";
    case Err::CorruptImage: return "CorruptImage";
    case Err::IoError: return "IoError";
    case Err::DegenerateShape: return "DegenerateShape";
    case Err::ShapeMismatch: return "ShapeMismatch";
    case Err::EmptyDataset: return "EmptyDataset";
    case Err::InvalidParam: return "InvalidParam";
    case Err::PatchLargerThanImage: return "PatchLargerThanImage";
    case Err::WeightLoadError: return "WeightLoadError";
    case Err::ConfigError: return "ConfigError";
    case Err::TokenBudgetExceeded: return "TokenBudgetExceeded";
    case Err::LabelOutOfRange: return "LabelOutOfRange";
    case Err::LengthMismatch: return "LengthMismatch";
    case Err::NoReference: return "NoReference";
    case Err::NonFiniteLoss: return "NonFiniteLoss";
    case Err::ImageTooSmall: return "ImageTooSmall";
    case Err::Internal: return "Internal";
  }
  return "Internal";
}

int thread_cap() {
  if (const char* env = std::getenv("SLLEN_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  int64_t n = 1;
  for (int d : shape_) {
    if (d <= 0) raise(Err::DegenerateShape, "tensor dim must be positive, got " + shape_str(shape_));
    n *= d;
  }
  data_.assign(static_cast<size_t>(n), 0.0);
}

Tensor Tensor::full(std::vector<int> shape, double v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  Tensor t(std::move(shape));
  if (static_cast<int64_t>(values.size()) != t.numel())
    raise(Err::LengthMismatch, "value count " + std::to_string(values.size()) +
                                   " does not fill shape " + shape_str(t.shape()));
  t.data_ = std::move(values);
  return t;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

double Tensor::min_value() const {
  return *std::min_element(data_.begin(), data_.end());
}

double Tensor::max_value() const {
  return *std::max_element(data_.begin(), data_.end());
}

double Tensor::mean_value() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return data_.empty() ? 0.0 : s / static_cast<double>(data_.size());
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    raise(Err::ShapeMismatch, "max_abs_diff " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  double m = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace sllen
