/*
 * Copyright 2026 The lenctl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "lenctl/tensor.hpp"

#include <cmath>
#include <sstream>

#include "lenctl/common.hpp"

namespace lenctl {

namespace {
DType g_default_dtype = DType::kF64;
}

const char* dtype_name(DType dtype) {
  return dtype == DType::kF32 ? "f32" : "f64";
}

DType dtype_from_name(const std::string& name) {
  if (name == "f32") return DType::kF32;
  if (name == "f64") return DType::kF64;
  throw ConfigError("unknown dtype: " + name);
}

size_t dtype_size(DType dtype) {
  return dtype == DType::kF32 ? 4 : 8;
}

DType default_dtype() { return g_default_dtype; }

void set_default_dtype(DType dtype) { g_default_dtype = dtype; }

std::string shape_to_string(const std::vector<int64_t>& shape) {
  std::ostringstream out;
  out << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << ", ";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

Tensor::Tensor(std::vector<int64_t> shape, DType dtype)
    : shape_(std::move(shape)), dtype_(dtype) {
  if (shape_.size() > 2) {
    throw ShapeError("tensor rank above 2 is not supported: " +
                     shape_to_string(shape_));
  }
  int64_t n = 1;
  for (int64_t d : shape_) {
    if (d < 0) {
      throw ShapeError("negative dimension in shape " + shape_to_string(shape_));
    }
    n *= d;
  }
  data_.assign(static_cast<size_t>(n), 0.0);
}

Tensor Tensor::scalar(double value) {
  Tensor t{std::vector<int64_t>{}};
  t.data_[0] = value;
  t.quantize();
  return t;
}

Tensor Tensor::zeros(std::vector<int64_t> shape) {
  return Tensor{std::move(shape)};
}

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
  Tensor t{std::move(shape)};
  for (double& v : t.data_) v = value;
  t.quantize();
  return t;
}

Tensor Tensor::from_values(std::vector<int64_t> shape, std::vector<double> values) {
  Tensor t{std::move(shape)};
  if (values.size() != t.data_.size()) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + t.shape_string());
  }
  t.data_ = std::move(values);
  t.quantize();
  return t;
}

int64_t Tensor::numel() const { return static_cast<int64_t>(data_.size()); }

int64_t Tensor::rows() const {
  if (rank() == 2) return shape_[0];
  if (rank() == 1) return 1;
  throw ShapeError("rows() on tensor of shape " + shape_string());
}

int64_t Tensor::cols() const {
  if (rank() == 2) return shape_[1];
  if (rank() == 1) return shape_[0];
  throw ShapeError("cols() on tensor of shape " + shape_string());
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item() on non-scalar tensor of shape " + shape_string());
  }
  return data_[0];
}

void Tensor::quantize() {
  if (dtype_ != DType::kF32) return;
  for (double& v : data_) {
    v = static_cast<double>(static_cast<float>(v));
  }
}

Tensor Tensor::to_dtype(DType dtype) const {
  Tensor t = *this;
  t.dtype_ = dtype;
  t.quantize();
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool Tensor::operator==(const Tensor& other) const {
  return dtype_ == other.dtype_ && shape_ == other.shape_ && data_ == other.data_;
}

std::string Tensor::shape_string() const { return shape_to_string(shape_); }

size_t Tensor::check_index(int64_t i) const {
  if (i < 0 || i >= numel()) {
    throw ShapeError("flat index " + std::to_string(i) +
                     " out of range for shape " + shape_string());
  }
  return static_cast<size_t>(i);
}

size_t Tensor::check_index(int64_t r, int64_t c) const {
  if (rank() != 2) {
    throw ShapeError("2d index on tensor of shape " + shape_string());
  }
  if (r < 0 || r >= shape_[0] || c < 0 || c >= shape_[1]) {
    throw ShapeError("index (" + std::to_string(r) + ", " + std::to_string(c) +
                     ") out of range for shape " + shape_string());
  }
  return static_cast<size_t>(r * shape_[1] + c);
}

}  // namespace lenctl
