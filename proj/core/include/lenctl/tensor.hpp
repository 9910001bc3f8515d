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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lenctl {

enum class DType : uint8_t { kF32 = 0, kF64 = 1 };

const char* dtype_name(DType dtype);
DType dtype_from_name(const std::string& name);
size_t dtype_size(DType dtype);

// Process-wide numeric precision. Computation always runs in double; when the
// default dtype is kF32 every produced value is additionally rounded through
// float, so results match a genuine 32-bit pipeline bit for bit while the
// storage stays uniform.
DType default_dtype();
void set_default_dtype(DType dtype);

// Dense row-major tensor of rank 0 (scalar), 1 (vector) or 2 (matrix).
class Tensor {
 public:
  Tensor() : dtype_(default_dtype()) {}
  Tensor(std::vector<int64_t> shape, DType dtype);
  explicit Tensor(std::vector<int64_t> shape) : Tensor(std::move(shape), default_dtype()) {}

  static Tensor scalar(double value);
  static Tensor zeros(std::vector<int64_t> shape);
  static Tensor full(std::vector<int64_t> shape, double value);
  static Tensor from_values(std::vector<int64_t> shape, std::vector<double> values);

  const std::vector<int64_t>& shape() const { return shape_; }
  DType dtype() const { return dtype_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t numel() const;

  // Rank-2 accessors; rows()/cols() also accept rank 1 ([n] acts as [1, n]).
  int64_t rows() const;
  int64_t cols() const;

  double& at(int64_t i) { return data_[check_index(i)]; }
  double at(int64_t i) const { return data_[check_index(i)]; }
  double& at(int64_t r, int64_t c) { return data_[check_index(r, c)]; }
  double at(int64_t r, int64_t c) const { return data_[check_index(r, c)]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double item() const;

  // Rounds every element through float when dtype is kF32; no-op for kF64.
  void quantize();
  Tensor to_dtype(DType dtype) const;

  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // Exact elementwise equality (shape, dtype and bits).
  bool operator==(const Tensor& other) const;
  bool operator!=(const Tensor& other) const { return !(*this == other); }

  std::string shape_string() const;

 private:
  size_t check_index(int64_t i) const;
  size_t check_index(int64_t r, int64_t c) const;

  std::vector<int64_t> shape_;
  std::vector<double> data_;
  DType dtype_;
};

std::string shape_to_string(const std::vector<int64_t>& shape);

}  // namespace lenctl
