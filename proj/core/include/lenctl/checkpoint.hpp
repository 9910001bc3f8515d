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
#include <map>
#include <string>
#include <vector>

#include "lenctl/tensor.hpp"

namespace lenctl {

// Binary tensor container:
//
//   bytes 0..7   magic "LCTLCKPT"
//   bytes 8..11  format version, uint32 little endian
//   bytes 12..19 header length H, uint64 little endian
//   H bytes      JSON header: kind, meta (string map), tensor manifest
//                (name, dtype, shape, payload offset, byte count)
//   rest         raw tensor payloads, little endian, f32 or f64 per tensor
//
// Saving is atomic (temp file + rename). Loading validates the magic,
// version, header bounds and every manifest entry before touching payload
// bytes, so corrupt or truncated files fail with IoError instead of
// crashing. A load/save round trip preserves the file byte for byte.

struct CheckpointTensor {
  std::string name;
  Tensor value;
};

class Checkpoint {
 public:
  static constexpr uint32_t kVersion = 1;

  std::string kind = "model";
  std::map<std::string, std::string> meta;

  void add(const std::string& name, const Tensor& value);
  bool has(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
  const std::vector<CheckpointTensor>& tensors() const { return tensors_; }

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes,
                                const std::string& origin = "<memory>");

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  std::vector<CheckpointTensor> tensors_;
};

// Decimal encoding for meta values that must survive a round trip exactly.
std::string meta_encode_double(double v);
double meta_decode_double(const std::string& s);

}  // namespace lenctl
