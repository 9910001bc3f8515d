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

#include "lenctl/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

#include <json.hpp>

#include "lenctl/common.hpp"
#include "lenctl/fileio.hpp"

namespace lenctl {

namespace {

constexpr char kMagic[8] = {'L', 'C', 'T', 'L', 'C', 'K', 'P', 'T'};

void append_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void append_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

uint32_t read_u32(const std::string& s, size_t pos) {
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) {
    v = (v << 8) | static_cast<uint8_t>(s[pos + static_cast<size_t>(i)]);
  }
  return v;
}

uint64_t read_u64(const std::string& s, size_t pos) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) {
    v = (v << 8) | static_cast<uint8_t>(s[pos + static_cast<size_t>(i)]);
  }
  return v;
}

void append_tensor_payload(std::string& out, const Tensor& t) {
  if (t.dtype() == DType::kF32) {
    for (double d : t.values()) {
      float f = static_cast<float>(d);
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      append_u32(out, bits);
    }
  } else {
    for (double d : t.values()) {
      uint64_t bits;
      std::memcpy(&bits, &d, 8);
      append_u64(out, bits);
    }
  }
}

}  // namespace

void Checkpoint::add(const std::string& name, const Tensor& value) {
  if (has(name)) {
    throw Error("duplicate tensor in checkpoint: " + name);
  }
  tensors_.push_back({name, value});
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return true;
  }
  return false;
}

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t.value;
  }
  throw IoError("checkpoint has no tensor named '" + name + "'");
}

std::string Checkpoint::serialize() const {
  nlohmann::json manifest = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& t : tensors_) {
    uint64_t bytes =
        static_cast<uint64_t>(t.value.numel()) * dtype_size(t.value.dtype());
    nlohmann::json entry;
    entry["name"] = t.name;
    entry["dtype"] = dtype_name(t.value.dtype());
    entry["shape"] = t.value.shape();
    entry["offset"] = offset;
    entry["bytes"] = bytes;
    manifest.push_back(entry);
    offset += bytes;
  }
  nlohmann::json header;
  header["format"] = "lenctl-checkpoint";
  header["kind"] = kind;
  header["meta"] = meta;
  header["tensors"] = manifest;
  std::string header_text = header.dump();

  std::string out;
  out.reserve(20 + header_text.size() + offset);
  out.append(kMagic, sizeof(kMagic));
  append_u32(out, kVersion);
  append_u64(out, header_text.size());
  out += header_text;
  for (const auto& t : tensors_) {
    append_tensor_payload(out, t.value);
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes,
                                   const std::string& origin) {
  auto fail = [&](const std::string& why) -> void {
    throw IoError("bad checkpoint (" + origin + "): " + why);
  };
  if (bytes.size() < 20) fail("file shorter than fixed header");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    fail("magic bytes do not match");
  }
  uint32_t version = read_u32(bytes, 8);
  if (version != kVersion) {
    fail("unsupported version " + std::to_string(version));
  }
  uint64_t header_len = read_u64(bytes, 12);
  if (header_len > bytes.size() - 20) fail("header length exceeds file size");
  size_t payload_start = 20 + static_cast<size_t>(header_len);
  size_t payload_size = bytes.size() - payload_start;

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(20, static_cast<size_t>(header_len)));
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("header is not valid JSON: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.kind = header.at("kind").get<std::string>();
    ckpt.meta = header.at("meta").get<std::map<std::string, std::string>>();
    for (const auto& entry : header.at("tensors")) {
      std::string name = entry.at("name").get<std::string>();
      DType dtype = dtype_from_name(entry.at("dtype").get<std::string>());
      std::vector<int64_t> shape = entry.at("shape").get<std::vector<int64_t>>();
      uint64_t offset = entry.at("offset").get<uint64_t>();
      uint64_t nbytes = entry.at("bytes").get<uint64_t>();

      Tensor t(shape, dtype);
      uint64_t expect = static_cast<uint64_t>(t.numel()) * dtype_size(dtype);
      if (nbytes != expect) {
        fail("tensor '" + name + "' byte count does not match its shape");
      }
      if (offset + nbytes > payload_size || offset + nbytes < offset) {
        fail("tensor '" + name + "' payload out of bounds");
      }
      size_t pos = payload_start + static_cast<size_t>(offset);
      if (dtype == DType::kF32) {
        for (int64_t i = 0; i < t.numel(); ++i) {
          uint32_t bits = read_u32(bytes, pos + static_cast<size_t>(i) * 4);
          float f;
          std::memcpy(&f, &bits, 4);
          t.values()[static_cast<size_t>(i)] = static_cast<double>(f);
        }
      } else {
        for (int64_t i = 0; i < t.numel(); ++i) {
          uint64_t bits = read_u64(bytes, pos + static_cast<size_t>(i) * 8);
          double d;
          std::memcpy(&d, &bits, 8);
          t.values()[static_cast<size_t>(i)] = d;
        }
      }
      ckpt.tensors_.push_back({std::move(name), std::move(t)});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("header field missing or mistyped: ") + e.what());
  }
  return ckpt;
}

void Checkpoint::save(const std::string& path) const {
  atomic_write_file(path, serialize());
}

Checkpoint Checkpoint::load(const std::string& path) {
  return deserialize(read_file(path), path);
}

std::string meta_encode_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double meta_decode_double(const std::string& s) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw IoError("not a decimal number: '" + s + "'");
  }
  return v;
}

}  // namespace lenctl
