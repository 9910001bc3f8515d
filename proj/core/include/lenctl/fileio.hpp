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

// Reads a whole file into a string. Throws IoError on failure.
std::string read_file(const std::string& path);

// Reads a text file and splits it into lines. A trailing newline does not
// produce an empty final line. "\r\n" endings are normalized.
std::vector<std::string> read_lines(const std::string& path);

// Writes a file atomically: the content goes to "<path>.tmp.<pid>" first and
// is renamed into place, so readers never observe a partially written file.
void atomic_write_file(const std::string& path, const std::string& content);

bool file_exists(const std::string& path);

// Standard base64 with padding.
std::string base64_encode(const uint8_t* data, size_t len);
std::vector<uint8_t> base64_decode(const std::string& text);

// Escapes tab, newline, carriage return and backslash so a string can be
// stored in one TSV field. unescape_tsv_field inverts it.
std::string escape_tsv_field(const std::string& s);
std::string unescape_tsv_field(const std::string& s);

std::vector<std::string> split_ws(const std::string& s);
std::string to_lower(const std::string& s);
std::string join(const std::vector<std::string>& parts, const std::string& sep);

// Fixed-format float rendering for report files (never locale dependent).
std::string format_double(double v, int digits);

}  // namespace lenctl
