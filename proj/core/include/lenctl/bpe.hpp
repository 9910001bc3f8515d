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

namespace lenctl {

// Byte-pair encoding over whitespace-separated words. The final character of
// a word carries an end-of-word marker, so "low" starts as l o w</w> and
// merges can never cross word boundaries.
//
// Token ids:
//   0 <s>   sequence start
//   1 </s>  sequence end
//   2 <pad> padding
//   3 <unk> unknown (characters never seen during learning)
//   4...    language tags (in registration order), then initial character
//           symbols (sorted), then one id per learned merge
//
// "Content" tokens are everything past the reserved ids and tags; length
// budgets count content tokens only.

constexpr int32_t kBosId = 0;
constexpr int32_t kEosId = 1;
constexpr int32_t kPadId = 2;
constexpr int32_t kUnkId = 3;
constexpr int32_t kNumReservedIds = 4;

class MergeTable {
 public:
  // Learns merges greedily by pair frequency; ties pick the pair whose
  // symbol strings compare lexicographically smallest. Learning stops early
  // if no pair occurs twice. Tags must look like <name> with name in
  // [a-z0-9_]+. The same lines, merge count and tags always produce the
  // same table.
  static MergeTable learn(const std::vector<std::string>& lines,
                          int64_t num_merges,
                          const std::vector<std::string>& tags = {});

  std::vector<int32_t> encode(const std::string& text) const;
  std::vector<int32_t> encode_word(const std::string& word) const;

  // Renders ids back to text. Reserved ids and tags produce nothing.
  std::string decode(const std::vector<int32_t>& ids) const;

  int64_t vocab_size() const { return static_cast<int64_t>(symbols_.size()); }
  int64_t merge_count() const { return static_cast<int64_t>(merges_.size()); }

  const std::vector<std::string>& tags() const { return tags_; }
  int32_t tag_id(const std::string& tag) const;
  std::vector<int32_t> tag_ids() const;

  static bool is_reserved(int32_t id) { return id >= 0 && id < kNumReservedIds; }
  bool is_tag(int32_t id) const;
  bool is_content(int32_t id) const;

  // Number of content tokens in a sequence: reserved ids and tags are free.
  int64_t content_count(const std::vector<int32_t>& ids) const;

  const std::string& symbol(int32_t id) const;
  // Pairs of symbol strings in merge priority order (highest first).
  struct Merge {
    std::string left, right, result;
  };
  const std::vector<Merge>& merges() const { return merges_; }

  std::string to_text() const;
  static MergeTable from_text(const std::string& text,
                              const std::string& origin = "<memory>");
  void save(const std::string& path) const;
  static MergeTable load(const std::string& path);

 private:
  struct MergeRule {
    int32_t left, right, result;
  };

  void assign_reserved();
  std::vector<int32_t> word_to_symbols(const std::string& word) const;
  std::vector<int32_t> apply_merges(std::vector<int32_t> symbols) const;

  std::vector<std::string> tags_;
  std::vector<std::string> symbols_;          // id -> rendered string
  std::map<std::string, int32_t> initial_ids_;  // character symbols only
  std::vector<Merge> merges_;
  std::vector<MergeRule> rules_;              // ordered like merges_
  int32_t first_content_id_ = kNumReservedIds;
};

}  // namespace lenctl
