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

#include "lenctl/bpe.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "lenctl/common.hpp"
#include "lenctl/fileio.hpp"

namespace lenctl {

namespace {

constexpr const char* kEndOfWord = "</w>";

bool valid_tag(const std::string& tag) {
  if (tag.size() < 3 || tag.front() != '<' || tag.back() != '>') return false;
  for (size_t i = 1; i + 1 < tag.size(); ++i) {
    char c = tag[i];
    bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    if (!ok) return false;
  }
  return true;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void MergeTable::assign_reserved() {
  symbols_ = {"<s>", "</s>", "<pad>", "<unk>"};
}

MergeTable MergeTable::learn(const std::vector<std::string>& lines,
                             int64_t num_merges,
                             const std::vector<std::string>& tags) {
  if (num_merges < 0) {
    throw ConfigError("negative merge count");
  }
  MergeTable t;
  t.assign_reserved();
  for (const std::string& tag : tags) {
    if (!valid_tag(tag)) {
      throw ConfigError("invalid tag '" + tag + "', expected <name> with [a-z0-9_]+");
    }
    for (const std::string& prev : t.tags_) {
      if (prev == tag) throw ConfigError("duplicate tag '" + tag + "'");
    }
    t.tags_.push_back(tag);
    t.symbols_.push_back(tag);
  }
  t.first_content_id_ = static_cast<int32_t>(t.symbols_.size());

  // Word frequencies; std::map keeps iteration deterministic.
  std::map<std::string, int64_t> word_freq;
  for (const std::string& line : lines) {
    for (const std::string& w : split_ws(line)) {
      ++word_freq[w];
    }
  }

  // Initial character symbols, sorted for stable id assignment.
  std::set<std::string> initial;
  for (const auto& [word, freq] : word_freq) {
    (void)freq;
    for (size_t i = 0; i < word.size(); ++i) {
      std::string sym(1, word[i]);
      if (i + 1 == word.size()) sym += kEndOfWord;
      initial.insert(sym);
    }
  }
  // string -> id over the content namespace (initials plus merge results).
  std::map<std::string, int32_t> content_ids;
  for (const std::string& sym : initial) {
    int32_t id = static_cast<int32_t>(t.symbols_.size());
    t.symbols_.push_back(sym);
    t.initial_ids_[sym] = id;
    content_ids[sym] = id;
  }

  std::vector<std::pair<std::vector<int32_t>, int64_t>> words;
  words.reserve(word_freq.size());
  for (const auto& [word, freq] : word_freq) {
    words.emplace_back(t.word_to_symbols(word), freq);
  }

  for (int64_t m = 0; m < num_merges; ++m) {
    std::map<std::pair<int32_t, int32_t>, int64_t> pair_freq;
    for (const auto& [syms, freq] : words) {
      for (size_t i = 0; i + 1 < syms.size(); ++i) {
        pair_freq[{syms[i], syms[i + 1]}] += freq;
      }
    }
    bool found = false;
    std::pair<int32_t, int32_t> best{};
    int64_t best_freq = 0;
    for (const auto& [pair, freq] : pair_freq) {
      if (freq < 2) continue;
      bool better = freq > best_freq;
      if (!better && freq == best_freq) {
        auto key = std::make_pair(t.symbols_[static_cast<size_t>(pair.first)],
                                  t.symbols_[static_cast<size_t>(pair.second)]);
        auto best_key = std::make_pair(t.symbols_[static_cast<size_t>(best.first)],
                                       t.symbols_[static_cast<size_t>(best.second)]);
        better = key < best_key;
      }
      if (better) {
        best = pair;
        best_freq = freq;
        found = true;
      }
    }
    if (!found) break;  // no pair occurs twice, further merges are pointless

    const std::string& left = t.symbols_[static_cast<size_t>(best.first)];
    const std::string& right = t.symbols_[static_cast<size_t>(best.second)];
    std::string result = left + right;
    int32_t result_id;
    auto it = content_ids.find(result);
    if (it != content_ids.end()) {
      result_id = it->second;  // same surface form reached twice
    } else {
      result_id = static_cast<int32_t>(t.symbols_.size());
      t.symbols_.push_back(result);
      content_ids[result] = result_id;
    }
    t.merges_.push_back({left, right, result});
    t.rules_.push_back({best.first, best.second, result_id});

    for (auto& [syms, freq] : words) {
      (void)freq;
      std::vector<int32_t> out;
      out.reserve(syms.size());
      size_t i = 0;
      while (i < syms.size()) {
        if (i + 1 < syms.size() && syms[i] == best.first && syms[i + 1] == best.second) {
          out.push_back(result_id);
          i += 2;
        } else {
          out.push_back(syms[i]);
          ++i;
        }
      }
      syms = std::move(out);
    }
  }
  return t;
}

std::vector<int32_t> MergeTable::word_to_symbols(const std::string& word) const {
  std::vector<int32_t> syms;
  syms.reserve(word.size());
  for (size_t i = 0; i < word.size(); ++i) {
    std::string sym(1, word[i]);
    if (i + 1 == word.size()) sym += kEndOfWord;
    auto it = initial_ids_.find(sym);
    syms.push_back(it == initial_ids_.end() ? kUnkId : it->second);
  }
  return syms;
}

std::vector<int32_t> MergeTable::apply_merges(std::vector<int32_t> symbols) const {
  // One left-to-right pass per rule, in learned priority order. A merged
  // symbol always postdates its two halves, so a later rule that consumes it
  // still finds it when its own pass runs.
  for (const MergeRule& rule : rules_) {
    bool hit = false;
    for (size_t i = 0; i + 1 < symbols.size(); ++i) {
      if (symbols[i] == rule.left && symbols[i + 1] == rule.right) {
        hit = true;
        break;
      }
    }
    if (!hit) continue;
    std::vector<int32_t> out;
    out.reserve(symbols.size());
    size_t i = 0;
    while (i < symbols.size()) {
      if (i + 1 < symbols.size() && symbols[i] == rule.left &&
          symbols[i + 1] == rule.right) {
        out.push_back(rule.result);
        i += 2;
      } else {
        out.push_back(symbols[i]);
        ++i;
      }
    }
    symbols = std::move(out);
  }
  return symbols;
}

std::vector<int32_t> MergeTable::encode_word(const std::string& word) const {
  return apply_merges(word_to_symbols(word));
}

std::vector<int32_t> MergeTable::encode(const std::string& text) const {
  std::vector<int32_t> out;
  for (const std::string& word : split_ws(text)) {
    std::vector<int32_t> ids = encode_word(word);
    out.insert(out.end(), ids.begin(), ids.end());
  }
  return out;
}

std::string MergeTable::decode(const std::vector<int32_t>& ids) const {
  std::vector<std::string> words;
  std::string current;
  for (int32_t id : ids) {
    if (id < 0 || id >= vocab_size()) {
      throw Error("token id " + std::to_string(id) + " outside vocabulary of size " +
                  std::to_string(vocab_size()));
    }
    if (is_reserved(id) || is_tag(id)) continue;
    current += symbols_[static_cast<size_t>(id)];
    if (ends_with(current, kEndOfWord)) {
      current.erase(current.size() - 4);
      words.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) {
    words.push_back(current);  // sequence cut off mid-word
  }
  return join(words, " ");
}

int32_t MergeTable::tag_id(const std::string& tag) const {
  for (size_t i = 0; i < tags_.size(); ++i) {
    if (tags_[i] == tag) return static_cast<int32_t>(kNumReservedIds + i);
  }
  throw Error("unknown tag '" + tag + "'");
}

std::vector<int32_t> MergeTable::tag_ids() const {
  std::vector<int32_t> out;
  for (size_t i = 0; i < tags_.size(); ++i) {
    out.push_back(static_cast<int32_t>(kNumReservedIds + i));
  }
  return out;
}

bool MergeTable::is_tag(int32_t id) const {
  return id >= kNumReservedIds && id < first_content_id_;
}

bool MergeTable::is_content(int32_t id) const {
  return id >= first_content_id_ && id < vocab_size();
}

int64_t MergeTable::content_count(const std::vector<int32_t>& ids) const {
  int64_t n = 0;
  for (int32_t id : ids) {
    if (is_content(id)) ++n;
  }
  return n;
}

const std::string& MergeTable::symbol(int32_t id) const {
  if (id < 0 || id >= vocab_size()) {
    throw Error("token id " + std::to_string(id) + " outside vocabulary of size " +
                std::to_string(vocab_size()));
  }
  return symbols_[static_cast<size_t>(id)];
}

std::string MergeTable::to_text() const {
  std::ostringstream out;
  out << "lenctl-bpe 1\n";
  out << "tags " << tags_.size() << "\n";
  for (const std::string& tag : tags_) out << tag << "\n";
  int64_t initial_count = static_cast<int64_t>(initial_ids_.size());
  out << "symbols " << initial_count << "\n";
  for (int64_t id = first_content_id_;
       id < first_content_id_ + initial_count; ++id) {
    out << symbols_[static_cast<size_t>(id)] << "\n";
  }
  out << "merges " << merges_.size() << "\n";
  for (const Merge& m : merges_) {
    out << m.left << " " << m.right << "\n";
  }
  return out.str();
}

MergeTable MergeTable::from_text(const std::string& text, const std::string& origin) {
  auto fail = [&](const std::string& why) {
    throw IoError("bad merge table (" + origin + "): " + why);
  };
  std::istringstream in(text);
  std::string line;
  auto next_line = [&]() -> std::string {
    if (!std::getline(in, line)) fail("unexpected end of file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  if (next_line() != "lenctl-bpe 1") fail("unknown format line");

  auto read_count = [&](const std::string& keyword) -> int64_t {
    std::istringstream ls(next_line());
    std::string word;
    int64_t n = -1;
    if (!(ls >> word >> n) || word != keyword || n < 0) {
      fail("expected '" + keyword + " <count>', got '" + line + "'");
    }
    return n;
  };

  MergeTable t;
  t.assign_reserved();
  int64_t n_tags = read_count("tags");
  for (int64_t i = 0; i < n_tags; ++i) {
    std::string tag = next_line();
    if (!valid_tag(tag)) fail("invalid tag '" + tag + "'");
    t.tags_.push_back(tag);
    t.symbols_.push_back(tag);
  }
  t.first_content_id_ = static_cast<int32_t>(t.symbols_.size());

  std::map<std::string, int32_t> content_ids;
  int64_t n_symbols = read_count("symbols");
  for (int64_t i = 0; i < n_symbols; ++i) {
    std::string sym = next_line();
    if (sym.empty()) fail("empty symbol");
    if (content_ids.count(sym)) fail("duplicate symbol '" + sym + "'");
    int32_t id = static_cast<int32_t>(t.symbols_.size());
    t.symbols_.push_back(sym);
    t.initial_ids_[sym] = id;
    content_ids[sym] = id;
  }

  int64_t n_merges = read_count("merges");
  for (int64_t i = 0; i < n_merges; ++i) {
    std::string merge_line = next_line();
    size_t space = merge_line.find(' ');
    if (space == std::string::npos || space == 0 || space + 1 >= merge_line.size()) {
      fail("merge line must be '<left> <right>', got '" + merge_line + "'");
    }
    std::string left = merge_line.substr(0, space);
    std::string right = merge_line.substr(space + 1);
    auto li = content_ids.find(left);
    auto ri = content_ids.find(right);
    if (li == content_ids.end() || ri == content_ids.end()) {
      fail("merge references unknown symbol in '" + merge_line + "'");
    }
    std::string result = left + right;
    int32_t result_id;
    auto it = content_ids.find(result);
    if (it != content_ids.end()) {
      result_id = it->second;
    } else {
      result_id = static_cast<int32_t>(t.symbols_.size());
      t.symbols_.push_back(result);
      content_ids[result] = result_id;
    }
    t.merges_.push_back({left, right, result});
    t.rules_.push_back({li->second, ri->second, result_id});
  }
  return t;
}

void MergeTable::save(const std::string& path) const {
  atomic_write_file(path, to_text());
}

MergeTable MergeTable::load(const std::string& path) {
  return from_text(read_file(path), path);
}

}  // namespace lenctl
