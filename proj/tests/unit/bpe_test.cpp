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

#include <algorithm>
#include <string>
#include <vector>

#include <doctest.h>

#include "lenctl/bpe.hpp"
#include "lenctl/common.hpp"
#include "testutil.hpp"

using namespace lenctl;

namespace {

const std::vector<std::string> kLines = {
    "low low low low low",
    "lower lower newer newer newer newer",
    "newest newest newest",
    "wider wider",
};

}  // namespace

TEST_CASE("reserved ids sit below everything else") {
  MergeTable t = MergeTable::learn(kLines, 10);
  CHECK(kBosId == 0);
  CHECK(kEosId == 1);
  CHECK(kPadId == 2);
  CHECK(kUnkId == 3);
  CHECK(MergeTable::is_reserved(kPadId));
  CHECK_FALSE(MergeTable::is_reserved(kNumReservedIds));
  CHECK(t.vocab_size() > kNumReservedIds);
}

TEST_CASE("encode then decode returns the original text") {
  MergeTable t = MergeTable::learn(kLines, 50);
  for (const std::string& line : kLines) {
    std::vector<int32_t> ids = t.encode(line);
    CHECK_FALSE(ids.empty());
    for (int32_t id : ids) CHECK(t.is_content(id));
    CHECK(t.decode(ids) == line);
  }
}

TEST_CASE("merge count is monotone in the merge budget") {
  MergeTable small = MergeTable::learn(kLines, 2);
  MergeTable big = MergeTable::learn(kLines, 20);
  CHECK(small.merge_count() == 2);
  CHECK(big.merge_count() >= small.merge_count());
  // More merges never produce longer encodings.
  for (const std::string& line : kLines) {
    CHECK(big.encode(line).size() <= small.encode(line).size());
  }
}

TEST_CASE("learning saturates when no pair repeats") {
  // Every word appears once; after enough merges nothing occurs twice.
  MergeTable t = MergeTable::learn({"abc def", "ghi jkl"}, 1000);
  CHECK(t.merge_count() < 1000);
  CHECK(t.decode(t.encode("abc def")) == "abc def");
}

TEST_CASE("learning is deterministic") {
  MergeTable a = MergeTable::learn(kLines, 30);
  MergeTable b = MergeTable::learn(kLines, 30);
  CHECK(a.to_text() == b.to_text());
}

TEST_CASE("unknown characters map to the unk id") {
  MergeTable t = MergeTable::learn(kLines, 10);
  std::vector<int32_t> ids = t.encode("low zebra#");
  CHECK(std::count(ids.begin(), ids.end(), kUnkId) > 0);
}

TEST_CASE("tags get dedicated ids right after the reserved block") {
  MergeTable t = MergeTable::learn(kLines, 10, {"<de>", "<fr>"});
  CHECK(t.tags().size() == 2);
  CHECK(t.tag_id("<de>") == kNumReservedIds);
  CHECK(t.tag_id("<fr>") == kNumReservedIds + 1);
  CHECK(t.is_tag(t.tag_id("<de>")));
  CHECK_FALSE(t.is_content(t.tag_id("<de>")));
  CHECK_THROWS_AS(t.tag_id("<es>"), Error);
  std::vector<int32_t> ids = t.tag_ids();
  REQUIRE(ids.size() == 2);
  CHECK(ids[0] == t.tag_id("<de>"));
}

TEST_CASE("malformed tags are rejected") {
  CHECK_THROWS_AS(MergeTable::learn(kLines, 5, {"de"}), Error);
  CHECK_THROWS_AS(MergeTable::learn(kLines, 5, {"<DE>"}), Error);
  CHECK_THROWS_AS(MergeTable::learn(kLines, 5, {"<>"}), Error);
}

TEST_CASE("content counting ignores reserved ids and tags") {
  MergeTable t = MergeTable::learn(kLines, 10, {"<de>"});
  std::vector<int32_t> ids = t.encode("low newer");
  int64_t content = t.content_count(ids);
  CHECK(content == static_cast<int64_t>(ids.size()));
  ids.insert(ids.begin(), t.tag_id("<de>"));
  ids.insert(ids.begin(), kBosId);
  ids.push_back(kEosId);
  CHECK(t.content_count(ids) == content);
}

TEST_CASE("decode drops reserved ids and tags") {
  MergeTable t = MergeTable::learn(kLines, 10, {"<de>"});
  std::vector<int32_t> ids = t.encode("low");
  ids.insert(ids.begin(), t.tag_id("<de>"));
  ids.insert(ids.begin(), kBosId);
  ids.push_back(kEosId);
  CHECK(t.decode(ids) == "low");
}

TEST_CASE("text round trip preserves the table exactly") {
  MergeTable t = MergeTable::learn(kLines, 30, {"<de>", "<fr>"});
  std::string text = t.to_text();
  MergeTable back = MergeTable::from_text(text);
  CHECK(back.to_text() == text);
  CHECK(back.vocab_size() == t.vocab_size());
  CHECK(back.merge_count() == t.merge_count());
  for (const std::string& line : kLines) {
    CHECK(back.encode(line) == t.encode(line));
  }
}

TEST_CASE("file round trip preserves the table") {
  testutil::TempDir dir("bpe");
  MergeTable t = MergeTable::learn(kLines, 15);
  std::string path = dir.file("merges.txt");
  t.save(path);
  MergeTable back = MergeTable::load(path);
  CHECK(back.to_text() == t.to_text());
}

TEST_CASE("garbage table text is rejected with the origin named") {
  try {
    MergeTable::from_text("not a merge table at all\n\x01\x02", "bad.txt");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("bad.txt") != std::string::npos);
  }
}

TEST_CASE("merges never cross word boundaries") {
  // "ab ab" repeats the pair (a,b) inside words; the space itself can never
  // be merged, so every encoding concatenates per-word encodings.
  MergeTable t = MergeTable::learn({"ab ab ab ab", "ab cd"}, 50);
  std::vector<int32_t> one = t.encode("ab");
  std::vector<int32_t> two = t.encode("ab ab");
  REQUIRE(two.size() == 2 * one.size());
  for (size_t i = 0; i < one.size(); ++i) {
    CHECK(two[i] == one[i]);
    CHECK(two[i + one.size()] == one[i]);
  }
}

TEST_CASE("empty input encodes to nothing") {
  MergeTable t = MergeTable::learn(kLines, 5);
  CHECK(t.encode("").empty());
  CHECK(t.encode("   ").empty());
  CHECK(t.decode({}) == "");
}

TEST_CASE("symbol lookup matches ids") {
  MergeTable t = MergeTable::learn(kLines, 5, {"<de>"});
  CHECK(t.symbol(kBosId) == "<s>");
  CHECK(t.symbol(kEosId) == "</s>");
  CHECK(t.symbol(t.tag_id("<de>")) == "<de>");
  CHECK_THROWS_AS(t.symbol(static_cast<int32_t>(t.vocab_size())), Error);
}
