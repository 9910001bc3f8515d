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
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <doctest.h>

#include "lenctl/common.hpp"
#include "lenctl/data.hpp"
#include "lenctl/fileio.hpp"
#include "testutil.hpp"

using namespace lenctl;

namespace {

SynthSpec base_spec() {
  SynthSpec spec;
  spec.vocab_size = 20;
  spec.feature_dim = 6;
  spec.frames_per_token = 3;
  spec.noise_sigma = 0.05;
  spec.min_tokens = 4;
  spec.max_tokens = 10;
  spec.train_size = 30;
  spec.dev_size = 5;
  spec.test_size = 5;
  return spec;
}

// Squared distance between a feature row (or row average) and a prototype.
double distance_sq(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

}  // namespace

TEST_CASE("task descriptions round trip through their JSON form") {
  SynthSpec spec = base_spec();
  spec.filler_rate = 0.25;
  spec.paraphrase_rule_count = 2;
  spec.tags = {"<aa>", "<bb>"};
  SynthSpec back = synth_spec_from_json(synth_spec_to_json(spec));
  CHECK(back.vocab_size == spec.vocab_size);
  CHECK(back.feature_dim == spec.feature_dim);
  CHECK(back.frames_per_token == spec.frames_per_token);
  CHECK(back.noise_sigma == spec.noise_sigma);
  CHECK(back.filler_rate == spec.filler_rate);
  CHECK(back.paraphrase_rule_count == spec.paraphrase_rule_count);
  CHECK(back.min_tokens == spec.min_tokens);
  CHECK(back.max_tokens == spec.max_tokens);
  CHECK(back.train_size == spec.train_size);
  CHECK(back.tags == spec.tags);
}

TEST_CASE("unknown keys in a task description are refused by name") {
  try {
    synth_spec_from_json(R"({"vocab_size": 10, "frames_per_word": 3,
                             "train_size": 4})",
                         "task.json");
    FAIL("expected the stray key to be rejected");
  } catch (const IoError& e) {
    std::string what = e.what();
    CHECK(what.find("frames_per_word") != std::string::npos);
    CHECK(what.find("task.json") != std::string::npos);
  }
  CHECK_THROWS_AS(synth_spec_from_json("{not json"), IoError);
  // Wrong value types surface as parse failures, not silent defaults.
  CHECK_THROWS_AS(synth_spec_from_json(R"({"vocab_size": "many", "train_size": 1})"),
                  IoError);
}

TEST_CASE("task validation catches inconsistent settings") {
  SynthSpec spec = base_spec();
  spec.vocab_size = 1;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = base_spec();
  spec.filler_rate = 1.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = base_spec();
  spec.filler_rate = 0.3;
  spec.filler_vocab_size = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = base_spec();
  spec.paraphrase_rule_count = 6;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = base_spec();
  spec.min_tokens = 8;
  spec.max_tokens = 4;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = base_spec();
  spec.train_size = 0;
  spec.dev_size = 0;
  spec.test_size = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = base_spec();
  spec.tags = {"<aa>"};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = base_spec();
  spec.tags = {"aa", "<bb>"};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("wordlists are fixed, prefixed and disjoint") {
  SynthSpec spec = base_spec();
  spec.filler_vocab_size = 4;
  std::vector<std::string> content = content_vocab(spec);
  std::vector<std::string> fillers = filler_vocab(spec);
  REQUIRE(content.size() == 20);
  REQUIRE(fillers.size() == 4);
  CHECK(content.front() == "w000");
  CHECK(content.back() == "w019");
  CHECK(fillers.front() == "uh000");
  std::set<std::string> all(content.begin(), content.end());
  for (const std::string& f : fillers) CHECK(all.insert(f).second);

  std::vector<std::string> aa = tag_vocab(spec, "<aa>");
  std::vector<std::string> bb = tag_vocab(spec, "<bb>");
  REQUIRE(aa.size() == 20);
  CHECK(aa.front() == "aa000");
  CHECK(bb.front() == "bb000");
  for (size_t i = 0; i < aa.size(); ++i) CHECK(aa[i] != bb[i]);
  CHECK_THROWS_AS(tag_vocab(spec, "aa"), ConfigError);
}

TEST_CASE("word prototypes are a pure function of seed and word") {
  SynthSpec spec = base_spec();
  std::vector<double> a = token_prototype(spec, "w003", 9);
  std::vector<double> b = token_prototype(spec, "w003", 9);
  std::vector<double> c = token_prototype(spec, "w004", 9);
  std::vector<double> d = token_prototype(spec, "w003", 10);
  REQUIRE(a.size() == static_cast<size_t>(spec.feature_dim));
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a != d);
}

TEST_CASE("rewrite rules are distinct bigrams with fresh replacements") {
  SynthSpec spec = base_spec();
  spec.paraphrase_rule_count = 5;
  std::vector<ParaphraseRule> rules = paraphrase_rules_for(spec, 3);
  REQUIRE(rules.size() == 5);
  std::set<std::pair<std::string, std::string>> bigrams;
  std::vector<std::string> content = content_vocab(spec);
  for (const ParaphraseRule& r : rules) {
    CHECK(r.first != r.second);
    CHECK(bigrams.insert({r.first, r.second}).second);
    CHECK(std::count(content.begin(), content.end(), r.first) == 1);
    CHECK(std::count(content.begin(), content.end(), r.replacement) == 0);
    CHECK(r.replacement.substr(0, 1) == "p");
  }
  // Pure in (spec, seed).
  std::vector<ParaphraseRule> again = paraphrase_rules_for(spec, 3);
  for (size_t i = 0; i < rules.size(); ++i) {
    CHECK(rules[i].replacement == again[i].replacement);
    CHECK(rules[i].first == again[i].first);
  }
  spec.paraphrase_rule_count = 0;
  CHECK(paraphrase_rules_for(spec, 3).empty());
}

TEST_CASE("synthesis is deterministic down to the serialized byte") {
  SynthSpec spec = base_spec();
  spec.filler_rate = 0.3;
  SynthCorpora a = synth_transcription(spec, 42);
  SynthCorpora b = synth_transcription(spec, 42);
  CHECK(corpus_to_jsonl(a.train) == corpus_to_jsonl(b.train));
  CHECK(corpus_to_jsonl(a.dev) == corpus_to_jsonl(b.dev));
  SynthCorpora c = synth_transcription(spec, 43);
  CHECK(corpus_to_jsonl(a.train) != corpus_to_jsonl(c.train));
}

TEST_CASE("synthesized splits have the requested shape") {
  SynthSpec spec = base_spec();
  spec.filler_rate = 0.3;
  SynthCorpora corpora = synth_transcription(spec, 7);
  CHECK(corpora.train.size() == 30);
  CHECK(corpora.dev.size() == 5);
  CHECK(corpora.test.size() == 5);
  CHECK(corpora.train.front().id == "tr-train-000000");
  CHECK(corpora.test.back().id == "tr-test-000004");

  std::vector<std::string> content = content_vocab(spec);
  std::set<std::string> content_set(content.begin(), content.end());
  for (const Utterance& u : corpora.train) {
    std::vector<std::string> words = split_ws(u.verbatim);
    int64_t n = static_cast<int64_t>(words.size());
    CHECK(n >= spec.min_tokens);
    CHECK(n <= spec.max_tokens);
    CHECK(u.features.shape()[0] == n * spec.frames_per_token);
    CHECK(u.features.shape()[1] == spec.feature_dim);
    CHECK(u.features.dtype() == DType::kF32);
    CHECK(!u.has_compressed());
    CHECK(!u.has_tags());
    // Never a pure-filler utterance; transcripts must say something.
    bool any_content = false;
    for (const std::string& w : words) {
      if (content_set.count(w)) any_content = true;
    }
    CHECK(any_content);
  }

  SynthSpec tagged = base_spec();
  tagged.tags = {"<aa>", "<bb>"};
  CHECK_THROWS_AS(synth_transcription(tagged, 7), ConfigError);
}

TEST_CASE("filler density tracks the requested rate") {
  SynthSpec spec = base_spec();
  spec.filler_rate = 0.4;
  spec.filler_vocab_size = 4;
  spec.min_tokens = 8;
  spec.max_tokens = 16;
  spec.train_size = 100;
  SynthCorpora corpora = synth_transcription(spec, 5);
  std::vector<std::string> fillers = filler_vocab(spec);
  std::set<std::string> filler_set(fillers.begin(), fillers.end());
  int64_t total = 0, filler_count = 0;
  for (const Utterance& u : corpora.train) {
    for (const std::string& w : split_ws(u.verbatim)) {
      ++total;
      if (filler_set.count(w)) ++filler_count;
    }
  }
  double rate = static_cast<double>(filler_count) / static_cast<double>(total);
  CHECK(rate > 0.3);
  CHECK(rate < 0.5);
}

TEST_CASE("feature frames decode back to their words by nearest prototype") {
  SynthSpec spec = base_spec();
  spec.noise_sigma = 0.01;
  spec.filler_rate = 0.3;
  spec.filler_vocab_size = 3;
  spec.train_size = 10;
  spec.dev_size = 0;
  spec.test_size = 0;
  uint64_t seed = 13;
  SynthCorpora corpora = synth_transcription(spec, seed);

  std::vector<std::string> lexicon = content_vocab(spec);
  for (const std::string& f : filler_vocab(spec)) lexicon.push_back(f);
  std::map<std::string, std::vector<double>> prototypes;
  for (const std::string& w : lexicon) {
    prototypes[w] = token_prototype(spec, w, seed);
  }

  for (const Utterance& u : corpora.train) {
    std::vector<std::string> words = split_ws(u.verbatim);
    for (size_t w = 0; w < words.size(); ++w) {
      std::vector<double> avg(static_cast<size_t>(spec.feature_dim), 0.0);
      for (int64_t f = 0; f < spec.frames_per_token; ++f) {
        int64_t row = static_cast<int64_t>(w) * spec.frames_per_token + f;
        for (int64_t d = 0; d < spec.feature_dim; ++d) {
          avg[static_cast<size_t>(d)] += u.features.at(row, d);
        }
      }
      for (double& v : avg) v /= static_cast<double>(spec.frames_per_token);
      std::string best;
      double best_d = 0.0;
      for (const auto& [word, proto] : prototypes) {
        double d = distance_sq(avg, proto);
        if (best.empty() || d < best_d) {
          best = word;
          best_d = d;
        }
      }
      CHECK(best == words[w]);
    }
  }
}

TEST_CASE("compression drops fillers then rewrites chosen bigrams") {
  SynthSpec spec = base_spec();
  spec.filler_rate = 0.4;
  spec.filler_vocab_size = 4;
  spec.paraphrase_rule_count = 2;
  spec.min_tokens = 6;
  spec.max_tokens = 14;
  spec.train_size = 60;
  uint64_t seed = 19;
  SynthCorpora corpora = synth_transcription(spec, seed);
  std::vector<Utterance> compressed = synth_compression(corpora.train, spec, seed);

  std::vector<ParaphraseRule> rules = paraphrase_rules_for(spec, seed);
  std::vector<std::string> fillers = filler_vocab(spec);
  std::set<std::string> filler_set(fillers.begin(), fillers.end());

  int64_t verbatim_words = 0, compressed_words = 0;
  for (const Utterance& u : compressed) {
    REQUIRE(u.has_compressed());
    std::vector<std::string> kept;
    for (const std::string& w : split_ws(u.verbatim)) {
      if (!filler_set.count(w)) kept.push_back(w);
    }
    std::vector<std::string> expected;
    size_t i = 0;
    while (i < kept.size()) {
      const ParaphraseRule* hit = nullptr;
      if (i + 1 < kept.size()) {
        for (const ParaphraseRule& r : rules) {
          if (kept[i] == r.first && kept[i + 1] == r.second) {
            hit = &r;
            break;
          }
        }
      }
      if (hit) {
        expected.push_back(hit->replacement);
        i += 2;
      } else {
        expected.push_back(kept[i]);
        ++i;
      }
    }
    CHECK(u.compressed == join(expected, " "));
    verbatim_words += static_cast<int64_t>(split_ws(u.verbatim).size());
    compressed_words += static_cast<int64_t>(split_ws(u.compressed).size());
    CHECK(split_ws(u.compressed).size() <= split_ws(u.verbatim).size());
    CHECK(!u.compressed.empty());
  }
  // Dropping forty percent of the words should show up in the corpus ratio.
  double ratio = static_cast<double>(compressed_words) /
                 static_cast<double>(verbatim_words);
  CHECK(ratio > 0.40);
  CHECK(ratio < 0.75);
}

TEST_CASE("parallel corpora share hidden sentences across languages") {
  SynthSpec spec = base_spec();
  spec.tags = {"<aa>", "<bb>", "<cc>"};
  spec.train_size = 8;
  spec.dev_size = 2;
  spec.test_size = 2;
  uint64_t seed = 23;
  std::map<std::string, SynthCorpora> by_tag = synth_parallel(spec, seed);
  REQUIRE(by_tag.size() == 3);
  REQUIRE(by_tag.count("<aa>") == 1);

  const std::vector<Utterance>& aa = by_tag["<aa>"].train;
  const std::vector<Utterance>& bb = by_tag["<bb>"].train;
  REQUIRE(aa.size() == 8);
  REQUIRE(bb.size() == 8);
  CHECK(aa.front().id == "par-aa-train-000000");

  for (size_t i = 0; i < aa.size(); ++i) {
    std::vector<std::string> wa = split_ws(aa[i].verbatim);
    std::vector<std::string> wb = split_ws(bb[i].verbatim);
    REQUIRE(wa.size() == wb.size());
    for (size_t w = 0; w < wa.size(); ++w) {
      // Same hidden index, different language-specific surface form.
      CHECK(wa[w].substr(2) == wb[w].substr(2));
      CHECK(wa[w].substr(0, 2) == "aa");
      CHECK(wb[w].substr(0, 2) == "bb");
    }
    // One clean language-identity frame leads the word frames.
    CHECK(aa[i].features.shape()[0] ==
          1 + static_cast<int64_t>(wa.size()) * spec.frames_per_token);
    std::vector<double> proto = token_prototype(spec, "<aa>", seed);
    for (int64_t d = 0; d < spec.feature_dim; ++d) {
      CHECK(aa[i].features.at(0, d) ==
            static_cast<double>(static_cast<float>(proto[static_cast<size_t>(d)])));
    }
  }

  SynthSpec untagged = base_spec();
  CHECK_THROWS_AS(synth_parallel(untagged, 1), ConfigError);
}

TEST_CASE("direction corpora pair source audio with target text") {
  SynthSpec spec = base_spec();
  spec.tags = {"<aa>", "<bb>"};
  spec.train_size = 4;
  spec.dev_size = 1;
  spec.test_size = 1;
  std::map<std::string, SynthCorpora> parallel = synth_parallel(spec, 29);
  std::map<std::string, std::vector<Utterance>> by_tag;
  for (const auto& [tag, corpora] : parallel) by_tag[tag] = corpora.train;

  std::vector<Utterance> directions =
      tag_multilingual(by_tag, {{"<aa>", "<bb>"}});
  REQUIRE(directions.size() == 4);
  CHECK(directions.front().id == "aa2bb-000000");
  for (size_t i = 0; i < directions.size(); ++i) {
    CHECK(directions[i].features == by_tag["<aa>"][i].features);
    CHECK(directions[i].verbatim == by_tag["<bb>"][i].verbatim);
    CHECK(directions[i].tags.source == "<aa>");
    CHECK(directions[i].tags.target == "<bb>");
  }

  CHECK_THROWS_AS(tag_multilingual(by_tag, {{"<aa>", "<zz>"}}), ConfigError);
  CHECK_THROWS_AS(tag_multilingual(by_tag, {}), ConfigError);
  std::map<std::string, std::vector<Utterance>> uneven = by_tag;
  uneven["<bb>"].pop_back();
  CHECK_THROWS_AS(tag_multilingual(uneven, {{"<aa>", "<bb>"}}), ConfigError);
}

TEST_CASE("cross directions enumerate every ordered pair once") {
  auto dirs = all_cross_directions({"<aa>", "<bb>", "<cc>"});
  REQUIRE(dirs.size() == 6);
  std::set<std::pair<std::string, std::string>> unique(dirs.begin(), dirs.end());
  CHECK(unique.size() == 6);
  for (const auto& [src, tgt] : dirs) CHECK(src != tgt);
  CHECK(unique.count({"<aa>", "<bb>"}) == 1);
  CHECK(unique.count({"<bb>", "<aa>"}) == 1);
}

TEST_CASE("corpora round trip exactly through their JSONL form") {
  SynthSpec spec = base_spec();
  spec.filler_rate = 0.3;
  spec.paraphrase_rule_count = 1;
  spec.train_size = 6;
  SynthCorpora corpora = synth_transcription(spec, 31);
  std::vector<Utterance> with_compressed =
      synth_compression(corpora.train, spec, 31);

  std::string text = corpus_to_jsonl(with_compressed);
  std::vector<Utterance> back = corpus_from_jsonl(text);
  REQUIRE(back.size() == with_compressed.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].id == with_compressed[i].id);
    CHECK(back[i].verbatim == with_compressed[i].verbatim);
    CHECK(back[i].compressed == with_compressed[i].compressed);
    // Features are stored as 32-bit floats and synthesized as such, so the
    // round trip is bit exact.
    CHECK(back[i].features == with_compressed[i].features);
  }
  CHECK(corpus_to_jsonl(back) == text);

  testutil::TempDir dir("corpus");
  std::string path = dir.file("train.jsonl");
  save_corpus(path, with_compressed);
  std::vector<Utterance> loaded = load_corpus(path);
  CHECK(corpus_to_jsonl(loaded) == text);
}

TEST_CASE("corpus loading sorts by id and refuses duplicates") {
  SynthSpec spec = base_spec();
  spec.train_size = 3;
  std::vector<Utterance> train = synth_transcription(spec, 37).train;
  std::vector<Utterance> shuffled = {train[2], train[0], train[1]};
  std::vector<Utterance> loaded = corpus_from_jsonl(corpus_to_jsonl(shuffled));
  REQUIRE(loaded.size() == 3);
  CHECK(loaded[0].id < loaded[1].id);
  CHECK(loaded[1].id < loaded[2].id);

  std::vector<Utterance> doubled = {train[0], train[1], train[0]};
  CHECK_THROWS_AS(corpus_from_jsonl(corpus_to_jsonl(doubled)), IoError);
}

TEST_CASE("corpus loading rejects malformed records with their origin") {
  SynthSpec spec = base_spec();
  spec.train_size = 2;
  std::vector<Utterance> train = synth_transcription(spec, 41).train;

  // A compressed transcript longer than the verbatim one is clearly wrong.
  std::vector<Utterance> inflated = train;
  inflated[0].compressed = inflated[0].verbatim + " " + inflated[0].verbatim;
  CHECK_THROWS_AS(corpus_from_jsonl(corpus_to_jsonl(inflated)), IoError);

  std::vector<Utterance> silent = train;
  silent[0].verbatim = "";
  CHECK_THROWS_AS(corpus_from_jsonl(corpus_to_jsonl(silent)), IoError);

  try {
    corpus_from_jsonl("{\"id\": \"x\"}\n", "broken.jsonl");
    FAIL("expected missing fields to be rejected");
  } catch (const IoError& e) {
    std::string what = e.what();
    CHECK(what.find("broken.jsonl") != std::string::npos);
    CHECK(what.find("line 1") != std::string::npos);
  }

  // A feature payload whose byte count disagrees with the header fails.
  std::string bad =
      R"({"id": "x", "frames": 2, "feature_dim": 2, "features": "AAAA", )"
      R"("verbatim": "w000"})"
      "\n";
  CHECK_THROWS_AS(corpus_from_jsonl(bad), IoError);

  // Blank lines are tolerated padding, not records.
  std::string padded = "\n" + corpus_to_jsonl(train) + "\n";
  CHECK(corpus_from_jsonl(padded).size() == train.size());
}
