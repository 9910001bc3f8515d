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

struct Tags {
  std::string source;
  std::string target;
};

// One utterance: source feature frames and its transcripts. compressed and
// tags are optional (empty means absent).
struct Utterance {
  std::string id;
  Tensor features;  // [frames, feature_dim]
  std::string verbatim;
  std::string compressed;
  Tags tags;

  bool has_compressed() const { return !compressed.empty(); }
  bool has_tags() const { return !tags.source.empty(); }
};

// Synthetic task description. Every word in the vocabulary owns a fixed
// prototype vector; an utterance renders each of its words as
// frames_per_token noisy copies of the word's prototype, so transcription is
// learnable but non-trivial. Fillers are drawn from a reserved sub-
// vocabulary and are exactly the words a compressed target drops.
struct SynthSpec {
  int64_t vocab_size = 50;
  int64_t feature_dim = 8;
  int64_t frames_per_token = 3;
  double noise_sigma = 0.1;
  double filler_rate = 0.0;
  int64_t filler_vocab_size = 5;
  int64_t paraphrase_rule_count = 0;  // at most 5
  int64_t min_tokens = 5;
  int64_t max_tokens = 30;
  int64_t train_size = 0;
  int64_t dev_size = 0;
  int64_t test_size = 0;
  std::vector<std::string> tags;  // non-empty switches to parallel corpora

  void validate() const;
};

SynthSpec synth_spec_from_json(const std::string& text,
                               const std::string& origin = "<memory>");
std::string synth_spec_to_json(const SynthSpec& spec);

struct SynthCorpora {
  std::vector<Utterance> train, dev, test;
};

// Deterministic wordlists.
std::vector<std::string> content_vocab(const SynthSpec& spec);
std::vector<std::string> filler_vocab(const SynthSpec& spec);
std::vector<std::string> tag_vocab(const SynthSpec& spec, const std::string& tag);

// The prototype feature vector a word renders as, fixed by (seed, word).
std::vector<double> token_prototype(const SynthSpec& spec, const std::string& token,
                                    uint64_t seed);

// Word deletion rules for compression: up to five distinct content bigrams,
// each rewritten to its own fresh word, applied left to right after fillers
// are dropped. The mapping is injective so compression stays invertible at
// the rule level.
struct ParaphraseRule {
  std::string first;
  std::string second;
  std::string replacement;
};

std::vector<ParaphraseRule> paraphrase_rules_for(const SynthSpec& spec, uint64_t seed);

// Plain transcription corpora: (spec, seed) determines every byte.
SynthCorpora synth_transcription(const SynthSpec& spec, uint64_t seed);

// Adds compressed targets to a transcription corpus: fillers are deleted,
// then paraphrase rules merge bigrams. The result always has at least one
// word and never more than the verbatim text.
std::vector<Utterance> synth_compression(std::vector<Utterance> corpus,
                                         const SynthSpec& spec, uint64_t seed);

// Parallel ciphered corpora, one per tag: utterance i carries the same
// hidden word indices in every language, rendered through per-tag
// vocabularies. Each feature sequence starts with one clean frame holding
// the tag's own prototype so the source language is recoverable.
std::map<std::string, SynthCorpora> synth_parallel(const SynthSpec& spec,
                                                   uint64_t seed);

// Builds direction corpora from parallel per-tag corpora: an (src, tgt)
// entry pairs src features with the tgt transcript. Same-tag directions are
// legal here; training rejects them later, evaluation uses them.
std::vector<Utterance> tag_multilingual(
    const std::map<std::string, std::vector<Utterance>>& by_tag,
    const std::vector<std::pair<std::string, std::string>>& directions);

// Every ordered cross pair, e.g. 3 tags give 6 directions.
std::vector<std::pair<std::string, std::string>> all_cross_directions(
    const std::vector<std::string>& tags);

// JSONL persistence; feature frames travel as base64 little-endian f32.
std::string corpus_to_jsonl(const std::vector<Utterance>& corpus);
std::vector<Utterance> corpus_from_jsonl(const std::string& text,
                                         const std::string& origin = "<memory>");
void save_corpus(const std::string& path, const std::vector<Utterance>& corpus);
std::vector<Utterance> load_corpus(const std::string& path);

}  // namespace lenctl
