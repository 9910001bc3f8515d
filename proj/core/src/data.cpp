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

#include "lenctl/data.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <random>
#include <set>

#include <json.hpp>

#include "lenctl/common.hpp"
#include "lenctl/fileio.hpp"

namespace lenctl {

namespace {
constexpr uint64_t kLanePrototype = 0x70726f746fULL;  // "proto"
constexpr uint64_t kLaneRules = 0x72756c6573ULL;      // "rules"
constexpr uint64_t kLaneUtterance = 0x75747445ULL;    // "uttE"

std::string indexed_word(const std::string& prefix, int64_t index, int64_t total) {
  size_t width = total > 1000 ? 4 : 3;
  std::string digits = std::to_string(index);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

std::string tag_inner(const std::string& tag) {
  if (tag.size() < 3 || tag.front() != '<' || tag.back() != '>') {
    throw ConfigError("tag '" + tag + "' must look like <name>");
  }
  return tag.substr(1, tag.size() - 2);
}

}  // namespace

void SynthSpec::validate() const {
  if (vocab_size < 2) throw ConfigError("vocab_size must be at least 2");
  if (feature_dim < 1) throw ConfigError("feature_dim must be positive");
  if (frames_per_token < 1) throw ConfigError("frames_per_token must be positive");
  if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be non-negative");
  if (filler_rate < 0.0 || filler_rate >= 1.0) {
    throw ConfigError("filler_rate must lie in [0, 1)");
  }
  if (filler_vocab_size < 0) throw ConfigError("filler_vocab_size must be non-negative");
  if (filler_rate > 0.0 && filler_vocab_size < 1) {
    throw ConfigError("filler_rate needs a non-empty filler vocabulary");
  }
  if (paraphrase_rule_count < 0 || paraphrase_rule_count > 5) {
    throw ConfigError("paraphrase_rule_count must lie in [0, 5]");
  }
  if (min_tokens < 1 || max_tokens < min_tokens) {
    throw ConfigError("need 1 <= min_tokens <= max_tokens");
  }
  if (train_size < 0 || dev_size < 0 || test_size < 0) {
    throw ConfigError("split sizes must be non-negative");
  }
  if (train_size + dev_size + test_size == 0) {
    throw ConfigError("all split sizes are zero");
  }
  for (const std::string& tag : tags) {
    tag_inner(tag);  // throws on malformed tags
  }
  if (!tags.empty() && tags.size() < 2) {
    throw ConfigError("parallel corpora need at least two tags");
  }
}

SynthSpec synth_spec_from_json(const std::string& text, const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad synthesis spec (" + origin + "): " + e.what());
  }
  static const std::set<std::string> known = {
      "vocab_size",   "feature_dim", "frames_per_token",
      "noise_sigma",  "filler_rate", "filler_vocab_size",
      "paraphrase_rule_count",       "min_tokens",
      "max_tokens",   "train_size",  "dev_size",
      "test_size",    "tags"};
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) {
      throw IoError("bad synthesis spec (" + origin + "): unknown key '" +
                    item.key() + "'");
    }
  }
  SynthSpec spec;
  try {
    spec.vocab_size = j.value("vocab_size", spec.vocab_size);
    spec.feature_dim = j.value("feature_dim", spec.feature_dim);
    spec.frames_per_token = j.value("frames_per_token", spec.frames_per_token);
    spec.noise_sigma = j.value("noise_sigma", spec.noise_sigma);
    spec.filler_rate = j.value("filler_rate", spec.filler_rate);
    spec.filler_vocab_size = j.value("filler_vocab_size", spec.filler_vocab_size);
    spec.paraphrase_rule_count =
        j.value("paraphrase_rule_count", spec.paraphrase_rule_count);
    spec.min_tokens = j.value("min_tokens", spec.min_tokens);
    spec.max_tokens = j.value("max_tokens", spec.max_tokens);
    spec.train_size = j.value("train_size", spec.train_size);
    spec.dev_size = j.value("dev_size", spec.dev_size);
    spec.test_size = j.value("test_size", spec.test_size);
    spec.tags = j.value("tags", spec.tags);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad synthesis spec (" + origin + "): " + e.what());
  }
  spec.validate();
  return spec;
}

std::string synth_spec_to_json(const SynthSpec& spec) {
  nlohmann::ordered_json j;
  j["vocab_size"] = spec.vocab_size;
  j["feature_dim"] = spec.feature_dim;
  j["frames_per_token"] = spec.frames_per_token;
  j["noise_sigma"] = spec.noise_sigma;
  j["filler_rate"] = spec.filler_rate;
  j["filler_vocab_size"] = spec.filler_vocab_size;
  j["paraphrase_rule_count"] = spec.paraphrase_rule_count;
  j["min_tokens"] = spec.min_tokens;
  j["max_tokens"] = spec.max_tokens;
  j["train_size"] = spec.train_size;
  j["dev_size"] = spec.dev_size;
  j["test_size"] = spec.test_size;
  j["tags"] = spec.tags;
  return j.dump(2) + "\n";
}

std::vector<std::string> content_vocab(const SynthSpec& spec) {
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(spec.vocab_size));
  for (int64_t i = 0; i < spec.vocab_size; ++i) {
    out.push_back(indexed_word("w", i, spec.vocab_size));
  }
  return out;
}

std::vector<std::string> filler_vocab(const SynthSpec& spec) {
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(spec.filler_vocab_size));
  for (int64_t i = 0; i < spec.filler_vocab_size; ++i) {
    out.push_back(indexed_word("uh", i, spec.filler_vocab_size));
  }
  return out;
}

std::vector<std::string> tag_vocab(const SynthSpec& spec, const std::string& tag) {
  std::string prefix = tag_inner(tag);
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(spec.vocab_size));
  for (int64_t i = 0; i < spec.vocab_size; ++i) {
    out.push_back(indexed_word(prefix, i, spec.vocab_size));
  }
  return out;
}

std::vector<double> token_prototype(const SynthSpec& spec, const std::string& token,
                                    uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, kLanePrototype, fnv1a(token)));
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> out(static_cast<size_t>(spec.feature_dim));
  for (double& v : out) v = dist(rng);
  return out;
}

std::vector<ParaphraseRule> paraphrase_rules_for(const SynthSpec& spec, uint64_t seed) {
  std::vector<ParaphraseRule> rules;
  if (spec.paraphrase_rule_count == 0) return rules;
  std::vector<std::string> vocab = content_vocab(spec);
  std::mt19937_64 rng(mix_seed(seed, kLaneRules));
  std::uniform_int_distribution<int64_t> pick(0, spec.vocab_size - 1);
  std::vector<std::pair<int64_t, int64_t>> used;
  while (static_cast<int64_t>(rules.size()) < spec.paraphrase_rule_count) {
    int64_t a = pick(rng);
    int64_t b = pick(rng);
    if (a == b) continue;
    bool seen = false;
    for (const auto& p : used) {
      if (p.first == a && p.second == b) {
        seen = true;
        break;
      }
    }
    if (seen) continue;
    used.emplace_back(a, b);
    ParaphraseRule rule;
    rule.first = vocab[static_cast<size_t>(a)];
    rule.second = vocab[static_cast<size_t>(b)];
    rule.replacement =
        indexed_word("p", static_cast<int64_t>(rules.size()), spec.paraphrase_rule_count);
    rules.push_back(std::move(rule));
  }
  return rules;
}

namespace {

// Noisy feature block for a list of words, optionally led by one clean
// language-identity frame.
Tensor render_features(const SynthSpec& spec, const std::vector<std::string>& words,
                       const std::string& lead_token, uint64_t master_seed,
                       std::mt19937_64& rng) {
  int64_t lead = lead_token.empty() ? 0 : 1;
  int64_t frames = lead + static_cast<int64_t>(words.size()) * spec.frames_per_token;
  Tensor features({frames, spec.feature_dim});
  int64_t row = 0;
  if (lead) {
    std::vector<double> proto = token_prototype(spec, lead_token, master_seed);
    for (int64_t d = 0; d < spec.feature_dim; ++d) {
      features.at(row, d) = proto[static_cast<size_t>(d)];
    }
    ++row;
  }
  std::normal_distribution<double> noise(0.0, 1.0);
  for (const std::string& word : words) {
    std::vector<double> proto = token_prototype(spec, word, master_seed);
    for (int64_t f = 0; f < spec.frames_per_token; ++f) {
      for (int64_t d = 0; d < spec.feature_dim; ++d) {
        features.at(row, d) =
            proto[static_cast<size_t>(d)] + spec.noise_sigma * noise(rng);
      }
      ++row;
    }
  }
  features = features.to_dtype(DType::kF32);
  return features;
}

struct SplitPlan {
  const char* name;
  int64_t size;
};

}  // namespace

SynthCorpora synth_transcription(const SynthSpec& spec, uint64_t seed) {
  spec.validate();
  if (!spec.tags.empty()) {
    throw ConfigError("synth_transcription does not take tags; use synth_parallel");
  }
  std::vector<std::string> content = content_vocab(spec);
  std::vector<std::string> fillers = filler_vocab(spec);

  SynthCorpora out;
  SplitPlan plan[3] = {{"train", spec.train_size},
                       {"dev", spec.dev_size},
                       {"test", spec.test_size}};
  std::vector<Utterance>* dests[3] = {&out.train, &out.dev, &out.test};
  for (int s = 0; s < 3; ++s) {
    for (int64_t i = 0; i < plan[s].size; ++i) {
      std::mt19937_64 rng(mix_seed(seed, kLaneUtterance ^ fnv1a(plan[s].name),
                                   static_cast<uint64_t>(i)));
      std::uniform_int_distribution<int64_t> length(spec.min_tokens, spec.max_tokens);
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      std::uniform_int_distribution<int64_t> content_pick(0, spec.vocab_size - 1);
      std::uniform_int_distribution<int64_t> filler_pick(
          0, std::max<int64_t>(spec.filler_vocab_size - 1, 0));

      int64_t n = length(rng);
      std::vector<std::string> words;
      bool any_content = false;
      for (int64_t w = 0; w < n; ++w) {
        if (spec.filler_rate > 0.0 && coin(rng) < spec.filler_rate) {
          words.push_back(fillers[static_cast<size_t>(filler_pick(rng))]);
        } else {
          words.push_back(content[static_cast<size_t>(content_pick(rng))]);
          any_content = true;
        }
      }
      if (!any_content) {
        words[0] = content[static_cast<size_t>(content_pick(rng))];
      }

      Utterance u;
      char idbuf[48];
      std::snprintf(idbuf, sizeof(idbuf), "tr-%s-%06lld", plan[s].name,
                    static_cast<long long>(i));
      u.id = idbuf;
      u.verbatim = join(words, " ");
      u.features = render_features(spec, words, "", seed, rng);
      dests[s]->push_back(std::move(u));
    }
  }
  return out;
}

std::vector<Utterance> synth_compression(std::vector<Utterance> corpus,
                                         const SynthSpec& spec, uint64_t seed) {
  std::vector<ParaphraseRule> rules = paraphrase_rules_for(spec, seed);
  std::vector<std::string> fillers = filler_vocab(spec);
  auto is_filler = [&](const std::string& w) {
    for (const std::string& f : fillers) {
      if (f == w) return true;
    }
    return false;
  };
  for (Utterance& u : corpus) {
    std::vector<std::string> kept;
    for (const std::string& w : split_ws(u.verbatim)) {
      if (!is_filler(w)) kept.push_back(w);
    }
    std::vector<std::string> rewritten;
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
        rewritten.push_back(hit->replacement);
        i += 2;
      } else {
        rewritten.push_back(kept[i]);
        ++i;
      }
    }
    if (rewritten.empty()) {
      throw Error("compression of utterance '" + u.id + "' removed every word");
    }
    u.compressed = join(rewritten, " ");
  }
  return corpus;
}

std::map<std::string, SynthCorpora> synth_parallel(const SynthSpec& spec,
                                                   uint64_t seed) {
  spec.validate();
  if (spec.tags.size() < 2) {
    throw ConfigError("synth_parallel needs at least two tags");
  }
  std::map<std::string, std::vector<std::string>> vocab_by_tag;
  for (const std::string& tag : spec.tags) {
    vocab_by_tag[tag] = tag_vocab(spec, tag);
  }

  std::map<std::string, SynthCorpora> out;
  SplitPlan plan[3] = {{"train", spec.train_size},
                       {"dev", spec.dev_size},
                       {"test", spec.test_size}};
  for (int s = 0; s < 3; ++s) {
    for (int64_t i = 0; i < plan[s].size; ++i) {
      // One hidden index sentence per (split, i); every language renders it
      // through its own wordlist, giving an exact cipher alignment.
      std::mt19937_64 skeleton_rng(mix_seed(seed, fnv1a(plan[s].name),
                                            static_cast<uint64_t>(i)));
      std::uniform_int_distribution<int64_t> length(spec.min_tokens, spec.max_tokens);
      std::uniform_int_distribution<int64_t> pick(0, spec.vocab_size - 1);
      int64_t n = length(skeleton_rng);
      std::vector<int64_t> indices(static_cast<size_t>(n));
      for (int64_t& ix : indices) ix = pick(skeleton_rng);

      for (const std::string& tag : spec.tags) {
        std::vector<std::string> words;
        words.reserve(indices.size());
        for (int64_t ix : indices) {
          words.push_back(vocab_by_tag[tag][static_cast<size_t>(ix)]);
        }
        std::mt19937_64 noise_rng(mix_seed(seed, fnv1a(tag + ":" + plan[s].name),
                                           static_cast<uint64_t>(i)));
        Utterance u;
        char idbuf[64];
        std::snprintf(idbuf, sizeof(idbuf), "par-%s-%s-%06lld",
                      tag_inner(tag).c_str(), plan[s].name, static_cast<long long>(i));
        u.id = idbuf;
        u.verbatim = join(words, " ");
        u.features = render_features(spec, words, tag, seed, noise_rng);
        SynthCorpora& c = out[tag];
        (s == 0 ? c.train : s == 1 ? c.dev : c.test).push_back(std::move(u));
      }
    }
  }
  return out;
}

std::vector<Utterance> tag_multilingual(
    const std::map<std::string, std::vector<Utterance>>& by_tag,
    const std::vector<std::pair<std::string, std::string>>& directions) {
  if (directions.empty()) {
    throw ConfigError("no directions given");
  }
  std::vector<Utterance> out;
  for (const auto& [src, tgt] : directions) {
    auto si = by_tag.find(src);
    auto ti = by_tag.find(tgt);
    if (si == by_tag.end() || ti == by_tag.end()) {
      throw ConfigError("direction " + src + " -> " + tgt +
                        " references a tag with no corpus");
    }
    if (si->second.size() != ti->second.size()) {
      throw ConfigError("parallel corpora for " + src + " and " + tgt +
                        " have different sizes");
    }
    for (size_t i = 0; i < si->second.size(); ++i) {
      const Utterance& s = si->second[i];
      const Utterance& t = ti->second[i];
      Utterance u;
      char idbuf[80];
      std::snprintf(idbuf, sizeof(idbuf), "%s2%s-%06lld", tag_inner(src).c_str(),
                    tag_inner(tgt).c_str(), static_cast<long long>(i));
      u.id = idbuf;
      u.features = s.features;
      u.verbatim = t.verbatim;
      u.tags.source = src;
      u.tags.target = tgt;
      out.push_back(std::move(u));
    }
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> all_cross_directions(
    const std::vector<std::string>& tags) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const std::string& a : tags) {
    for (const std::string& b : tags) {
      if (a != b) out.emplace_back(a, b);
    }
  }
  return out;
}

namespace {

std::string features_to_base64(const Tensor& features) {
  std::vector<uint8_t> bytes;
  bytes.reserve(static_cast<size_t>(features.numel()) * 4);
  for (double d : features.values()) {
    float f = static_cast<float>(d);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int b = 0; b < 4; ++b) {
      bytes.push_back(static_cast<uint8_t>((bits >> (8 * b)) & 0xff));
    }
  }
  return base64_encode(bytes.data(), bytes.size());
}

Tensor features_from_base64(const std::string& text, int64_t frames, int64_t dim,
                            const std::string& id) {
  std::vector<uint8_t> bytes = base64_decode(text);
  if (static_cast<int64_t>(bytes.size()) != frames * dim * 4) {
    throw IoError("utterance '" + id + "': feature payload is " +
                  std::to_string(bytes.size()) + " bytes, expected " +
                  std::to_string(frames * dim * 4));
  }
  Tensor t({frames, dim}, DType::kF32);
  for (int64_t i = 0; i < t.numel(); ++i) {
    uint32_t bits = 0;
    for (int b = 3; b >= 0; --b) {
      bits = (bits << 8) | bytes[static_cast<size_t>(i * 4 + b)];
    }
    float f;
    std::memcpy(&f, &bits, 4);
    t.values()[static_cast<size_t>(i)] = static_cast<double>(f);
  }
  return t;
}

}  // namespace

std::string corpus_to_jsonl(const std::vector<Utterance>& corpus) {
  std::string out;
  for (const Utterance& u : corpus) {
    nlohmann::ordered_json j;
    j["id"] = u.id;
    j["frames"] = u.features.shape()[0];
    j["feature_dim"] = u.features.shape()[1];
    j["features"] = features_to_base64(u.features);
    j["verbatim"] = u.verbatim;
    if (u.has_compressed()) j["compressed"] = u.compressed;
    if (u.has_tags()) {
      j["tags"] = {{"source", u.tags.source}, {"target", u.tags.target}};
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Utterance> corpus_from_jsonl(const std::string& text,
                                         const std::string& origin) {
  std::vector<Utterance> out;
  size_t start = 0;
  int64_t line_no = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      Utterance u;
      u.id = j.at("id").get<std::string>();
      int64_t frames = j.at("frames").get<int64_t>();
      int64_t dim = j.at("feature_dim").get<int64_t>();
      if (frames < 1 || dim < 1) {
        throw IoError("utterance '" + u.id + "' has an empty feature grid");
      }
      u.features =
          features_from_base64(j.at("features").get<std::string>(), frames, dim, u.id);
      u.verbatim = j.at("verbatim").get<std::string>();
      if (u.verbatim.empty()) {
        throw IoError("utterance '" + u.id + "' has an empty transcript");
      }
      if (j.contains("compressed")) {
        u.compressed = j.at("compressed").get<std::string>();
        if (u.compressed.empty()) {
          throw IoError("utterance '" + u.id + "' has an empty compressed transcript");
        }
        // Compression corpora are mostly shorter; allow a little slack for
        // paraphrase-style rewrites but reject anything clearly inflated.
        double limit = 1.1 * static_cast<double>(split_ws(u.verbatim).size());
        if (static_cast<double>(split_ws(u.compressed).size()) > limit) {
          throw IoError("utterance '" + u.id +
                        "': compressed transcript is longer than the verbatim one");
        }
      }
      if (j.contains("tags")) {
        u.tags.source = j.at("tags").at("source").get<std::string>();
        u.tags.target = j.at("tags").at("target").get<std::string>();
        if (u.tags.source.empty() || u.tags.target.empty()) {
          throw IoError("utterance '" + u.id + "' has incomplete tags");
        }
      }
      out.push_back(std::move(u));
    } catch (const nlohmann::json::exception& e) {
      throw IoError("bad corpus (" + origin + ") line " + std::to_string(line_no) +
                    ": " + e.what());
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Utterance& a, const Utterance& b) { return a.id < b.id; });
  for (size_t i = 1; i < out.size(); ++i) {
    if (out[i].id == out[i - 1].id) {
      throw IoError("bad corpus (" + origin + "): duplicate utterance id '" +
                    out[i].id + "'");
    }
  }
  return out;
}

void save_corpus(const std::string& path, const std::vector<Utterance>& corpus) {
  atomic_write_file(path, corpus_to_jsonl(corpus));
}

std::vector<Utterance> load_corpus(const std::string& path) {
  return corpus_from_jsonl(read_file(path), path);
}

}  // namespace lenctl
