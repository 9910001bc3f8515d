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

#include "lenctl/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "lenctl/common.hpp"
#include "lenctl/fileio.hpp"

namespace lenctl {

namespace {

void check_config(const DecodeConfig& cfg) {
  if (cfg.budget < 0) throw ConfigError("decode budget must be non-negative");
  if (cfg.beam_size < 1) throw ConfigError("beam size must be at least 1");
  if (cfg.max_len < 0) throw ConfigError("max_len must be non-negative");
}

std::vector<int32_t> base_prefix(int32_t target_tag_id) {
  std::vector<int32_t> prefix{kBosId};
  if (target_tag_id >= 0) prefix.push_back(target_tag_id);
  return prefix;
}

// Stable log-softmax of a rank-1 logits tensor.
std::vector<double> log_probs(const Tensor& logits) {
  int64_t v = logits.numel();
  double mx = logits.at(0);
  for (int64_t i = 1; i < v; ++i) mx = std::max(mx, logits.at(i));
  double total = 0.0;
  for (int64_t i = 0; i < v; ++i) total += std::exp(logits.at(i) - mx);
  double lse = mx + std::log(total);
  std::vector<double> out(static_cast<size_t>(v));
  for (int64_t i = 0; i < v; ++i) {
    out[static_cast<size_t>(i)] = logits.at(i) - lse;
  }
  return out;
}

int64_t position_limit(const ModelParams& params, const DecodeConfig& cfg) {
  int64_t limit = params.config.max_len;
  if (cfg.max_len > 0) limit = std::min(limit, cfg.max_len);
  return limit;
}

struct Beam {
  std::vector<int32_t> tokens;
  double log_prob = 0.0;
  int64_t content = 0;
  bool finished = false;
};

// Log probability first; ties prefer a hypothesis that already ended, then
// the shorter one (earlier EOS), then lexicographic token ids.
bool beam_better(const Beam& a, const Beam& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  if (a.finished != b.finished) return a.finished;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

}  // namespace

Hypothesis decode_greedy(const ModelParams& params, const MergeTable& table,
                         const Tensor& features, const DecodeConfig& cfg,
                         int32_t target_tag_id, DecodeTrace* trace) {
  check_config(cfg);
  if (params.config.vocab_size != table.vocab_size()) {
    throw ConfigError("model vocabulary " + std::to_string(params.config.vocab_size) +
                      " does not match merge table vocabulary " +
                      std::to_string(table.vocab_size()));
  }
  Tensor memory = encode_features(params, features);
  std::vector<int32_t> prefix = base_prefix(target_tag_id);
  int64_t limit = position_limit(params, cfg);

  Hypothesis hyp;
  int64_t content = 0;
  while (true) {
    int64_t remaining_now = std::max<int64_t>(cfg.budget - content, 0);
    std::vector<int64_t> remaining = countdown_for_prefix(table, prefix, cfg.budget);
    Tensor logits = decode_step(params, memory, prefix, remaining);
    std::vector<double> lp = log_probs(logits);
    if (trace) trace->remaining_fed.push_back(remaining_now);

    bool out_of_budget = cfg.forced_stop && content >= cfg.budget;
    bool out_of_room = static_cast<int64_t>(prefix.size()) + 1 >= limit;
    int32_t pick;
    if (out_of_budget || out_of_room) {
      pick = kEosId;
    } else {
      pick = -1;
      double best = 0.0;
      for (int32_t id = 0; id < static_cast<int32_t>(lp.size()); ++id) {
        if (id != kEosId && !table.is_content(id)) continue;
        if (pick < 0 || lp[static_cast<size_t>(id)] > best) {
          pick = id;
          best = lp[static_cast<size_t>(id)];
        }
      }
    }
    hyp.tokens.push_back(pick);
    hyp.log_prob += lp[static_cast<size_t>(pick)];
    if (pick == kEosId) {
      hyp.finished = true;
      break;
    }
    if (table.is_content(pick)) ++content;
    prefix.push_back(pick);
  }
  return hyp;
}

Hypothesis decode_beam(const ModelParams& params, const MergeTable& table,
                       const Tensor& features, const DecodeConfig& cfg,
                       int32_t target_tag_id) {
  check_config(cfg);
  if (params.config.vocab_size != table.vocab_size()) {
    throw ConfigError("model vocabulary " + std::to_string(params.config.vocab_size) +
                      " does not match merge table vocabulary " +
                      std::to_string(table.vocab_size()));
  }
  Tensor memory = encode_features(params, features);
  std::vector<int32_t> base = base_prefix(target_tag_id);
  int64_t limit = position_limit(params, cfg);
  size_t width = static_cast<size_t>(cfg.beam_size);

  std::vector<Beam> active{Beam{}};
  std::vector<Beam> done;
  while (!active.empty()) {
    // Finished hypotheses only lose score as they grow, so once the best
    // settled one beats every active one the search cannot improve.
    if (!done.empty()) {
      double best_done = done.front().log_prob;
      for (const Beam& b : done) best_done = std::max(best_done, b.log_prob);
      bool improvable = false;
      for (const Beam& b : active) {
        if (b.log_prob > best_done) {
          improvable = true;
          break;
        }
      }
      if (!improvable) break;
    }

    std::vector<Beam> candidates;
    for (const Beam& beam : active) {
      std::vector<int32_t> prefix = base;
      prefix.insert(prefix.end(), beam.tokens.begin(), beam.tokens.end());
      std::vector<int64_t> remaining = countdown_for_prefix(table, prefix, cfg.budget);
      Tensor logits = decode_step(params, memory, prefix, remaining);
      std::vector<double> lp = log_probs(logits);

      bool out_of_budget = cfg.forced_stop && beam.content >= cfg.budget;
      bool out_of_room = static_cast<int64_t>(prefix.size()) + 1 >= limit;
      if (out_of_budget || out_of_room) {
        Beam next = beam;
        next.tokens.push_back(kEosId);
        next.log_prob += lp[kEosId];
        next.finished = true;
        candidates.push_back(std::move(next));
        continue;
      }
      for (int32_t id = 0; id < static_cast<int32_t>(lp.size()); ++id) {
        if (id != kEosId && !table.is_content(id)) continue;
        Beam next = beam;
        next.tokens.push_back(id);
        next.log_prob += lp[static_cast<size_t>(id)];
        if (id == kEosId) {
          next.finished = true;
        } else {
          ++next.content;
        }
        candidates.push_back(std::move(next));
      }
    }
    std::sort(candidates.begin(), candidates.end(), beam_better);
    if (candidates.size() > width) candidates.resize(width);
    active.clear();
    for (Beam& c : candidates) {
      if (c.finished) {
        done.push_back(std::move(c));
      } else {
        active.push_back(std::move(c));
      }
    }
  }

  Beam best = done.front();
  for (const Beam& b : done) {
    if (beam_better(b, best)) best = b;
  }
  Hypothesis hyp;
  hyp.tokens = best.tokens;
  hyp.log_prob = best.log_prob;
  hyp.finished = true;
  return hyp;
}

int64_t choose_budget(int64_t reference_len, int64_t baseline_len) {
  if (reference_len < 0) {
    throw ConfigError("reference length must be non-negative");
  }
  if (baseline_len < 0) return reference_len;
  return std::min(reference_len, baseline_len);
}

std::string hypotheses_to_tsv(const std::vector<HypothesisRecord>& records) {
  std::string out = "id\ttext\tcontent_tokens\tlog_prob\n";
  char buf[64];
  for (const HypothesisRecord& r : records) {
    std::snprintf(buf, sizeof(buf), "%.6f", r.log_prob);
    out += escape_tsv_field(r.id);
    out += '\t';
    out += escape_tsv_field(r.text);
    out += '\t';
    out += std::to_string(r.content_tokens);
    out += '\t';
    out += buf;
    out += '\n';
  }
  return out;
}

std::vector<HypothesisRecord> hypotheses_from_tsv(const std::string& text,
                                                  const std::string& origin) {
  auto fail = [&](const std::string& why) {
    throw IoError("bad hypothesis file (" + origin + "): " + why);
  };
  std::vector<std::string> lines;
  {
    size_t start = 0;
    while (start < text.size()) {
      size_t end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      lines.emplace_back(text, start, end - start);
      start = end + 1;
    }
  }
  if (lines.empty() || lines[0] != "id\ttext\tcontent_tokens\tlog_prob") {
    fail("missing header line");
  }
  std::vector<HypothesisRecord> out;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::vector<std::string> cols;
    size_t start = 0;
    const std::string& line = lines[i];
    while (true) {
      size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        cols.emplace_back(line, start, line.size() - start);
        break;
      }
      cols.emplace_back(line, start, tab - start);
      start = tab + 1;
    }
    if (cols.size() != 4) {
      fail("line " + std::to_string(i + 1) + " has " + std::to_string(cols.size()) +
           " columns, expected 4");
    }
    HypothesisRecord r;
    r.id = unescape_tsv_field(cols[0]);
    r.text = unescape_tsv_field(cols[1]);
    try {
      r.content_tokens = std::stoll(cols[2]);
      r.log_prob = std::stod(cols[3]);
    } catch (const std::exception&) {
      fail("line " + std::to_string(i + 1) + " has malformed numbers");
    }
    out.push_back(std::move(r));
  }
  return out;
}

void save_hypotheses(const std::string& path,
                     const std::vector<HypothesisRecord>& records) {
  atomic_write_file(path, hypotheses_to_tsv(records));
}

std::vector<HypothesisRecord> load_hypotheses(const std::string& path) {
  return hypotheses_from_tsv(read_file(path), path);
}

}  // namespace lenctl
