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

#include "lenctl/bpe.hpp"
#include "lenctl/model.hpp"
#include "lenctl/tensor.hpp"

namespace lenctl {

struct DecodeConfig {
  int64_t budget = 0;      // desired content-token count
  int beam_size = 1;
  int64_t max_len = 0;     // safety cap on decoder positions; 0 = model's max_len
  // When set, a hypothesis that has spent its budget is closed with EOS
  // immediately, so produced length never exceeds the budget. When unset the
  // model is free to overshoot until EOS or max_len.
  bool forced_stop = false;
};

// tokens holds emitted ids (the BOS/tag prefix is not included); a final EOS
// is present whenever the model emitted it or a stop was forced. log_prob is
// the sum of the emitted tokens' log probabilities.
struct Hypothesis {
  std::vector<int32_t> tokens;
  double log_prob = 0.0;
  bool finished = false;
};

// Countdown values consumed at each emission step, for inspection: a run
// with budget t that self-terminates after n content tokens reads t, t-1,
// ..., t-n.
struct DecodeTrace {
  std::vector<int64_t> remaining_fed;
};

// Candidates at every step are the content ids plus EOS; reserved ids and
// tags never compete. Score ties pick the lowest token id. target_tag_id,
// when non-negative, is fed to the decoder right after BOS.
Hypothesis decode_greedy(const ModelParams& params, const MergeTable& table,
                         const Tensor& features, const DecodeConfig& cfg,
                         int32_t target_tag_id = -1, DecodeTrace* trace = nullptr);

// Beam search with the same candidate set and budget handling. Hypotheses
// are compared by log probability; ties prefer the earlier EOS, then the
// lexicographically smaller token sequence. beam_size 1 matches
// decode_greedy exactly.
Hypothesis decode_beam(const ModelParams& params, const MergeTable& table,
                       const Tensor& features, const DecodeConfig& cfg,
                       int32_t target_tag_id = -1);

// Budget selection: the reference length, tightened by a baseline system's
// output length when one is available (pass -1 for none).
int64_t choose_budget(int64_t reference_len, int64_t baseline_len);

// One row per utterance: id, text, content-token count, log probability.
struct HypothesisRecord {
  std::string id;
  std::string text;
  int64_t content_tokens = 0;
  double log_prob = 0.0;
};

std::string hypotheses_to_tsv(const std::vector<HypothesisRecord>& records);
std::vector<HypothesisRecord> hypotheses_from_tsv(const std::string& text,
                                                  const std::string& origin = "<memory>");
void save_hypotheses(const std::string& path,
                     const std::vector<HypothesisRecord>& records);
std::vector<HypothesisRecord> load_hypotheses(const std::string& path);

}  // namespace lenctl
