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

// Text metrics operate on case-folded whitespace words: input is lowercased
// and split on whitespace, punctuation stays attached to its word.
std::vector<std::string> metric_words(const std::string& text);

// Word-level Levenshtein distance (substitution, insertion and deletion all
// cost 1).
int64_t word_edit_distance(const std::string& ref, const std::string& hyp);

// Corpus word error rate: total edit distance over total reference words.
// Both lists must have the same length. A corpus whose references contain no
// words at all has no defined rate unless every hypothesis is empty too.
double wer(const std::vector<std::string>& refs, const std::vector<std::string>& hyps);

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// N-gram overlap with clipped counts; empty sides yield zero scores, never
// NaN. F1 is the harmonic mean, zero when precision + recall is zero.
RougeScore rouge_n(const std::string& ref, const std::string& hyp, int n);

// Longest-common-subsequence variant over words.
RougeScore rouge_l(const std::string& ref, const std::string& hyp);

// Mean over utterances of produced length / desired length. Lengths are
// counted in content tokens by the caller. Desired lengths must be positive.
double length_ratio(const std::vector<int64_t>& produced,
                    const std::vector<int64_t>& desired);

struct Histogram {
  std::vector<double> edges;    // bins + 1 ascending edges
  std::vector<int64_t> counts;  // per-bin counts, last bin closed on top
};

// Distribution of transcription length / target length ratios across a
// corpus, binned uniformly between the observed minimum and maximum.
Histogram compression_histogram(const std::vector<int64_t>& transcription_lens,
                                const std::vector<int64_t>& target_lens,
                                int64_t bins);

// One text-file row per bin: bin_low <TAB> bin_high <TAB> count.
std::string histogram_rows(const Histogram& hist);

struct UtteranceEval {
  std::string id;
  double wer = 0.0;
  RougeScore rouge1;
  RougeScore rouge2;
  RougeScore rougeL;
  int64_t produced_len = 0;
  int64_t desired_len = 0;
  double ratio = 0.0;
};

// Corpus-level scores plus the per-utterance breakdown they came from. WER
// pools edit distance over the corpus; ROUGE components and the length ratio
// are averaged per utterance.
struct EvalReport {
  double wer = 0.0;
  RougeScore rouge1;
  RougeScore rouge2;
  RougeScore rougeL;
  double length_ratio = 0.0;
  std::vector<UtteranceEval> utterances;
};

// All five vectors are aligned by index; produced/desired lengths count
// content tokens. Desired lengths must be positive.
EvalReport evaluate_corpus(const std::vector<std::string>& ids,
                           const std::vector<std::string>& refs,
                           const std::vector<std::string>& hyps,
                           const std::vector<int64_t>& produced_lens,
                           const std::vector<int64_t>& desired_lens);

// Fixed-width summary table with ratio, wer, r1, r2 and rl columns.
std::string eval_report_table(const EvalReport& report);

// Per-utterance records, one JSON object per line.
std::string eval_report_jsonl(const EvalReport& report);

}  // namespace lenctl
