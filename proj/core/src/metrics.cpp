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

#include "lenctl/metrics.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

#include "lenctl/common.hpp"
#include "lenctl/fileio.hpp"

namespace lenctl {

std::vector<std::string> metric_words(const std::string& text) {
  return split_ws(to_lower(text));
}

namespace {

int64_t edit_distance(const std::vector<std::string>& a,
                      const std::vector<std::string>& b) {
  size_t n = a.size(), m = b.size();
  std::vector<int64_t> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int64_t>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int64_t>(i);
    for (size_t j = 1; j <= m; ++j) {
      int64_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

RougeScore prf(int64_t overlap, int64_t hyp_units, int64_t ref_units) {
  RougeScore s;
  if (hyp_units > 0) s.precision = double(overlap) / double(hyp_units);
  if (ref_units > 0) s.recall = double(overlap) / double(ref_units);
  if (s.precision + s.recall > 0.0) {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

}  // namespace

int64_t word_edit_distance(const std::string& ref, const std::string& hyp) {
  return edit_distance(metric_words(ref), metric_words(hyp));
}

double wer(const std::vector<std::string>& refs, const std::vector<std::string>& hyps) {
  if (refs.size() != hyps.size()) {
    throw ConfigError("wer: " + std::to_string(refs.size()) + " references vs " +
                      std::to_string(hyps.size()) + " hypotheses");
  }
  int64_t distance = 0;
  int64_t ref_words = 0;
  for (size_t i = 0; i < refs.size(); ++i) {
    std::vector<std::string> r = metric_words(refs[i]);
    std::vector<std::string> h = metric_words(hyps[i]);
    distance += edit_distance(r, h);
    ref_words += static_cast<int64_t>(r.size());
  }
  if (ref_words == 0) {
    if (distance == 0) return 0.0;
    throw ConfigError("wer: reference corpus has no words but hypotheses do");
  }
  return double(distance) / double(ref_words);
}

RougeScore rouge_n(const std::string& ref, const std::string& hyp, int n) {
  if (n < 1) {
    throw ConfigError("rouge_n: order must be at least 1");
  }
  std::vector<std::string> r = metric_words(ref);
  std::vector<std::string> h = metric_words(hyp);
  auto grams = [n](const std::vector<std::string>& words) {
    std::map<std::string, int64_t> out;
    if (static_cast<int64_t>(words.size()) < n) return out;
    for (size_t i = 0; i + static_cast<size_t>(n) <= words.size(); ++i) {
      std::string key = words[i];
      for (size_t j = 1; j < static_cast<size_t>(n); ++j) {
        key += '\x1f';
        key += words[i + j];
      }
      ++out[key];
    }
    return out;
  };
  std::map<std::string, int64_t> rg = grams(r);
  std::map<std::string, int64_t> hg = grams(h);
  int64_t overlap = 0, hyp_units = 0, ref_units = 0;
  for (const auto& [g, c] : rg) {
    (void)g;
    ref_units += c;
  }
  for (const auto& [g, c] : hg) {
    hyp_units += c;
    auto it = rg.find(g);
    if (it != rg.end()) overlap += std::min(c, it->second);
  }
  return prf(overlap, hyp_units, ref_units);
}

RougeScore rouge_l(const std::string& ref, const std::string& hyp) {
  std::vector<std::string> r = metric_words(ref);
  std::vector<std::string> h = metric_words(hyp);
  size_t n = r.size(), m = h.size();
  std::vector<int64_t> prev(m + 1, 0), cur(m + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      if (r[i - 1] == h[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
    std::fill(cur.begin(), cur.end(), 0);
  }
  int64_t lcs = prev[m];
  return prf(lcs, static_cast<int64_t>(m), static_cast<int64_t>(n));
}

double length_ratio(const std::vector<int64_t>& produced,
                    const std::vector<int64_t>& desired) {
  if (produced.size() != desired.size()) {
    throw ConfigError("length_ratio: list sizes differ");
  }
  if (produced.empty()) {
    throw ConfigError("length_ratio: no utterances");
  }
  double total = 0.0;
  for (size_t i = 0; i < produced.size(); ++i) {
    if (desired[i] <= 0) {
      throw ConfigError("length_ratio: desired length must be positive");
    }
    total += double(produced[i]) / double(desired[i]);
  }
  return total / double(produced.size());
}

Histogram compression_histogram(const std::vector<int64_t>& transcription_lens,
                                const std::vector<int64_t>& target_lens,
                                int64_t bins) {
  if (transcription_lens.size() != target_lens.size()) {
    throw ConfigError("compression_histogram: list sizes differ");
  }
  if (transcription_lens.empty() || bins < 1) {
    throw ConfigError("compression_histogram: need data and at least one bin");
  }
  std::vector<double> ratios;
  ratios.reserve(transcription_lens.size());
  for (size_t i = 0; i < transcription_lens.size(); ++i) {
    if (target_lens[i] <= 0) {
      throw ConfigError("compression_histogram: target length must be positive");
    }
    ratios.push_back(double(transcription_lens[i]) / double(target_lens[i]));
  }
  double lo = *std::min_element(ratios.begin(), ratios.end());
  double hi = *std::max_element(ratios.begin(), ratios.end());
  if (hi == lo) hi = lo + 1.0;  // all mass in one spot, keep bins well formed

  Histogram h;
  h.counts.assign(static_cast<size_t>(bins), 0);
  double width = (hi - lo) / double(bins);
  for (int64_t b = 0; b <= bins; ++b) {
    h.edges.push_back(lo + width * double(b));
  }
  for (double r : ratios) {
    int64_t b = static_cast<int64_t>((r - lo) / width);
    if (b >= bins) b = bins - 1;  // the maximum belongs to the last bin
    if (b < 0) b = 0;
    ++h.counts[static_cast<size_t>(b)];
  }
  return h;
}

std::string histogram_rows(const Histogram& hist) {
  std::string out;
  for (size_t b = 0; b < hist.counts.size(); ++b) {
    out += format_double(hist.edges[b], 6);
    out += '\t';
    out += format_double(hist.edges[b + 1], 6);
    out += '\t';
    out += std::to_string(hist.counts[b]);
    out += '\n';
  }
  return out;
}

EvalReport evaluate_corpus(const std::vector<std::string>& ids,
                           const std::vector<std::string>& refs,
                           const std::vector<std::string>& hyps,
                           const std::vector<int64_t>& produced_lens,
                           const std::vector<int64_t>& desired_lens) {
  size_t n = ids.size();
  if (refs.size() != n || hyps.size() != n || produced_lens.size() != n ||
      desired_lens.size() != n) {
    throw ConfigError("evaluate_corpus: input lists have different sizes");
  }
  if (n == 0) throw ConfigError("evaluate_corpus: nothing to evaluate");

  EvalReport report;
  report.wer = wer(refs, hyps);
  report.length_ratio = length_ratio(produced_lens, desired_lens);
  for (size_t i = 0; i < n; ++i) {
    UtteranceEval u;
    u.id = ids[i];
    int64_t ref_words = static_cast<int64_t>(metric_words(refs[i]).size());
    if (ref_words == 0) {
      throw ConfigError("evaluate_corpus: reference for '" + ids[i] + "' is empty");
    }
    u.wer = double(word_edit_distance(refs[i], hyps[i])) / double(ref_words);
    u.rouge1 = rouge_n(refs[i], hyps[i], 1);
    u.rouge2 = rouge_n(refs[i], hyps[i], 2);
    u.rougeL = rouge_l(refs[i], hyps[i]);
    u.produced_len = produced_lens[i];
    u.desired_len = desired_lens[i];
    u.ratio = double(produced_lens[i]) / double(desired_lens[i]);
    report.rouge1.precision += u.rouge1.precision;
    report.rouge1.recall += u.rouge1.recall;
    report.rouge1.f1 += u.rouge1.f1;
    report.rouge2.precision += u.rouge2.precision;
    report.rouge2.recall += u.rouge2.recall;
    report.rouge2.f1 += u.rouge2.f1;
    report.rougeL.precision += u.rougeL.precision;
    report.rougeL.recall += u.rougeL.recall;
    report.rougeL.f1 += u.rougeL.f1;
    report.utterances.push_back(std::move(u));
  }
  double dn = double(n);
  for (RougeScore* r : {&report.rouge1, &report.rouge2, &report.rougeL}) {
    r->precision /= dn;
    r->recall /= dn;
    r->f1 /= dn;
  }
  return report;
}

std::string eval_report_table(const EvalReport& report) {
  std::string out = "ratio\twer\tr1\tr2\trl\n";
  out += format_double(report.length_ratio, 4);
  out += '\t';
  out += format_double(report.wer, 4);
  out += '\t';
  out += format_double(report.rouge1.f1, 4);
  out += '\t';
  out += format_double(report.rouge2.f1, 4);
  out += '\t';
  out += format_double(report.rougeL.f1, 4);
  out += '\n';
  return out;
}

std::string eval_report_jsonl(const EvalReport& report) {
  std::string out;
  for (const UtteranceEval& u : report.utterances) {
    nlohmann::ordered_json j;
    j["id"] = u.id;
    j["ratio"] = u.ratio;
    j["wer"] = u.wer;
    auto rouge = [](const RougeScore& r) {
      return nlohmann::ordered_json{
          {"p", r.precision}, {"r", r.recall}, {"f1", r.f1}};
    };
    j["rouge1"] = rouge(u.rouge1);
    j["rouge2"] = rouge(u.rouge2);
    j["rougeL"] = rouge(u.rougeL);
    j["produced_len"] = u.produced_len;
    j["desired_len"] = u.desired_len;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace lenctl
