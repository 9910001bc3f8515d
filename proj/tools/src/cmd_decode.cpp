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

#include <cstdio>
#include <memory>

#include "common.hpp"
#include "lenctl/checkpoint.hpp"
#include "lenctl/common.hpp"
#include "lenctl/decoding.hpp"
#include "lenctl/fileio.hpp"
#include "options.hpp"

namespace lenctl::cli {

namespace {

struct DecodeArgs {
  std::string corpus_path;
  std::string model_path;
  std::string bpe_path;
  std::string out_path;
  std::string budgets_out;
  std::string budget = "ref";
  std::string baseline_path;
  std::string reference_field = "verbatim";
  bool forced_stop = false;
  int64_t beam = 1;
  int64_t max_len = 0;
};

enum class BudgetPolicy { kReference, kMinBaseline, kFixed };

BudgetPolicy parse_policy(const std::string& text, int64_t& fixed) {
  if (text == "ref") return BudgetPolicy::kReference;
  if (text == "min-baseline") return BudgetPolicy::kMinBaseline;
  if (text.rfind("fixed:", 0) == 0) {
    fixed = parse_int(text.substr(6), "--budget");
    if (fixed < 0) throw ConfigError("--budget fixed:N needs N >= 0");
    return BudgetPolicy::kFixed;
  }
  throw ConfigError("--budget must be ref, min-baseline or fixed:N, got '" + text +
                    "'");
}

std::string default_budgets_path(const std::string& out) {
  const std::string suffix = ".tsv";
  if (out.size() > suffix.size() &&
      out.compare(out.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return out.substr(0, out.size() - suffix.size()) + ".budgets.tsv";
  }
  return out + ".budgets.tsv";
}

void report_missing(const std::vector<std::string>& missing, const std::string& what) {
  if (missing.empty()) return;
  std::string list;
  size_t shown = std::min<size_t>(missing.size(), 10);
  for (size_t i = 0; i < shown; ++i) {
    if (i) list += ", ";
    list += missing[i];
  }
  if (missing.size() > shown) {
    list += ", ... (" + std::to_string(missing.size() - shown) + " more)";
  }
  throw ConfigError(what + " missing for ids: " + list);
}

void run_decode(const DecodeArgs& args) {
  require_value(args.corpus_path, "--corpus");
  require_value(args.model_path, "--model");
  require_value(args.bpe_path, "--bpe");
  require_value(args.out_path, "--out");
  if (args.beam < 1) throw ConfigError("--beam must be at least 1");

  int64_t fixed = 0;
  BudgetPolicy policy = parse_policy(args.budget, fixed);
  std::map<std::string, int64_t> baseline;
  if (policy == BudgetPolicy::kMinBaseline) {
    require_value(args.baseline_path, "--baseline");
    for (const HypothesisRecord& r : load_hypotheses(args.baseline_path)) {
      baseline[r.id] = r.content_tokens;
    }
  }

  ModelParams params = model_from_checkpoint(Checkpoint::load(args.model_path));
  adopt_model_dtype(params);
  MergeTable table = MergeTable::load(args.bpe_path);
  std::vector<Utterance> corpus = load_corpus(args.corpus_path);

  if (policy == BudgetPolicy::kMinBaseline) {
    std::vector<std::string> missing;
    for (const Utterance& u : corpus) {
      if (!baseline.count(u.id)) missing.push_back(u.id);
    }
    report_missing(missing, "baseline hypotheses");
  }

  std::vector<HypothesisRecord> records;
  std::vector<std::string> ids;
  std::vector<int64_t> budgets;
  for (const Utterance& u : corpus) {
    int64_t ref_len = table.content_count(table.encode(utterance_text(u, args.reference_field)));
    int64_t budget = 0;
    switch (policy) {
      case BudgetPolicy::kReference:
        budget = choose_budget(ref_len, -1);
        break;
      case BudgetPolicy::kMinBaseline:
        budget = choose_budget(ref_len, baseline.at(u.id));
        break;
      case BudgetPolicy::kFixed:
        budget = fixed;
        break;
    }

    DecodeConfig cfg;
    cfg.budget = budget;
    cfg.beam_size = args.beam;
    cfg.max_len = args.max_len;
    cfg.forced_stop = args.forced_stop;
    int32_t tag = u.has_tags() ? table.tag_id(u.tags.target) : -1;
    Hypothesis hyp = args.beam == 1
                         ? decode_greedy(params, table, u.features, cfg, tag)
                         : decode_beam(params, table, u.features, cfg, tag);

    HypothesisRecord rec;
    rec.id = u.id;
    rec.text = table.decode(hyp.tokens);
    rec.content_tokens = table.content_count(hyp.tokens);
    rec.log_prob = hyp.log_prob;
    records.push_back(std::move(rec));
    ids.push_back(u.id);
    budgets.push_back(budget);
  }

  save_hypotheses(args.out_path, records);
  std::string budgets_path =
      args.budgets_out.empty() ? default_budgets_path(args.out_path) : args.budgets_out;
  save_budgets(budgets_path, ids, budgets);

  std::vector<int64_t> produced;
  produced.reserve(records.size());
  for (const HypothesisRecord& r : records) produced.push_back(r.content_tokens);
  std::printf("decoded %zu utterances (beam %lld%s)\n", records.size(),
              static_cast<long long>(args.beam),
              args.forced_stop ? ", forced stop" : "");
  std::printf("mean budget %.2f, mean output length %.2f\n", mean_length(budgets),
              mean_length(produced));
  std::printf("hypotheses -> %s\nbudgets -> %s\n", args.out_path.c_str(),
              budgets_path.c_str());
}

}  // namespace

void register_decode(CLI::App& app) {
  CLI::App* cmd = app.add_subcommand(
      "decode", "Decode a corpus under a length budget");
  auto args = std::make_shared<DecodeArgs>();
  auto settings = std::make_shared<Settings>(cmd);
  settings->add_string("--corpus", args->corpus_path, "Corpus to decode (JSONL)");
  settings->add_string("--model", args->model_path, "Model checkpoint");
  settings->add_string("--bpe", args->bpe_path, "Merge table path");
  settings->add_string("--out", args->out_path, "Hypotheses output (TSV)");
  settings->add_string("--budgets-out", args->budgets_out,
                       "Budgets sidecar path (default: derived from --out)");
  settings->add_string("--budget", args->budget,
                       "Budget policy: ref, min-baseline or fixed:N (default ref)");
  settings->add_string("--baseline", args->baseline_path,
                       "Baseline hypotheses (required by min-baseline)");
  settings->add_string("--reference-field", args->reference_field,
                       "Reference transcript for budget=ref: verbatim or "
                       "compressed (default verbatim)");
  settings->add_switch("--forced-stop", args->forced_stop,
                       "Emit the end symbol as soon as the budget is used up");
  settings->add_int("--beam", args->beam, "Beam width (default 1, greedy)");
  settings->add_int("--max-len", args->max_len,
                    "Safety cap on decode length (default: the model's max)");
  cmd->callback([args, settings]() {
    settings->finalize();
    run_decode(*args);
  });
}

}  // namespace lenctl::cli
