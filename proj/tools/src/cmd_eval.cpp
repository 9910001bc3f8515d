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
#include <filesystem>
#include <memory>

#include "common.hpp"
#include "lenctl/common.hpp"
#include "lenctl/decoding.hpp"
#include "lenctl/fileio.hpp"
#include "lenctl/metrics.hpp"
#include "options.hpp"

namespace lenctl::cli {

namespace {

struct EvalArgs {
  std::string refs_path;
  std::string ref_field = "verbatim";
  std::string hyps_path;
  std::string desired_path;
  std::string bpe_path;
  std::string out_dir;
  int64_t bins = 20;
};

void run_eval(const EvalArgs& args) {
  require_value(args.refs_path, "--refs");
  require_value(args.hyps_path, "--hyps");
  require_value(args.bpe_path, "--bpe");
  require_value(args.out_dir, "--out");

  MergeTable table = MergeTable::load(args.bpe_path);
  std::vector<Utterance> corpus = load_corpus(args.refs_path);
  std::vector<HypothesisRecord> hyp_records = load_hypotheses(args.hyps_path);

  std::map<std::string, const HypothesisRecord*> by_id;
  for (const HypothesisRecord& r : hyp_records) {
    if (!by_id.emplace(r.id, &r).second) {
      throw ConfigError("hypothesis file repeats id '" + r.id + "'");
    }
  }
  std::vector<std::string> missing_hyps;
  for (const Utterance& u : corpus) {
    if (!by_id.count(u.id)) missing_hyps.push_back(u.id);
  }
  if (!missing_hyps.empty()) {
    std::string list;
    size_t shown = std::min<size_t>(missing_hyps.size(), 10);
    for (size_t i = 0; i < shown; ++i) {
      if (i) list += ", ";
      list += missing_hyps[i];
    }
    if (missing_hyps.size() > shown) {
      list += ", ... (" + std::to_string(missing_hyps.size() - shown) + " more)";
    }
    throw ConfigError("hypotheses missing for ids: " + list);
  }
  if (hyp_records.size() != corpus.size()) {
    std::string list;
    size_t shown = 0;
    std::map<std::string, bool> known;
    for (const Utterance& u : corpus) known[u.id] = true;
    for (const HypothesisRecord& r : hyp_records) {
      if (known.count(r.id)) continue;
      if (shown) list += ", ";
      list += r.id;
      if (++shown == 10) break;
    }
    throw ConfigError("references missing for ids: " + list);
  }

  std::map<std::string, int64_t> desired_by_id;
  if (!args.desired_path.empty()) {
    desired_by_id = load_budgets(args.desired_path);
    std::vector<std::string> missing;
    for (const Utterance& u : corpus) {
      if (!desired_by_id.count(u.id)) missing.push_back(u.id);
    }
    if (!missing.empty()) {
      std::string list;
      size_t shown = std::min<size_t>(missing.size(), 10);
      for (size_t i = 0; i < shown; ++i) {
        if (i) list += ", ";
        list += missing[i];
      }
      throw ConfigError("desired lengths missing for ids: " + list);
    }
  }

  std::vector<std::string> ids;
  std::vector<std::string> refs;
  std::vector<std::string> hyps;
  std::vector<int64_t> produced;
  std::vector<int64_t> desired;
  std::vector<int64_t> verbatim_lens;
  for (const Utterance& u : corpus) {
    const std::string& ref = utterance_text(u, args.ref_field);
    const HypothesisRecord* hyp = by_id.at(u.id);
    ids.push_back(u.id);
    refs.push_back(ref);
    hyps.push_back(hyp->text);
    produced.push_back(hyp->content_tokens);
    int64_t ref_len = table.content_count(table.encode(ref));
    desired.push_back(!args.desired_path.empty() ? desired_by_id.at(u.id) : ref_len);
    verbatim_lens.push_back(table.content_count(table.encode(u.verbatim)));
  }

  EvalReport report = evaluate_corpus(ids, refs, hyps, produced, desired);
  Histogram hist = compression_histogram(verbatim_lens, desired, args.bins);

  std::filesystem::create_directories(args.out_dir);
  atomic_write_file(args.out_dir + "/report.txt", eval_report_table(report));
  atomic_write_file(args.out_dir + "/per_utterance.jsonl", eval_report_jsonl(report));
  atomic_write_file(args.out_dir + "/histogram.tsv", histogram_rows(hist));

  std::fputs(eval_report_table(report).c_str(), stdout);
  std::printf("%zu utterances -> %s/{report.txt, per_utterance.jsonl, histogram.tsv}\n",
              ids.size(), args.out_dir.c_str());
}

}  // namespace

void register_eval(CLI::App& app) {
  CLI::App* cmd = app.add_subcommand(
      "eval", "Score hypotheses against references");
  auto args = std::make_shared<EvalArgs>();
  auto settings = std::make_shared<Settings>(cmd);
  settings->add_string("--refs", args->refs_path, "Reference corpus (JSONL)");
  settings->add_string("--ref-field", args->ref_field,
                       "Reference transcript: verbatim or compressed "
                       "(default verbatim)");
  settings->add_string("--hyps", args->hyps_path, "Hypotheses file (TSV)");
  settings->add_string("--desired", args->desired_path,
                       "Desired lengths sidecar from decode (default: "
                       "reference lengths)");
  settings->add_string("--bpe", args->bpe_path, "Merge table path");
  settings->add_string("--out", args->out_dir, "Report output directory");
  settings->add_int("--bins", args->bins, "Histogram bins (default 20)");
  cmd->callback([args, settings]() {
    settings->finalize();
    run_eval(*args);
  });
}

}  // namespace lenctl::cli
