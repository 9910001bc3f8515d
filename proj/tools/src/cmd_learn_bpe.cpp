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
#include "lenctl/common.hpp"
#include "options.hpp"

namespace lenctl::cli {

namespace {

struct LearnBpeArgs {
  std::vector<std::string> corpora;
  int64_t merges = 500;
  std::string out_path;
  std::vector<std::string> tags;
  std::string text_field = "both";
};

void run_learn_bpe(const LearnBpeArgs& args) {
  if (args.corpora.empty()) {
    throw ConfigError("--corpus is required at least once");
  }
  require_value(args.out_path, "--out");
  bool want_verbatim = args.text_field == "both" || args.text_field == "verbatim";
  bool want_compressed = args.text_field == "both" || args.text_field == "compressed";
  if (!want_verbatim && !want_compressed) {
    throw ConfigError("--text-field must be verbatim, compressed or both");
  }

  std::vector<std::string> lines;
  for (const std::string& path : args.corpora) {
    for (const Utterance& u : load_corpus(path)) {
      if (want_verbatim) lines.push_back(u.verbatim);
      if (want_compressed && u.has_compressed()) lines.push_back(u.compressed);
    }
  }
  if (lines.empty()) {
    throw ConfigError("no text found in the given corpora for field '" +
                      args.text_field + "'");
  }

  MergeTable table = MergeTable::learn(lines, args.merges, args.tags);
  table.save(args.out_path);
  std::printf("learned %lld merges over %zu lines; vocabulary %lld ids "
              "(%zu tags) -> %s\n",
              static_cast<long long>(table.merge_count()), lines.size(),
              static_cast<long long>(table.vocab_size()), args.tags.size(),
              args.out_path.c_str());
}

}  // namespace

void register_learn_bpe(CLI::App& app) {
  CLI::App* cmd = app.add_subcommand(
      "learn-bpe", "Learn a subword merge table from corpus transcripts");
  auto args = std::make_shared<LearnBpeArgs>();
  auto settings = std::make_shared<Settings>(cmd);
  settings->add_strings("--corpus", args->corpora,
                        "Corpus file (repeat for several)");
  settings->add_int("--merges", args->merges, "Merge operations to learn (default 500)");
  settings->add_string("--out", args->out_path, "Merge table output path");
  settings->add_strings("--tags", args->tags,
                        "Language tags to reserve, e.g. <de> (repeat or comma separate)");
  settings->add_string("--text-field", args->text_field,
                       "Which transcripts to learn from: verbatim, compressed or "
                       "both (default both)");
  cmd->callback([args, settings]() {
    settings->finalize();
    run_learn_bpe(*args);
  });
}

}  // namespace lenctl::cli
