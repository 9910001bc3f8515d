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

#include <json.hpp>

#include "common.hpp"
#include "lenctl/common.hpp"
#include "lenctl/fileio.hpp"
#include "options.hpp"

namespace lenctl::cli {

namespace {

struct SynthArgs {
  std::string spec_path;
  std::string out_dir;
  uint64_t seed = 1;
};

struct FileStats {
  std::string file;
  int64_t count = 0;
  double mean_words = 0.0;
  double mean_compressed = -1.0;  // negative: no compressed side
};

FileStats stats_for(const std::string& file, const std::vector<Utterance>& corpus) {
  FileStats s;
  s.file = file;
  s.count = static_cast<int64_t>(corpus.size());
  int64_t words = 0;
  int64_t compressed = 0;
  bool any_compressed = false;
  for (const Utterance& u : corpus) {
    words += static_cast<int64_t>(split_ws(u.verbatim).size());
    if (u.has_compressed()) {
      compressed += static_cast<int64_t>(split_ws(u.compressed).size());
      any_compressed = true;
    }
  }
  if (s.count > 0) {
    s.mean_words = static_cast<double>(words) / static_cast<double>(s.count);
    if (any_compressed) {
      s.mean_compressed = static_cast<double>(compressed) / static_cast<double>(s.count);
    }
  }
  return s;
}

void print_stats(const std::vector<FileStats>& stats) {
  std::printf("%-28s %8s %12s %12s\n", "file", "count", "mean_words", "mean_compr");
  for (const FileStats& s : stats) {
    std::printf("%-28s %8lld %12.2f ", s.file.c_str(),
                static_cast<long long>(s.count), s.mean_words);
    if (s.mean_compressed >= 0.0) {
      std::printf("%12.2f\n", s.mean_compressed);
    } else {
      std::printf("%12s\n", "-");
    }
  }
}

void write_split(const std::string& dir, const std::string& file,
                 const std::vector<Utterance>& corpus,
                 std::vector<FileStats>& stats) {
  save_corpus(dir + "/" + file, corpus);
  stats.push_back(stats_for(file, corpus));
}

void run_synth(const SynthArgs& args) {
  require_value(args.spec_path, "--spec");
  require_value(args.out_dir, "--out");
  SynthSpec spec = synth_spec_from_json(read_file(args.spec_path), args.spec_path);
  std::filesystem::create_directories(args.out_dir);

  std::vector<FileStats> stats;
  if (spec.tags.empty()) {
    SynthCorpora corpora = synth_transcription(spec, args.seed);
    if (spec.filler_rate > 0.0 || spec.paraphrase_rule_count > 0) {
      corpora.train = synth_compression(std::move(corpora.train), spec, args.seed);
      corpora.dev = synth_compression(std::move(corpora.dev), spec, args.seed);
      corpora.test = synth_compression(std::move(corpora.test), spec, args.seed);
    }
    write_split(args.out_dir, "train.jsonl", corpora.train, stats);
    write_split(args.out_dir, "dev.jsonl", corpora.dev, stats);
    write_split(args.out_dir, "test.jsonl", corpora.test, stats);
  } else {
    std::map<std::string, SynthCorpora> by_tag = synth_parallel(spec, args.seed);
    std::map<std::string, std::vector<Utterance>> train_by_tag;
    std::map<std::string, std::vector<Utterance>> dev_by_tag;
    std::map<std::string, std::vector<Utterance>> test_by_tag;
    for (const auto& [tag, corpora] : by_tag) {
      std::string inner = tag.substr(1, tag.size() - 2);
      write_split(args.out_dir, inner + "-train.jsonl", corpora.train, stats);
      write_split(args.out_dir, inner + "-dev.jsonl", corpora.dev, stats);
      write_split(args.out_dir, inner + "-test.jsonl", corpora.test, stats);
      train_by_tag[tag] = corpora.train;
      dev_by_tag[tag] = corpora.dev;
      test_by_tag[tag] = corpora.test;
    }
    // Training directions exclude same-tag pairs; the zero-shot test set is
    // exactly those same-tag pairs, held out by construction.
    auto cross = all_cross_directions(spec.tags);
    std::vector<std::pair<std::string, std::string>> same;
    for (const std::string& tag : spec.tags) same.emplace_back(tag, tag);
    write_split(args.out_dir, "directions-train.jsonl",
                tag_multilingual(train_by_tag, cross), stats);
    write_split(args.out_dir, "directions-dev.jsonl",
                tag_multilingual(dev_by_tag, cross), stats);
    write_split(args.out_dir, "zeroshot-test.jsonl",
                tag_multilingual(test_by_tag, same), stats);
  }

  nlohmann::ordered_json manifest;
  manifest["seed"] = args.seed;
  manifest["spec"] = nlohmann::ordered_json::parse(synth_spec_to_json(spec));
  atomic_write_file(args.out_dir + "/manifest.json", manifest.dump(2) + "\n");

  print_stats(stats);
  std::printf("wrote %zu files to %s\n", stats.size() + 1, args.out_dir.c_str());
}

}  // namespace

void register_synth(CLI::App& app) {
  CLI::App* cmd = app.add_subcommand(
      "synth", "Generate synthetic feature/transcript corpora from a spec file");
  auto args = std::make_shared<SynthArgs>();
  auto settings = std::make_shared<Settings>(cmd);
  settings->add_string("--spec", args->spec_path, "Synthesis spec (JSON)");
  settings->add_string("--out", args->out_dir, "Output directory");
  settings->add_seed("--seed", args->seed, "Master seed (default 1)");
  cmd->callback([args, settings]() {
    settings->finalize();
    run_synth(*args);
  });
}

}  // namespace lenctl::cli
