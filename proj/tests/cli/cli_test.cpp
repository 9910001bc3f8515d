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

// End-to-end checks that drive the installed binary: each stage of the
// pipeline runs once into a shared scratch directory, then the tests pick
// the artifacts apart with the library.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "lenctl/bpe.hpp"
#include "lenctl/checkpoint.hpp"
#include "lenctl/data.hpp"
#include "lenctl/decoding.hpp"
#include "lenctl/fileio.hpp"
#include "lenctl/model.hpp"
#include "testutil.hpp"

using namespace lenctl;

namespace {

#ifndef LENCTL_BIN
#error "LENCTL_BIN must point at the binary under test"
#endif

const std::string kBin = LENCTL_BIN;

std::string shellq(const std::string& s) { return "'" + s + "'"; }

struct Pipeline {
  testutil::TempDir dir{"cli"};
  std::string spec_path, corpus_dir, bpe_path, run_dir, hyps_path, eval_dir;
  bool ok = false;

  Pipeline() {
    spec_path = dir.file("spec.json");
    corpus_dir = dir.file("corpus");
    bpe_path = dir.file("bpe.txt");
    run_dir = dir.file("run");
    hyps_path = dir.file("hyps.tsv");
    eval_dir = dir.file("eval");

    SynthSpec spec;
    spec.vocab_size = 12;
    spec.feature_dim = 6;
    spec.frames_per_token = 2;
    spec.noise_sigma = 0.05;
    spec.filler_rate = 0.3;
    spec.filler_vocab_size = 3;
    spec.paraphrase_rule_count = 1;
    spec.min_tokens = 3;
    spec.max_tokens = 8;
    spec.train_size = 40;
    spec.dev_size = 8;
    spec.test_size = 8;
    atomic_write_file(spec_path, synth_spec_to_json(spec));

    if (testutil::run_command(kBin + " synth --spec " + shellq(spec_path) +
                                  " --out " + shellq(corpus_dir) + " --seed 5",
                              dir.file("synth.log")) != 0) {
      return;
    }
    if (testutil::run_command(kBin + " learn-bpe --corpus " +
                                  shellq(corpus_dir + "/train.jsonl") +
                                  " --merges 40 --out " + shellq(bpe_path),
                              dir.file("bpe.log")) != 0) {
      return;
    }
    if (testutil::run_command(kBin + " train --corpus " +
                                  shellq(corpus_dir + "/train.jsonl") + " --heldout " +
                                  shellq(corpus_dir + "/dev.jsonl") + " --bpe " +
                                  shellq(bpe_path) + " --out " + shellq(run_dir) +
                                  " --target verbatim"
                                  " --conditioning sinusoidal-countdown"
                                  " --model-dim 16 --ffn-dim 32 --encoder-layers 1"
                                  " --decoder-layers 1 --heads 2 --max-len 24"
                                  " --batch-size 8 --warmup-steps 10 --peak-lr 2e-3"
                                  " --max-steps 30 --seed 1",
                              dir.file("train.log")) != 0) {
      return;
    }
    if (testutil::run_command(kBin + " decode --corpus " +
                                  shellq(corpus_dir + "/test.jsonl") + " --model " +
                                  shellq(run_dir + "/model.ckpt") + " --bpe " +
                                  shellq(bpe_path) + " --out " + shellq(hyps_path) +
                                  " --budget ref --forced-stop",
                              dir.file("decode.log")) != 0) {
      return;
    }
    if (testutil::run_command(kBin + " eval --refs " +
                                  shellq(corpus_dir + "/test.jsonl") + " --hyps " +
                                  shellq(hyps_path) + " --bpe " + shellq(bpe_path) +
                                  " --desired " +
                                  shellq(dir.file("hyps.budgets.tsv")) + " --out " +
                                  shellq(eval_dir),
                              dir.file("eval.log")) != 0) {
      return;
    }
    ok = true;
  }
};

Pipeline& pipeline() {
  static Pipeline p;
  return p;
}

std::map<std::string, int64_t> read_budget_rows(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  REQUIRE(!lines.empty());
  REQUIRE(lines.front() == "id\tbudget");
  std::map<std::string, int64_t> out;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    size_t tab = lines[i].find('\t');
    REQUIRE(tab != std::string::npos);
    out[lines[i].substr(0, tab)] = std::stoll(lines[i].substr(tab + 1));
  }
  return out;
}

}  // namespace

TEST_CASE("the binary reports a version and insists on a subcommand") {
  testutil::TempDir dir("cli-basic");
  std::string log = dir.file("version.log");
  CHECK(testutil::run_command(kBin + " --version", log) == 0);
  CHECK(read_file(log).find("lenctl 0.1.0") != std::string::npos);
  CHECK(testutil::run_command(kBin, dir.file("bare.log")) != 0);
  CHECK(testutil::run_command(kBin + " no-such-command", dir.file("bad.log")) != 0);
}

TEST_CASE("synthesis writes loadable splits and an echo of its inputs") {
  Pipeline& p = pipeline();
  REQUIRE(p.ok);
  std::vector<Utterance> train = load_corpus(p.corpus_dir + "/train.jsonl");
  std::vector<Utterance> dev = load_corpus(p.corpus_dir + "/dev.jsonl");
  std::vector<Utterance> test = load_corpus(p.corpus_dir + "/test.jsonl");
  CHECK(train.size() == 40);
  CHECK(dev.size() == 8);
  CHECK(test.size() == 8);
  CHECK(train.front().has_compressed());

  nlohmann::json manifest =
      nlohmann::json::parse(read_file(p.corpus_dir + "/manifest.json"));
  CHECK(manifest.at("seed") == 5);
  CHECK(manifest.at("spec").at("vocab_size") == 12);
}

TEST_CASE("synthesis rejects a spec with a stray key") {
  testutil::TempDir dir("cli-spec");
  std::string bad = dir.file("bad.json");
  atomic_write_file(bad, R"({"vocab_size": 10, "frames_per_word": 2,
                             "train_size": 4})");
  std::string log = dir.file("synth.log");
  CHECK(testutil::run_command(kBin + " synth --spec " + shellq(bad) + " --out " +
                                  shellq(dir.file("c")) + " --seed 1",
                              log) != 0);
  CHECK(read_file(log).find("frames_per_word") != std::string::npos);
}

TEST_CASE("the learned merge table loads and rebuilds identically") {
  Pipeline& p = pipeline();
  REQUIRE(p.ok);
  MergeTable table = MergeTable::load(p.bpe_path);
  CHECK(table.merge_count() <= 40);
  CHECK(table.vocab_size() > kNumReservedIds);

  testutil::TempDir dir("cli-bpe");
  std::string again = dir.file("bpe2.txt");
  REQUIRE(testutil::run_command(kBin + " learn-bpe --corpus " +
                                    shellq(p.corpus_dir + "/train.jsonl") +
                                    " --merges 40 --out " + shellq(again),
                                dir.file("bpe.log")) == 0);
  CHECK(read_file(again) == read_file(p.bpe_path));
}

TEST_CASE("settings stack up as config file, then environment, then flags") {
  Pipeline& p = pipeline();
  REQUIRE(p.ok);
  testutil::TempDir dir("cli-layers");
  std::string corpus = shellq(p.corpus_dir + "/train.jsonl");

  std::string by_flag = dir.file("flag.txt");
  REQUIRE(testutil::run_command(kBin + " learn-bpe --corpus " + corpus +
                                    " --merges 10 --out " + shellq(by_flag),
                                dir.file("a.log")) == 0);

  // Environment variable instead of the flag.
  std::string by_env = dir.file("env.txt");
  REQUIRE(testutil::run_command("LENCTL_MERGES=10 " + kBin + " learn-bpe --corpus " +
                                    corpus + " --out " + shellq(by_env),
                                dir.file("b.log")) == 0);
  CHECK(read_file(by_env) == read_file(by_flag));

  // A flag wins over a contradicting environment value.
  std::string flag_wins = dir.file("flagwins.txt");
  REQUIRE(testutil::run_command("LENCTL_MERGES=40 " + kBin + " learn-bpe --corpus " +
                                    corpus + " --merges 10 --out " +
                                    shellq(flag_wins),
                                dir.file("c.log")) == 0);
  CHECK(read_file(flag_wins) == read_file(by_flag));

  // Config file is the weakest layer.
  std::string cfg = dir.file("settings.cfg");
  atomic_write_file(cfg, "# defaults for this corpus\nmerges = 10\n");
  std::string by_cfg = dir.file("cfg.txt");
  REQUIRE(testutil::run_command(kBin + " learn-bpe --config " + shellq(cfg) +
                                    " --corpus " + corpus + " --out " + shellq(by_cfg),
                                dir.file("d.log")) == 0);
  CHECK(read_file(by_cfg) == read_file(by_flag));

  std::string env_wins = dir.file("envwins.txt");
  atomic_write_file(cfg, "merges = 40\n");
  REQUIRE(testutil::run_command("LENCTL_MERGES=10 " + kBin + " learn-bpe --config " +
                                    shellq(cfg) + " --corpus " + corpus + " --out " +
                                    shellq(env_wins),
                                dir.file("e.log")) == 0);
  CHECK(read_file(env_wins) == read_file(by_flag));
}

TEST_CASE("training leaves a loadable model, a resume point and a log") {
  Pipeline& p = pipeline();
  REQUIRE(p.ok);
  ModelParams params =
      model_from_checkpoint(Checkpoint::load(p.run_dir + "/model.ckpt"));
  CHECK(params.config.model_dim == 16);
  CHECK(params.config.conditioning == LengthConditioning::kSinusoidalCountdown);

  std::vector<std::string> lines = read_lines(p.run_dir + "/train_log.jsonl");
  int64_t steps = 0, epochs = 0;
  for (const std::string& line : lines) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    if (j.at("type") == "step") ++steps;
    if (j.at("type") == "epoch") ++epochs;
  }
  CHECK(steps == 30);
  CHECK(epochs >= 1);

  Checkpoint state = Checkpoint::load(p.run_dir + "/train_state.ckpt");
  CHECK(state.kind == "train");
  CHECK(state.meta.at("opt_step") == "30");
}

TEST_CASE("an interrupted training run resumes to the same model bytes") {
  Pipeline& p = pipeline();
  REQUIRE(p.ok);
  testutil::TempDir dir("cli-resume");
  std::string common = " --corpus " + shellq(p.corpus_dir + "/train.jsonl") +
                       " --heldout " + shellq(p.corpus_dir + "/dev.jsonl") +
                       " --bpe " + shellq(p.bpe_path) +
                       " --target verbatim"
                       " --conditioning sinusoidal-countdown"
                       " --model-dim 16 --ffn-dim 32 --encoder-layers 1"
                       " --decoder-layers 1 --heads 2 --max-len 24"
                       " --batch-size 8 --warmup-steps 10 --peak-lr 2e-3 --seed 1";

  std::string full_dir = dir.file("full");
  REQUIRE(testutil::run_command(kBin + " train --out " + shellq(full_dir) + common +
                                    " --max-steps 30",
                                dir.file("full.log")) == 0);

  std::string half_dir = dir.file("half");
  REQUIRE(testutil::run_command(kBin + " train --out " + shellq(half_dir) + common +
                                    " --max-steps 15",
                                dir.file("half.log")) == 0);
  REQUIRE(testutil::run_command(kBin + " train --out " + shellq(half_dir) + common +
                                    " --max-steps 30 --resume",
                                dir.file("resume.log")) == 0);

  CHECK(read_file(half_dir + "/model.ckpt") == read_file(full_dir + "/model.ckpt"));
  // The pipeline's own single-shot run used the same settings, so three
  // independent trainings agree byte for byte.
  CHECK(read_file(full_dir + "/model.ckpt") == read_file(p.run_dir + "/model.ckpt"));
}

TEST_CASE("decoding writes hypotheses with a budget sidecar that is obeyed") {
  Pipeline& p = pipeline();
  REQUIRE(p.ok);
  std::vector<HypothesisRecord> hyps = load_hypotheses(p.hyps_path);
  std::vector<Utterance> test = load_corpus(p.corpus_dir + "/test.jsonl");
  REQUIRE(hyps.size() == test.size());

  std::map<std::string, int64_t> budgets =
      read_budget_rows(pipeline().dir.file("hyps.budgets.tsv"));
  REQUIRE(budgets.size() == hyps.size());

  MergeTable table = MergeTable::load(p.bpe_path);
  for (size_t i = 0; i < hyps.size(); ++i) {
    CHECK(hyps[i].id == test[i].id);
    REQUIRE(budgets.count(hyps[i].id) == 1);
    // Forced stop: never a single token past the budget.
    CHECK(hyps[i].content_tokens <= budgets.at(hyps[i].id));
    CHECK(hyps[i].content_tokens ==
          table.content_count(table.encode(hyps[i].text)));
  }
}

TEST_CASE("a fixed budget pins every utterance to the same allowance") {
  Pipeline& p = pipeline();
  REQUIRE(p.ok);
  testutil::TempDir dir("cli-fixed");
  std::string out = dir.file("fixed.tsv");
  REQUIRE(testutil::run_command(kBin + " decode --corpus " +
                                    shellq(p.corpus_dir + "/test.jsonl") +
                                    " --model " + shellq(p.run_dir + "/model.ckpt") +
                                    " --bpe " + shellq(p.bpe_path) + " --out " +
                                    shellq(out) + " --budget fixed:2 --forced-stop",
                                dir.file("decode.log")) == 0);
  for (const auto& [id, budget] : read_budget_rows(dir.file("fixed.budgets.tsv"))) {
    CHECK(budget == 2);
  }
  for (const HypothesisRecord& r : load_hypotheses(out)) {
    CHECK(r.content_tokens <= 2);
  }

  std::string bad = dir.file("bad.tsv");
  std::string log = dir.file("badbudget.log");
  CHECK(testutil::run_command(kBin + " decode --corpus " +
                                  shellq(p.corpus_dir + "/test.jsonl") + " --model " +
                                  shellq(p.run_dir + "/model.ckpt") + " --bpe " +
                                  shellq(p.bpe_path) + " --out " + shellq(bad) +
                                  " --budget sometimes",
                              log) != 0);
  CHECK(read_file(log).find("--budget") != std::string::npos);
}

TEST_CASE("decoding the same corpus twice gives identical bytes") {
  Pipeline& p = pipeline();
  REQUIRE(p.ok);
  testutil::TempDir dir("cli-det");
  std::string again = dir.file("again.tsv");
  REQUIRE(testutil::run_command(kBin + " decode --corpus " +
                                    shellq(p.corpus_dir + "/test.jsonl") +
                                    " --model " + shellq(p.run_dir + "/model.ckpt") +
                                    " --bpe " + shellq(p.bpe_path) + " --out " +
                                    shellq(again) + " --budget ref --forced-stop",
                                dir.file("decode.log")) == 0);
  CHECK(read_file(again) == read_file(p.hyps_path));
  CHECK(read_file(dir.file("again.budgets.tsv")) ==
        read_file(pipeline().dir.file("hyps.budgets.tsv")));
}

TEST_CASE("evaluation writes the report triple with sensible numbers") {
  Pipeline& p = pipeline();
  REQUIRE(p.ok);
  std::string report = read_file(p.eval_dir + "/report.txt");
  CHECK(report.rfind("ratio\twer", 0) == 0);

  std::vector<std::string> lines = read_lines(p.eval_dir + "/per_utterance.jsonl");
  int64_t rows = 0;
  for (const std::string& line : lines) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    CHECK(j.contains("id"));
    CHECK(j.at("wer").get<double>() >= 0.0);
    CHECK(j.at("ratio").get<double>() >= 0.0);
    ++rows;
  }
  CHECK(rows == 8);
  CHECK(!read_file(p.eval_dir + "/histogram.tsv").empty());
}

TEST_CASE("missing required flags name themselves and fail fast") {
  Pipeline& p = pipeline();
  REQUIRE(p.ok);
  testutil::TempDir dir("cli-errors");
  std::string log = dir.file("train.log");
  CHECK(testutil::run_command(kBin + " train --out " + shellq(dir.file("r")) +
                                  " --bpe " + shellq(p.bpe_path),
                              log) != 0);
  CHECK(read_file(log).find("--corpus") != std::string::npos);

  std::string log2 = dir.file("cond.log");
  CHECK(testutil::run_command(kBin + " train --corpus " +
                                  shellq(p.corpus_dir + "/train.jsonl") + " --bpe " +
                                  shellq(p.bpe_path) + " --out " +
                                  shellq(dir.file("r2")) +
                                  " --conditioning sinusoidal --max-steps 1",
                              log2) != 0);
  CHECK(read_file(log2).find("conditioning") != std::string::npos);
}
