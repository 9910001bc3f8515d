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

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "lenctl/bpe.hpp"
#include "lenctl/common.hpp"
#include "lenctl/training.hpp"
#include "testutil.hpp"

using namespace lenctl;

namespace {

MergeTable tiny_table() {
  return MergeTable::learn({"aa bb cc dd", "aa bb", "cc dd aa"}, 6, {"<xx>", "<yy>"});
}

ModelConfig tiny_config(const MergeTable& table) {
  ModelConfig c;
  c.feature_dim = 4;
  c.model_dim = 8;
  c.ffn_dim = 16;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.heads = 2;
  c.vocab_size = table.vocab_size();
  c.max_len = 32;
  c.max_trained_length = 10;
  return c;
}

TrainExample make_example(const MergeTable& table, const std::string& text,
                          uint64_t seed) {
  TrainExample ex;
  ex.content_ids = table.encode(text);
  int64_t frames = static_cast<int64_t>(ex.content_ids.size()) * 2 + 1;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  ex.features = Tensor({frames, 4});
  for (double& v : ex.features.values()) v = dist(rng);
  return ex;
}

std::vector<TrainExample> small_corpus(const MergeTable& table) {
  return {make_example(table, "aa bb", 1), make_example(table, "cc dd", 2),
          make_example(table, "aa bb cc", 3), make_example(table, "dd", 4)};
}

TrainingSchedule quick_schedule(int64_t steps) {
  TrainingSchedule s;
  s.peak_lr = 1e-2;
  s.warmup_steps = 5;
  s.batch_size = 2;
  s.max_steps = steps;
  s.seed = 17;
  return s;
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (const auto& [name, tensor] : a.tensors) {
    auto it = b.tensors.find(name);
    if (it == b.tensors.end() || it->second != tensor) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("learning rate warms up linearly then decays with inverse sqrt") {
  TrainingSchedule s;
  s.peak_lr = 1e-3;
  s.warmup_steps = 10;
  CHECK(schedule_lr(s, 1) == doctest::Approx(1e-4));
  CHECK(schedule_lr(s, 5) == doctest::Approx(5e-4));
  CHECK(schedule_lr(s, 10) == doctest::Approx(1e-3));
  CHECK(schedule_lr(s, 40) == doctest::Approx(1e-3 * std::sqrt(10.0 / 40.0)));
  CHECK(schedule_lr(s, 1000) < schedule_lr(s, 100));
  CHECK_THROWS_AS(schedule_lr(s, 0), ConfigError);

  s.phase = TrainPhase::kAdapt;
  s.adapt_lr_factor = 0.25;
  CHECK(schedule_lr(s, 10) == doctest::Approx(2.5e-4));
}

TEST_CASE("schedule validation rejects out-of-range settings") {
  TrainingSchedule s = quick_schedule(10);
  s.peak_lr = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = quick_schedule(10);
  s.adapt_lr_factor = 1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = quick_schedule(10);
  s.batch_size = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = quick_schedule(10);
  s.adam_beta2 = 1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = quick_schedule(10);
  s.max_steps = -1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK_NOTHROW(quick_schedule(0).validate());
}

TEST_CASE("phase names round trip") {
  CHECK(phase_from_name(phase_name(TrainPhase::kBase)) == TrainPhase::kBase);
  CHECK(phase_from_name(phase_name(TrainPhase::kAdapt)) == TrainPhase::kAdapt);
  CHECK_THROWS_AS(phase_from_name("warm"), ConfigError);
}

TEST_CASE("batch plans are deterministic and cover every example once") {
  std::vector<int64_t> lengths = {5, 9, 3, 7, 7, 3, 9, 5, 11, 2, 6, 4};
  auto a = epoch_batches(lengths, 3, 42, 2);
  auto b = epoch_batches(lengths, 3, 42, 2);
  CHECK(a == b);

  std::set<int64_t> seen;
  for (const auto& batch : a) {
    CHECK(batch.size() <= 3);
    CHECK(!batch.empty());
    for (int64_t i : batch) {
      CHECK(seen.insert(i).second);
      CHECK(i >= 0);
      CHECK(i < static_cast<int64_t>(lengths.size()));
    }
  }
  CHECK(seen.size() == lengths.size());

  // A new epoch reshuffles; across several epochs the plan must not repeat.
  bool any_difference = false;
  for (int64_t epoch = 3; epoch < 8; ++epoch) {
    if (epoch_batches(lengths, 3, 42, epoch) != a) any_difference = true;
  }
  CHECK(any_difference);
}

TEST_CASE("batch plans group examples of similar cost") {
  std::vector<int64_t> lengths = {1, 10, 1, 10};
  for (int64_t epoch = 0; epoch < 6; ++epoch) {
    auto plan = epoch_batches(lengths, 2, 9, epoch);
    REQUIRE(plan.size() == 2);
    for (const auto& batch : plan) {
      REQUIRE(batch.size() == 2);
      CHECK(lengths[static_cast<size_t>(batch[0])] ==
            lengths[static_cast<size_t>(batch[1])]);
    }
  }
  CHECK_THROWS_AS(epoch_batches({}, 2, 1, 0), ConfigError);
  CHECK_THROWS_AS(epoch_batches({1, 2}, 0, 1, 0), ConfigError);
}

TEST_CASE("optimizer state starts at zero with matching shapes") {
  testutil::DtypeGuard guard(DType::kF64);
  MergeTable table = tiny_table();
  ModelParams p = ModelParams::init(tiny_config(table), 1);
  AdamState opt = AdamState::init(p);
  CHECK(opt.step == 0);
  CHECK(opt.m.size() == p.tensors.size());
  CHECK(opt.v.size() == p.tensors.size());
  for (const auto& [name, tensor] : p.tensors) {
    REQUIRE(opt.m.count(name) == 1);
    CHECK(opt.m.at(name).shape() == tensor.shape());
    for (double v : opt.m.at(name).values()) CHECK(v == 0.0);
  }
}

TEST_CASE("training memorizes a single utterance") {
  testutil::DtypeGuard guard(DType::kF64);
  MergeTable table = tiny_table();
  ModelParams p = ModelParams::init(tiny_config(table), 5);
  AdamState opt = AdamState::init(p);
  std::vector<TrainExample> corpus = {make_example(table, "aa bb cc dd", 7)};
  TrainingSchedule s = quick_schedule(80);
  s.batch_size = 1;

  TrainLog log = train(p, opt, corpus, {}, s);
  REQUIRE(log.steps.size() == 80);
  CHECK(log.steps.front().step == 1);
  CHECK(log.steps.back().step == 80);
  CHECK(opt.step == 80);
  for (const StepRecord& r : log.steps) {
    CHECK(std::isfinite(r.loss));
    CHECK(r.lr == schedule_lr(s, r.step));
  }

  // Windowed because single steps jitter: the end must sit far below the start.
  auto mean_loss = [&](size_t from, size_t to) {
    double sum = 0.0;
    for (size_t i = from; i < to; ++i) sum += log.steps[i].loss;
    return sum / static_cast<double>(to - from);
  };
  double head = mean_loss(0, 10);
  double tail = mean_loss(log.steps.size() - 10, log.steps.size());
  CHECK(tail < head * 0.5);
  CHECK(teacher_forced_accuracy(p, corpus) == 1.0);
}

TEST_CASE("a finished schedule leaves the model untouched") {
  testutil::DtypeGuard guard(DType::kF64);
  MergeTable table = tiny_table();
  ModelParams p = ModelParams::init(tiny_config(table), 5);
  ModelParams before = p;
  AdamState opt = AdamState::init(p);
  opt.step = 10;
  TrainLog log = train(p, opt, small_corpus(table), {}, quick_schedule(10));
  CHECK(log.steps.empty());
  CHECK(opt.step == 10);
  CHECK(params_equal(p, before));
}

TEST_CASE("an interrupted run resumes to the exact same weights") {
  testutil::DtypeGuard guard(DType::kF64);
  MergeTable table = tiny_table();
  std::vector<TrainExample> corpus = small_corpus(table);

  // Uninterrupted reference run.
  ModelParams full = ModelParams::init(tiny_config(table), 5);
  AdamState full_opt = AdamState::init(full);
  TrainLog full_log = train(full, full_opt, corpus, {}, quick_schedule(20));

  // Interrupted at step 10, saved, restored into fresh objects, resumed.
  ModelParams half = ModelParams::init(tiny_config(table), 5);
  AdamState half_opt = AdamState::init(half);
  train(half, half_opt, corpus, {}, quick_schedule(10));
  Checkpoint saved = train_to_checkpoint(half, half_opt, quick_schedule(10));
  std::string bytes = saved.serialize();

  ModelParams resumed;
  AdamState resumed_opt;
  TrainingSchedule resumed_schedule;
  train_from_checkpoint(Checkpoint::deserialize(bytes), resumed, resumed_opt,
                        resumed_schedule);
  CHECK(resumed_opt.step == 10);
  CHECK(resumed_schedule.seed == 17);
  resumed_schedule.max_steps = 20;
  TrainLog tail_log = train(resumed, resumed_opt, corpus, {}, resumed_schedule);

  CHECK(params_equal(resumed, full));
  for (const auto& [name, tensor] : full_opt.m) {
    CHECK(resumed_opt.m.at(name) == tensor);
    CHECK(resumed_opt.v.at(name) == full_opt.v.at(name));
  }
  REQUIRE(tail_log.steps.size() == 10);
  CHECK(tail_log.steps.front().step == 11);
  for (size_t i = 0; i < tail_log.steps.size(); ++i) {
    CHECK(tail_log.steps[i].loss == full_log.steps[i + 10].loss);
  }
}

TEST_CASE("adaptation insists on its own phase and then updates weights") {
  testutil::DtypeGuard guard(DType::kF64);
  MergeTable table = tiny_table();
  ModelParams p = ModelParams::init(tiny_config(table), 5);
  AdamState opt = AdamState::init(p);
  std::vector<TrainExample> corpus = small_corpus(table);

  CHECK_THROWS_AS(adapt(p, opt, corpus, {}, quick_schedule(5)), ConfigError);

  TrainingSchedule s = quick_schedule(5);
  s.phase = TrainPhase::kAdapt;
  s.adapt_lr_factor = 0.5;
  ModelParams before = p;
  TrainLog log = adapt(p, opt, corpus, {}, s);
  CHECK(log.steps.size() == 5);
  CHECK(!params_equal(p, before));
  CHECK(log.steps.front().lr == doctest::Approx(schedule_lr(s, 1)));
}

TEST_CASE("cross-language training rejects same-tag and untagged pairs") {
  testutil::DtypeGuard guard(DType::kF64);
  MergeTable table = tiny_table();
  ModelParams p = ModelParams::init(tiny_config(table), 5);
  AdamState opt = AdamState::init(p);
  int32_t xx = table.tag_id("<xx>");
  int32_t yy = table.tag_id("<yy>");

  TrainExample cross = make_example(table, "aa bb", 1);
  cross.src_tag_id = xx;
  cross.tgt_tag_id = yy;
  TrainExample same = make_example(table, "cc dd", 2);
  same.src_tag_id = xx;
  same.tgt_tag_id = xx;
  TrainExample untagged = make_example(table, "dd", 3);

  CHECK_THROWS_AS(train_multilingual(p, opt, {cross, same}, {}, quick_schedule(2)),
                  ConfigError);
  CHECK_THROWS_AS(train_multilingual(p, opt, {untagged}, {}, quick_schedule(2)),
                  ConfigError);

  TrainExample back = make_example(table, "cc dd", 4);
  back.src_tag_id = yy;
  back.tgt_tag_id = xx;
  TrainLog log = train_multilingual(p, opt, {cross, back}, {}, quick_schedule(4));
  CHECK(log.steps.size() == 4);
  CHECK(opt.step == 4);
}

TEST_CASE("checkpoint hooks fire on the cadence and at the end") {
  testutil::DtypeGuard guard(DType::kF64);
  MergeTable table = tiny_table();
  ModelParams p = ModelParams::init(tiny_config(table), 5);
  AdamState opt = AdamState::init(p);
  std::vector<int64_t> fired;
  train(p, opt, small_corpus(table), {}, quick_schedule(12),
        [&](int64_t step) { fired.push_back(step); }, 5);
  CHECK(fired == std::vector<int64_t>{5, 10, 12});
}

TEST_CASE("a poisoned model aborts with the failing step") {
  testutil::DtypeGuard guard(DType::kF64);
  MergeTable table = tiny_table();
  ModelParams p = ModelParams::init(tiny_config(table), 5);
  p.at("enc.in.w").values()[0] = std::numeric_limits<double>::quiet_NaN();
  AdamState opt = AdamState::init(p);
  try {
    train(p, opt, small_corpus(table), {}, quick_schedule(3));
    FAIL("expected the non-finite loss to abort training");
  } catch (const TrainError& e) {
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
}

TEST_CASE("held-out accuracy lands at every epoch boundary") {
  testutil::DtypeGuard guard(DType::kF64);
  MergeTable table = tiny_table();
  ModelParams p = ModelParams::init(tiny_config(table), 5);
  AdamState opt = AdamState::init(p);
  std::vector<TrainExample> corpus = small_corpus(table);  // two batches per epoch
  std::vector<TrainExample> heldout = {make_example(table, "aa", 8)};
  TrainLog log = train(p, opt, corpus, heldout, quick_schedule(6));
  REQUIRE(log.epochs.size() == 3);
  for (size_t i = 0; i < log.epochs.size(); ++i) {
    CHECK(log.epochs[i].epoch == static_cast<int64_t>(i) + 1);
    CHECK(log.epochs[i].heldout_accuracy >= 0.0);
    CHECK(log.epochs[i].heldout_accuracy <= 1.0);
  }
}

TEST_CASE("sanity checks on the corpus run before any step") {
  testutil::DtypeGuard guard(DType::kF64);
  MergeTable table = tiny_table();
  ModelParams p = ModelParams::init(tiny_config(table), 5);
  AdamState opt = AdamState::init(p);

  CHECK_THROWS_AS(train(p, opt, {}, {}, quick_schedule(2)), ConfigError);

  TrainExample empty = make_example(table, "aa", 1);
  empty.content_ids.clear();
  CHECK_THROWS_AS(train(p, opt, {empty}, {}, quick_schedule(2)), ConfigError);

  // A target longer than the decoder window is refused up front.
  std::string long_text = "aa";
  for (int i = 0; i < 40; ++i) long_text += " aa";
  TrainExample oversized = make_example(table, long_text, 2);
  CHECK_THROWS_AS(train(p, opt, {oversized}, {}, quick_schedule(2)), ConfigError);
  CHECK(opt.step == 0);
}

TEST_CASE("training logs serialize to one record per line") {
  TrainLog log;
  log.steps.push_back({1, 2.5, 1e-4, 3.25});
  log.steps.push_back({2, 2.25, 2e-4, 3.5});
  log.epochs.push_back({1, 0.75});
  std::string text = log.to_jsonl();
  std::vector<std::string> lines;
  size_t start = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    lines.emplace_back(text, start, end - start);
    start = end + 1;
  }
  REQUIRE(lines.size() == 3);
  nlohmann::json first = nlohmann::json::parse(lines[0]);
  CHECK(first.at("type") == "step");
  CHECK(first.at("step") == 1);
  CHECK(first.at("loss") == 2.5);
  nlohmann::json last = nlohmann::json::parse(lines[2]);
  CHECK(last.at("type") == "epoch");
  CHECK(last.at("heldout_accuracy") == 0.75);
}

TEST_CASE("scoring insists on at least one example") {
  testutil::DtypeGuard guard(DType::kF64);
  MergeTable table = tiny_table();
  ModelParams p = ModelParams::init(tiny_config(table), 5);
  CHECK_THROWS_AS(teacher_forced_accuracy(p, {}), ConfigError);
}
