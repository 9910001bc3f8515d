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

#include "lenctl/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include <json.hpp>

#include "lenctl/common.hpp"

namespace lenctl {

namespace {
// RNG lane tags, so batch shuffling and dropout masks never share a stream.
constexpr uint64_t kLaneBatches = 0x6261746368ULL;   // "batch"
constexpr uint64_t kLaneDropout = 0x64726f70ULL;     // "drop"
}  // namespace

const char* phase_name(TrainPhase phase) {
  return phase == TrainPhase::kBase ? "base" : "adapt";
}

TrainPhase phase_from_name(const std::string& name) {
  if (name == "base") return TrainPhase::kBase;
  if (name == "adapt") return TrainPhase::kAdapt;
  throw ConfigError("unknown training phase: '" + name + "'");
}

void TrainingSchedule::validate() const {
  if (peak_lr <= 0.0) throw ConfigError("peak_lr must be positive");
  if (adapt_lr_factor < 0.0 || adapt_lr_factor >= 1.0) {
    throw ConfigError("adapt_lr_factor must lie in [0, 1)");
  }
  if (warmup_steps < 0) throw ConfigError("warmup_steps must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (max_steps < 0) throw ConfigError("max_steps must be non-negative");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (adam_eps <= 0.0) throw ConfigError("adam_eps must be positive");
}

double schedule_lr(const TrainingSchedule& schedule, int64_t step) {
  if (step < 1) throw ConfigError("learning rate queried for step < 1");
  double warmup = static_cast<double>(std::max<int64_t>(schedule.warmup_steps, 1));
  double s = static_cast<double>(step);
  double factor = std::min(s / warmup, std::sqrt(warmup / s));
  double lr = schedule.peak_lr * factor;
  if (schedule.phase == TrainPhase::kAdapt) lr *= schedule.adapt_lr_factor;
  return lr;
}

AdamState AdamState::init(const ModelParams& params) {
  AdamState state;
  for (const auto& [name, t] : params.tensors) {
    state.m.emplace(name, Tensor::zeros(t.shape()));
    state.v.emplace(name, Tensor::zeros(t.shape()));
  }
  return state;
}

std::string TrainLog::to_jsonl() const {
  std::string out;
  for (const StepRecord& s : steps) {
    nlohmann::ordered_json j;
    j["type"] = "step";
    j["step"] = s.step;
    j["loss"] = s.loss;
    j["lr"] = s.lr;
    j["wall_ms"] = s.wall_ms;
    out += j.dump();
    out += '\n';
  }
  for (const EpochRecord& e : epochs) {
    nlohmann::ordered_json j;
    j["type"] = "epoch";
    j["epoch"] = e.epoch;
    j["heldout_accuracy"] = e.heldout_accuracy;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<std::vector<int64_t>> epoch_batches(
    const std::vector<int64_t>& lengths, int64_t batch_size,
    uint64_t seed, int64_t epoch) {
  int64_t n = static_cast<int64_t>(lengths.size());
  if (n == 0) throw ConfigError("cannot batch an empty corpus");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");

  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  std::mt19937_64 rng(mix_seed(seed, kLaneBatches, static_cast<uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  // Group similar lengths; the shuffle above still randomizes composition
  // within each length.
  std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    return lengths[static_cast<size_t>(a)] < lengths[static_cast<size_t>(b)];
  });

  std::vector<std::vector<int64_t>> batches;
  for (int64_t start = 0; start < n; start += batch_size) {
    int64_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

namespace {

void check_examples(const ModelConfig& config,
                    const std::vector<TrainExample>& corpus,
                    const std::string& what) {
  if (corpus.empty()) {
    throw ConfigError(what + " corpus is empty");
  }
  for (size_t i = 0; i < corpus.size(); ++i) {
    const TrainExample& ex = corpus[i];
    if (ex.content_ids.empty()) {
      throw ConfigError(what + " example " + std::to_string(i) +
                        " has no content tokens");
    }
    // BOS, optional tag, content and the closing EOS target must all fit.
    int64_t positions = static_cast<int64_t>(ex.content_ids.size()) + 1 +
                        (ex.tgt_tag_id >= 0 ? 1 : 0);
    if (positions > config.max_len) {
      throw ConfigError(what + " example " + std::to_string(i) + " needs " +
                        std::to_string(positions) + " decoder positions, max_len is " +
                        std::to_string(config.max_len));
    }
  }
}

double run_step(ModelParams& params, AdamState& opt,
                const std::vector<TrainExample>& corpus,
                const std::vector<int64_t>& batch,
                const TrainingSchedule& schedule, int64_t step) {
  // Token-weighted batch loss: every loss-carrying position contributes
  // equally no matter which utterance it came from.
  double weight_total = 0.0;
  for (int64_t idx : batch) {
    weight_total +=
        static_cast<double>(corpus[static_cast<size_t>(idx)].content_ids.size()) + 1.0;
  }

  std::map<std::string, Tensor> grads;
  for (const auto& [name, t] : params.tensors) {
    grads.emplace(name, Tensor::zeros(t.shape()));
  }

  double batch_loss = 0.0;
  for (int64_t idx : batch) {
    const TrainExample& ex = corpus[static_cast<size_t>(idx)];
    uint64_t drop_seed = mix_seed(schedule.seed, kLaneDropout,
                                  static_cast<uint64_t>(step) * 1000003ULL +
                                      static_cast<uint64_t>(idx));
    LossGraph lg = build_loss_graph(params, ex.features, ex.content_ids,
                                    ex.tgt_tag_id, params.config.dropout, drop_seed);
    lg.graph.run_forward();
    double loss = lg.graph.value(lg.loss).item();
    if (!std::isfinite(loss)) {
      throw TrainError("non-finite loss at step " + std::to_string(step) +
                       " (batch example " + std::to_string(idx) + ")");
    }
    double share = lg.weight_sum / weight_total;
    lg.graph.run_backward(lg.loss, share);
    batch_loss += loss * share;
    for (NodeId pid : lg.graph.param_ids()) {
      const Node& pn = lg.graph.node(pid);
      Tensor& acc = grads.at(pn.name);
      const Tensor& g = lg.graph.grad(pid);
      for (int64_t i = 0; i < g.numel(); ++i) {
        acc.values()[static_cast<size_t>(i)] += g.values()[static_cast<size_t>(i)];
      }
    }
  }

  double lr = schedule_lr(schedule, step);
  double b1 = schedule.adam_beta1, b2 = schedule.adam_beta2;
  double bc1 = 1.0 - std::pow(b1, static_cast<double>(step));
  double bc2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (auto& [name, p] : params.tensors) {
    Tensor& g = grads.at(name);
    Tensor& m = opt.m.at(name);
    Tensor& v = opt.v.at(name);
    for (int64_t i = 0; i < p.numel(); ++i) {
      size_t k = static_cast<size_t>(i);
      double gi = g.values()[k];
      m.values()[k] = b1 * m.values()[k] + (1.0 - b1) * gi;
      v.values()[k] = b2 * v.values()[k] + (1.0 - b2) * gi * gi;
      double mhat = m.values()[k] / bc1;
      double vhat = v.values()[k] / bc2;
      p.values()[k] -= lr * mhat / (std::sqrt(vhat) + schedule.adam_eps);
    }
    m.quantize();
    v.quantize();
    p.quantize();
  }
  return batch_loss;
}

TrainLog train_loop(ModelParams& params, AdamState& opt,
                    const std::vector<TrainExample>& corpus,
                    const std::vector<TrainExample>& heldout,
                    const TrainingSchedule& schedule,
                    const CheckpointHook& on_checkpoint, int64_t checkpoint_every) {
  schedule.validate();
  params.config.validate();
  check_examples(params.config, corpus, "training");
  if (!heldout.empty()) check_examples(params.config, heldout, "held-out");
  if (opt.step >= schedule.max_steps) {
    return {};  // nothing left to do; parameters stay as they are
  }

  std::vector<int64_t> lengths;
  lengths.reserve(corpus.size());
  for (const TrainExample& ex : corpus) {
    lengths.push_back(ex.features.shape()[0]);
  }
  int64_t batches_per_epoch =
      (static_cast<int64_t>(corpus.size()) + schedule.batch_size - 1) /
      schedule.batch_size;

  TrainLog log;
  int64_t plan_epoch = -1;
  std::vector<std::vector<int64_t>> plan;
  for (int64_t step = opt.step + 1; step <= schedule.max_steps; ++step) {
    int64_t epoch = (step - 1) / batches_per_epoch;
    if (epoch != plan_epoch) {
      plan = epoch_batches(lengths, schedule.batch_size, schedule.seed, epoch);
      plan_epoch = epoch;
    }
    const std::vector<int64_t>& batch =
        plan[static_cast<size_t>((step - 1) % batches_per_epoch)];

    auto started = std::chrono::steady_clock::now();
    double loss = run_step(params, opt, corpus, batch, schedule, step);
    opt.step = step;
    double wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - started)
                         .count();
    log.steps.push_back({step, loss, schedule_lr(schedule, step), wall_ms});

    bool epoch_done = step % batches_per_epoch == 0;
    if (epoch_done && !heldout.empty()) {
      log.epochs.push_back({epoch + 1, teacher_forced_accuracy(params, heldout)});
    }
    if (on_checkpoint && checkpoint_every > 0 &&
        (step % checkpoint_every == 0 || step == schedule.max_steps)) {
      on_checkpoint(step);
    }
  }
  return log;
}

}  // namespace

TrainLog train(ModelParams& params, AdamState& opt,
               const std::vector<TrainExample>& corpus,
               const std::vector<TrainExample>& heldout,
               const TrainingSchedule& schedule, const CheckpointHook& on_checkpoint,
               int64_t checkpoint_every) {
  return train_loop(params, opt, corpus, heldout, schedule, on_checkpoint,
                    checkpoint_every);
}

TrainLog adapt(ModelParams& params, AdamState& opt,
               const std::vector<TrainExample>& corpus,
               const std::vector<TrainExample>& heldout,
               const TrainingSchedule& schedule, const CheckpointHook& on_checkpoint,
               int64_t checkpoint_every) {
  if (schedule.phase != TrainPhase::kAdapt) {
    throw ConfigError("adapt() requires a schedule with phase 'adapt'");
  }
  return train_loop(params, opt, corpus, heldout, schedule, on_checkpoint,
                    checkpoint_every);
}

TrainLog train_multilingual(ModelParams& params, AdamState& opt,
                            const std::vector<TrainExample>& corpus,
                            const std::vector<TrainExample>& heldout,
                            const TrainingSchedule& schedule,
                            const CheckpointHook& on_checkpoint,
                            int64_t checkpoint_every) {
  for (size_t i = 0; i < corpus.size(); ++i) {
    const TrainExample& ex = corpus[i];
    if (ex.src_tag_id < 0 || ex.tgt_tag_id < 0) {
      throw ConfigError("multilingual example " + std::to_string(i) +
                        " is missing a language tag");
    }
    if (ex.src_tag_id == ex.tgt_tag_id) {
      throw ConfigError("multilingual example " + std::to_string(i) +
                        " pairs a language with itself; same-tag directions are "
                        "held out for zero-shot evaluation");
    }
  }
  return train_loop(params, opt, corpus, heldout, schedule, on_checkpoint,
                    checkpoint_every);
}

double teacher_forced_accuracy(const ModelParams& params,
                               const std::vector<TrainExample>& examples) {
  if (examples.empty()) {
    throw ConfigError("no examples to score");
  }
  int64_t correct = 0;
  int64_t total = 0;
  for (const TrainExample& ex : examples) {
    LossGraph lg = build_loss_graph(params, ex.features, ex.content_ids,
                                    ex.tgt_tag_id, 0.0, 0);
    lg.graph.run_forward();
    const Tensor& logits = lg.graph.value(lg.logits);
    int64_t vocab = logits.shape()[1];
    for (size_t r = 0; r < lg.targets.size(); ++r) {
      if (lg.weights[r] == 0.0) continue;
      const double* row = logits.data() + static_cast<int64_t>(r) * vocab;
      int64_t best = 0;
      for (int64_t v = 1; v < vocab; ++v) {
        if (row[v] > row[best]) best = v;
      }
      if (best == lg.targets[r]) ++correct;
      ++total;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

Checkpoint train_to_checkpoint(const ModelParams& params, const AdamState& opt,
                               const TrainingSchedule& schedule) {
  Checkpoint ckpt = model_to_checkpoint(params);
  ckpt.kind = "train";
  ckpt.meta["opt_step"] = std::to_string(opt.step);
  ckpt.meta["phase"] = phase_name(schedule.phase);
  ckpt.meta["peak_lr"] = meta_encode_double(schedule.peak_lr);
  ckpt.meta["adapt_lr_factor"] = meta_encode_double(schedule.adapt_lr_factor);
  ckpt.meta["warmup_steps"] = std::to_string(schedule.warmup_steps);
  ckpt.meta["batch_size"] = std::to_string(schedule.batch_size);
  ckpt.meta["max_steps"] = std::to_string(schedule.max_steps);
  ckpt.meta["train_seed"] = std::to_string(schedule.seed);
  ckpt.meta["adam_beta1"] = meta_encode_double(schedule.adam_beta1);
  ckpt.meta["adam_beta2"] = meta_encode_double(schedule.adam_beta2);
  ckpt.meta["adam_eps"] = meta_encode_double(schedule.adam_eps);
  for (const auto& [name, t] : opt.m) {
    ckpt.add("adam.m." + name, t);
  }
  for (const auto& [name, t] : opt.v) {
    ckpt.add("adam.v." + name, t);
  }
  return ckpt;
}

void train_from_checkpoint(const Checkpoint& ckpt, ModelParams& params,
                           AdamState& opt, TrainingSchedule& schedule) {
  if (ckpt.kind != "train") {
    throw IoError("expected a training checkpoint, found kind '" + ckpt.kind + "'");
  }
  auto require = [&](const std::string& key) -> const std::string& {
    auto it = ckpt.meta.find(key);
    if (it == ckpt.meta.end()) {
      throw IoError("training checkpoint is missing '" + key + "'");
    }
    return it->second;
  };
  params = model_from_checkpoint(ckpt);
  opt = AdamState();
  opt.step = std::stoll(require("opt_step"));
  for (const auto& [name, t] : params.tensors) {
    (void)t;
    opt.m.emplace(name, ckpt.get("adam.m." + name));
    opt.v.emplace(name, ckpt.get("adam.v." + name));
  }
  schedule.phase = phase_from_name(require("phase"));
  schedule.peak_lr = meta_decode_double(require("peak_lr"));
  schedule.adapt_lr_factor = meta_decode_double(require("adapt_lr_factor"));
  schedule.warmup_steps = std::stoll(require("warmup_steps"));
  schedule.batch_size = std::stoll(require("batch_size"));
  schedule.max_steps = std::stoll(require("max_steps"));
  schedule.seed = std::stoull(require("train_seed"));
  schedule.adam_beta1 = meta_decode_double(require("adam_beta1"));
  schedule.adam_beta2 = meta_decode_double(require("adam_beta2"));
  schedule.adam_eps = meta_decode_double(require("adam_eps"));
}

}  // namespace lenctl
