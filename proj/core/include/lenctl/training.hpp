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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lenctl/checkpoint.hpp"
#include "lenctl/model.hpp"
#include "lenctl/tensor.hpp"

namespace lenctl {

// One prepared utterance: source features plus tokenized target content.
// Tags are set for cross-language pairs and -1 otherwise.
struct TrainExample {
  Tensor features;
  std::vector<int32_t> content_ids;
  int32_t src_tag_id = -1;
  int32_t tgt_tag_id = -1;
};

enum class TrainPhase { kBase, kAdapt };

const char* phase_name(TrainPhase phase);
TrainPhase phase_from_name(const std::string& name);

struct TrainingSchedule {
  TrainPhase phase = TrainPhase::kBase;
  double peak_lr = 3e-4;
  // Adaptation runs at peak_lr * adapt_lr_factor; nothing is frozen.
  double adapt_lr_factor = 0.1;
  int64_t warmup_steps = 400;
  int64_t batch_size = 32;
  int64_t max_steps = 0;
  uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;

  void validate() const;
};

// Learning rate at a 1-based step: linear warmup to the peak, then
// inverse-square-root decay, scaled down in the adaptation phase.
double schedule_lr(const TrainingSchedule& schedule, int64_t step);

struct AdamState {
  int64_t step = 0;  // completed optimizer steps
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;

  static AdamState init(const ModelParams& params);
};

struct StepRecord {
  int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;
};

struct EpochRecord {
  int64_t epoch = 0;
  double heldout_accuracy = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;

  std::string to_jsonl() const;
};

// Deterministic batch plan for one epoch: examples are shuffled by
// (seed, epoch), grouped by length (the trainer buckets on feature frames)
// so batch members cost about the same, and the batch order is shuffled
// again. A pure function, so resuming at any step reproduces the original
// schedule without saved RNG state.
std::vector<std::vector<int64_t>> epoch_batches(
    const std::vector<int64_t>& lengths, int64_t batch_size,
    uint64_t seed, int64_t epoch);

using CheckpointHook = std::function<void(int64_t step)>;

// Runs optimizer steps opt.step+1 .. schedule.max_steps, mutating params and
// opt in place. The loss is the token-weighted mean over each batch. A
// non-finite loss aborts with TrainError naming the step. When heldout is
// non-empty, teacher-forced accuracy is recorded at every epoch boundary.
TrainLog train(ModelParams& params, AdamState& opt,
               const std::vector<TrainExample>& corpus,
               const std::vector<TrainExample>& heldout,
               const TrainingSchedule& schedule,
               const CheckpointHook& on_checkpoint = {},
               int64_t checkpoint_every = 0);

// Second phase on length-compressed targets: same loop at the reduced
// learning rate. The schedule must carry phase kAdapt.
TrainLog adapt(ModelParams& params, AdamState& opt,
               const std::vector<TrainExample>& corpus,
               const std::vector<TrainExample>& heldout,
               const TrainingSchedule& schedule,
               const CheckpointHook& on_checkpoint = {},
               int64_t checkpoint_every = 0);

// Tagged training over cross-language pairs only; an example whose source
// and target tags match (or are missing) is rejected up front.
TrainLog train_multilingual(ModelParams& params, AdamState& opt,
                            const std::vector<TrainExample>& corpus,
                            const std::vector<TrainExample>& heldout,
                            const TrainingSchedule& schedule,
                            const CheckpointHook& on_checkpoint = {},
                            int64_t checkpoint_every = 0);

// Fraction of loss-carrying target positions the model predicts exactly
// under teacher forcing. No dropout.
double teacher_forced_accuracy(const ModelParams& params,
                               const std::vector<TrainExample>& examples);

// Training checkpoints carry the model, optimizer moments and schedule, so
// an interrupted run resumes exactly.
Checkpoint train_to_checkpoint(const ModelParams& params, const AdamState& opt,
                               const TrainingSchedule& schedule);
void train_from_checkpoint(const Checkpoint& ckpt, ModelParams& params,
                           AdamState& opt, TrainingSchedule& schedule);

}  // namespace lenctl
