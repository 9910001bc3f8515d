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
#include "lenctl/checkpoint.hpp"
#include "lenctl/common.hpp"
#include "lenctl/fileio.hpp"
#include "options.hpp"

namespace lenctl::cli {

namespace {

struct TrainArgs {
  std::string corpus_path;
  std::string heldout_path;
  std::string bpe_path;
  std::string out_dir;
  std::string init_path;  // adapt only
  std::string target;     // empty: verbatim in base phase, compressed in adapt
  bool resume = false;

  // Architecture (base phase only; adapt inherits from the checkpoint).
  int64_t model_dim = 64;
  int64_t ffn_dim = 128;
  int64_t encoder_layers = 2;
  int64_t decoder_layers = 2;
  int64_t heads = 4;
  int64_t max_len = 256;
  int64_t max_trained_length = 128;
  std::string conditioning = "none";
  double dropout = 0.1;
  double label_smoothing = 0.1;
  std::string precision = "f32";

  // Schedule. max_steps -1 means "not set anywhere": 1000 on a fresh run,
  // the stored target when resuming.
  double peak_lr = 3e-4;
  double adapt_lr_factor = 0.1;
  int64_t warmup_steps = 400;
  int64_t batch_size = 32;
  int64_t max_steps = -1;
  uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;

  int64_t checkpoint_every = 0;
};

void add_schedule_options(Settings& s, TrainArgs& a) {
  s.add_double("--peak-lr", a.peak_lr, "Peak learning rate (default 3e-4)");
  s.add_double("--adapt-lr-factor", a.adapt_lr_factor,
               "Learning rate multiplier in the adapt phase (default 0.1)");
  s.add_int("--warmup-steps", a.warmup_steps, "Linear warmup steps (default 400)");
  s.add_int("--batch-size", a.batch_size, "Utterances per step (default 32)");
  s.add_int("--max-steps", a.max_steps, "Total optimizer steps (default 1000)");
  s.add_seed("--seed", a.seed, "Master seed for init, batching and dropout");
  s.add_double("--adam-beta1", a.adam_beta1, "Adam first-moment decay (default 0.9)");
  s.add_double("--adam-beta2", a.adam_beta2, "Adam second-moment decay (default 0.98)");
  s.add_double("--adam-eps", a.adam_eps, "Adam denominator floor (default 1e-9)");
  s.add_int("--checkpoint-every", a.checkpoint_every,
            "Also write resume state every N steps (default: only at the end)");
}

void add_common_options(Settings& s, TrainArgs& a) {
  s.add_string("--corpus", a.corpus_path, "Training corpus (JSONL)");
  s.add_string("--heldout", a.heldout_path,
               "Held-out corpus for per-epoch accuracy (optional)");
  s.add_string("--bpe", a.bpe_path, "Merge table path");
  s.add_string("--out", a.out_dir, "Output directory");
  s.add_string("--target", a.target,
               "Transcript field to train on: verbatim or compressed "
               "(default: verbatim here, compressed under adapt)");
  s.add_switch("--resume", a.resume,
               "Continue from <out>/train_state.ckpt written by an earlier run");
}

void run_train(const TrainArgs& args, TrainPhase phase) {
  require_value(args.corpus_path, "--corpus");
  require_value(args.bpe_path, "--bpe");
  require_value(args.out_dir, "--out");

  MergeTable table = MergeTable::load(args.bpe_path);
  std::vector<Utterance> corpus = load_corpus(args.corpus_path);
  std::vector<Utterance> heldout;
  if (!args.heldout_path.empty()) heldout = load_corpus(args.heldout_path);

  std::filesystem::create_directories(args.out_dir);
  std::string state_path = args.out_dir + "/train_state.ckpt";
  std::string model_path = args.out_dir + "/model.ckpt";
  std::string log_path = args.out_dir + "/train_log.jsonl";

  ModelParams params;
  AdamState opt;
  TrainingSchedule schedule;
  if (args.resume) {
    if (!file_exists(state_path)) {
      throw ConfigError("--resume given but " + state_path + " does not exist");
    }
    train_from_checkpoint(Checkpoint::load(state_path), params, opt, schedule);
    if (schedule.phase != phase) {
      throw ConfigError("resume state in " + state_path + " is from the '" +
                        phase_name(schedule.phase) + "' phase");
    }
    adopt_model_dtype(params);
    if (args.max_steps >= 0) schedule.max_steps = args.max_steps;
    std::printf("resuming from step %lld\n", static_cast<long long>(opt.step));
  } else {
    if (phase == TrainPhase::kAdapt) {
      require_value(args.init_path, "--init");
      Checkpoint init = Checkpoint::load(args.init_path);
      if (init.kind != "model" && init.kind != "train") {
        throw ConfigError(args.init_path + " is a '" + init.kind +
                          "' checkpoint, expected model or train");
      }
      params = model_from_checkpoint(init);
      adopt_model_dtype(params);
      if (params.config.vocab_size != table.vocab_size()) {
        throw ConfigError("checkpoint vocabulary (" +
                          std::to_string(params.config.vocab_size) +
                          ") does not match the merge table (" +
                          std::to_string(table.vocab_size()) + ")");
      }
    } else {
      set_default_dtype(dtype_from_name(args.precision));
      ModelConfig config;
      config.feature_dim = corpus_feature_dim(corpus);
      config.model_dim = args.model_dim;
      config.ffn_dim = args.ffn_dim;
      config.encoder_layers = args.encoder_layers;
      config.decoder_layers = args.decoder_layers;
      config.heads = args.heads;
      config.vocab_size = table.vocab_size();
      config.max_len = args.max_len;
      config.max_trained_length = args.max_trained_length;
      config.conditioning = conditioning_from_name(args.conditioning);
      config.dropout = args.dropout;
      config.label_smoothing = args.label_smoothing;
      config.validate();
      params = ModelParams::init(config, args.seed);
    }
    opt = AdamState::init(params);
    schedule.phase = phase;
    schedule.peak_lr = args.peak_lr;
    schedule.adapt_lr_factor = args.adapt_lr_factor;
    schedule.warmup_steps = args.warmup_steps;
    schedule.batch_size = args.batch_size;
    schedule.max_steps = args.max_steps >= 0 ? args.max_steps : 1000;
    schedule.seed = args.seed;
    schedule.adam_beta1 = args.adam_beta1;
    schedule.adam_beta2 = args.adam_beta2;
    schedule.adam_eps = args.adam_eps;
  }

  std::string field =
      !args.target.empty() ? args.target
                           : (phase == TrainPhase::kAdapt ? "compressed" : "verbatim");
  std::vector<TrainExample> examples = to_examples(corpus, table, field);
  std::vector<TrainExample> heldout_examples;
  if (!heldout.empty()) heldout_examples = to_examples(heldout, table, field);

  bool tagged = examples.front().src_tag_id >= 0;
  CheckpointHook hook = [&](int64_t) {
    train_to_checkpoint(params, opt, schedule).save(state_path);
  };

  TrainLog log;
  if (tagged) {
    log = train_multilingual(params, opt, examples, heldout_examples, schedule, hook,
                             args.checkpoint_every);
  } else if (phase == TrainPhase::kAdapt) {
    log = adapt(params, opt, examples, heldout_examples, schedule, hook,
                args.checkpoint_every);
  } else {
    log = train(params, opt, examples, heldout_examples, schedule, hook,
                args.checkpoint_every);
  }

  train_to_checkpoint(params, opt, schedule).save(state_path);
  model_to_checkpoint(params).save(model_path);
  atomic_write_file(log_path, log.to_jsonl());

  std::printf("%s: %zu steps run, now at step %lld of %lld\n",
              phase_name(schedule.phase), log.steps.size(),
              static_cast<long long>(opt.step),
              static_cast<long long>(schedule.max_steps));
  if (!log.steps.empty()) {
    std::printf("final loss %.4f (lr %.3g)\n", log.steps.back().loss,
                log.steps.back().lr);
  }
  if (!log.epochs.empty()) {
    std::printf("held-out token accuracy %.4f after epoch %lld\n",
                log.epochs.back().heldout_accuracy,
                static_cast<long long>(log.epochs.back().epoch));
  }
  std::printf("model -> %s\nresume state -> %s\nlog -> %s\n", model_path.c_str(),
              state_path.c_str(), log_path.c_str());
}

}  // namespace

void register_train(CLI::App& app) {
  CLI::App* cmd = app.add_subcommand(
      "train", "Base-phase training on verbatim transcripts");
  auto args = std::make_shared<TrainArgs>();
  auto settings = std::make_shared<Settings>(cmd);
  add_common_options(*settings, *args);
  settings->add_int("--model-dim", args->model_dim, "Model width D (default 64)");
  settings->add_int("--ffn-dim", args->ffn_dim, "Feed-forward width (default 128)");
  settings->add_int("--encoder-layers", args->encoder_layers,
                    "Encoder depth (default 2)");
  settings->add_int("--decoder-layers", args->decoder_layers,
                    "Decoder depth (default 2)");
  settings->add_int("--heads", args->heads, "Attention heads (default 4)");
  settings->add_int("--max-len", args->max_len,
                    "Longest supported frame/token sequence (default 256)");
  settings->add_int("--max-trained-length", args->max_trained_length,
                    "Largest remaining-length row in learned-embedding mode "
                    "(default 128)");
  settings->add_string("--conditioning", args->conditioning,
                       "Length conditioning: none, learned-embedding or "
                       "sinusoidal-countdown (default none)");
  settings->add_double("--dropout", args->dropout, "Dropout rate (default 0.1)");
  settings->add_double("--label-smoothing", args->label_smoothing,
                       "Cross-entropy smoothing mass (default 0.1)");
  settings->add_string("--precision", args->precision,
                       "Tensor precision, f32 or f64 (default f32)");
  add_schedule_options(*settings, *args);
  cmd->callback([args, settings]() {
    settings->finalize();
    run_train(*args, TrainPhase::kBase);
  });
}

void register_adapt(CLI::App& app) {
  CLI::App* cmd = app.add_subcommand(
      "adapt", "Continue a trained model on compressed targets at reduced "
               "learning rate");
  auto args = std::make_shared<TrainArgs>();
  auto settings = std::make_shared<Settings>(cmd);
  add_common_options(*settings, *args);
  settings->add_string("--init", args->init_path,
                       "Model checkpoint from the base phase");
  add_schedule_options(*settings, *args);
  cmd->callback([args, settings]() {
    settings->finalize();
    run_train(*args, TrainPhase::kAdapt);
  });
}

}  // namespace lenctl::cli
