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
#include <map>
#include <string>
#include <vector>

#include "lenctl/autodiff.hpp"
#include "lenctl/bpe.hpp"
#include "lenctl/checkpoint.hpp"
#include "lenctl/tensor.hpp"

namespace lenctl {

// How the decoder is told how many content tokens it may still produce.
//
//   kNone                no length signal at all
//   kLearnedEmbedding    ReLU(W [prev_token_emb ; len_emb(remaining)] + b)
//                        added to the decoder input; remaining clamps to the
//                        largest length the embedding table covers
//   kSinusoidalCountdown the sinusoidal position code evaluated at the
//                        remaining count, added to the decoder input; works
//                        for any remaining value, trained or not
enum class LengthConditioning { kNone, kLearnedEmbedding, kSinusoidalCountdown };

const char* conditioning_name(LengthConditioning mode);
LengthConditioning conditioning_from_name(const std::string& name);

struct ModelConfig {
  int64_t feature_dim = 8;
  int64_t model_dim = 64;
  int64_t ffn_dim = 128;
  int64_t encoder_layers = 2;
  int64_t decoder_layers = 2;
  int64_t heads = 4;
  int64_t vocab_size = 0;
  int64_t max_len = 256;
  // Size of the learned length-embedding table; larger remaining counts are
  // clamped to this value. Ignored by the other conditioning modes.
  int64_t max_trained_length = 128;
  LengthConditioning conditioning = LengthConditioning::kNone;
  double dropout = 0.1;
  double label_smoothing = 0.1;

  void validate() const;
};

// Encoder-decoder parameters, addressed by stable names. Initialization
// draws each tensor from uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) with an
// RNG stream keyed by (seed, tensor name); biases start at zero, layer norm
// gains at one. The seed travels with the checkpoint.
struct ModelParams {
  ModelConfig config;
  uint64_t init_seed = 0;
  std::map<std::string, Tensor> tensors;

  static ModelParams init(const ModelConfig& config, uint64_t seed);

  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  int64_t parameter_count() const;
};

Checkpoint model_to_checkpoint(const ModelParams& params);
ModelParams model_from_checkpoint(const Checkpoint& ckpt);

// Sinusoidal position code: even components sin(pos / 10000^(d/dim)), odd
// components cos at the same frequency as their even neighbor.
double positional_encoding_value(int64_t pos, int64_t d, int64_t dim);
Tensor positional_encoding(int64_t pos, int64_t dim);               // [dim]
Tensor positional_encoding_rows(const std::vector<int64_t>& positions, int64_t dim);

// Countdown signal: the position code evaluated at the remaining budget
// target - position, floored at zero. Because only the difference enters,
// (target 9, position 5) and (target 6, position 2) share one code.
Tensor length_encoding(int64_t target, int64_t position, int64_t dim);

// Remaining budget fed at each decoder input position: budget minus the
// content tokens among prefix[0..j] (reserved ids and tags are free),
// floored at zero. A plain [BOS, w1, ..] prefix yields budget, budget-1, ..
std::vector<int64_t> countdown_for_prefix(const MergeTable& table,
                                          const std::vector<int32_t>& prefix,
                                          int64_t budget);

// Runs the encoder over a feature matrix [frames, feature_dim] and returns
// the memory the decoder attends to, shape [frames, model_dim]. No dropout.
Tensor encode_features(const ModelParams& params, const Tensor& features);

// Teacher-forced decoder pass over a whole prefix against precomputed
// memory. remaining must hold one countdown value per prefix position; it is
// ignored under kNone. Returns next-token logits, shape [prefix, vocab].
Tensor decoder_logits(const ModelParams& params, const Tensor& memory,
                      const std::vector<int32_t>& prefix,
                      const std::vector<int64_t>& remaining);

// Logits for the single next position: the last row of decoder_logits.
Tensor decode_step(const ModelParams& params, const Tensor& memory,
                   const std::vector<int32_t>& prefix,
                   const std::vector<int64_t>& remaining);

// End-to-end training graph for one utterance: encoder, decoder and
// label-smoothed loss. The decoder consumes [BOS (, target tag)] followed by
// the content ids; it must predict the content ids and a closing EOS. The
// forced tag position carries weight zero, so exactly budget+1 positions
// (countdown budget .. 0) contribute to the loss.
struct LossGraph {
  Graph graph;
  NodeId loss = -1;
  NodeId logits = -1;
  std::vector<int32_t> targets;
  std::vector<double> weights;
  double weight_sum = 0.0;
};

LossGraph build_loss_graph(const ModelParams& params, const Tensor& features,
                           const std::vector<int32_t>& content_ids,
                           int32_t target_tag_id,  // -1 when untagged
                           double dropout, uint64_t dropout_seed);

}  // namespace lenctl
