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

#include "lenctl/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lenctl/common.hpp"

namespace lenctl {

const char* conditioning_name(LengthConditioning mode) {
  switch (mode) {
    case LengthConditioning::kNone: return "none";
    case LengthConditioning::kLearnedEmbedding: return "learned-embedding";
    case LengthConditioning::kSinusoidalCountdown: return "sinusoidal-countdown";
  }
  return "?";
}

LengthConditioning conditioning_from_name(const std::string& name) {
  if (name == "none") return LengthConditioning::kNone;
  if (name == "learned-embedding") return LengthConditioning::kLearnedEmbedding;
  if (name == "sinusoidal-countdown") return LengthConditioning::kSinusoidalCountdown;
  throw ConfigError("unknown conditioning mode: '" + name +
                    "' (expected none, learned-embedding or sinusoidal-countdown)");
}

void ModelConfig::validate() const {
  if (feature_dim < 1) throw ConfigError("feature_dim must be positive");
  if (model_dim < 1) throw ConfigError("model_dim must be positive");
  if (ffn_dim < 1) throw ConfigError("ffn_dim must be positive");
  if (encoder_layers < 1 || decoder_layers < 1) {
    throw ConfigError("need at least one encoder and one decoder layer");
  }
  if (heads < 1 || model_dim % heads != 0) {
    throw ConfigError("model_dim " + std::to_string(model_dim) +
                      " must be divisible by heads " + std::to_string(heads));
  }
  if (vocab_size <= kNumReservedIds) {
    throw ConfigError("vocab_size " + std::to_string(vocab_size) +
                      " leaves no room for content tokens");
  }
  if (max_len < 2) throw ConfigError("max_len must be at least 2");
  if (max_trained_length < 1) throw ConfigError("max_trained_length must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
    throw ConfigError("label_smoothing must lie in [0, 1)");
  }
}

namespace {

struct ParamSpec {
  std::string name;
  std::vector<int64_t> shape;
  enum class Init { kUniform, kZeros, kOnes } init;
  int64_t fan_in = 0;
};

void push_linear(std::vector<ParamSpec>& out, const std::string& prefix,
                 int64_t in_dim, int64_t out_dim) {
  out.push_back({prefix + ".w", {in_dim, out_dim}, ParamSpec::Init::kUniform, in_dim});
  out.push_back({prefix + ".b", {out_dim}, ParamSpec::Init::kZeros, 0});
}

void push_norm(std::vector<ParamSpec>& out, const std::string& prefix, int64_t dim) {
  out.push_back({prefix + ".g", {dim}, ParamSpec::Init::kOnes, 0});
  out.push_back({prefix + ".b", {dim}, ParamSpec::Init::kZeros, 0});
}

void push_attention(std::vector<ParamSpec>& out, const std::string& prefix,
                    int64_t dim) {
  push_linear(out, prefix + ".q", dim, dim);
  push_linear(out, prefix + ".k", dim, dim);
  push_linear(out, prefix + ".v", dim, dim);
  push_linear(out, prefix + ".o", dim, dim);
}

std::vector<ParamSpec> param_spec(const ModelConfig& c) {
  std::vector<ParamSpec> out;
  int64_t d = c.model_dim;
  push_linear(out, "enc.in", c.feature_dim, d);
  for (int64_t l = 0; l < c.encoder_layers; ++l) {
    std::string p = "enc.l" + std::to_string(l);
    push_attention(out, p + ".self", d);
    push_norm(out, p + ".ln1", d);
    push_linear(out, p + ".ffn1", d, c.ffn_dim);
    push_linear(out, p + ".ffn2", c.ffn_dim, d);
    push_norm(out, p + ".ln2", d);
  }
  // Embedding rows act as output vectors, so fan_in is the model dim.
  out.push_back({"dec.embed", {c.vocab_size, d}, ParamSpec::Init::kUniform, d});
  if (c.conditioning == LengthConditioning::kLearnedEmbedding) {
    out.push_back({"dec.len.table", {c.max_trained_length + 1, d},
                   ParamSpec::Init::kUniform, d});
    push_linear(out, "dec.len", 2 * d, d);
  }
  for (int64_t l = 0; l < c.decoder_layers; ++l) {
    std::string p = "dec.l" + std::to_string(l);
    push_attention(out, p + ".self", d);
    push_norm(out, p + ".ln1", d);
    push_attention(out, p + ".cross", d);
    push_norm(out, p + ".ln2", d);
    push_linear(out, p + ".ffn1", d, c.ffn_dim);
    push_linear(out, p + ".ffn2", c.ffn_dim, d);
    push_norm(out, p + ".ln3", d);
  }
  push_linear(out, "dec.out", d, c.vocab_size);
  return out;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config, uint64_t seed) {
  config.validate();
  ModelParams params;
  params.config = config;
  params.init_seed = seed;
  for (const ParamSpec& spec : param_spec(config)) {
    Tensor t(spec.shape);
    switch (spec.init) {
      case ParamSpec::Init::kUniform: {
        std::mt19937_64 rng(mix_seed(seed, fnv1a(spec.name)));
        double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : t.values()) v = dist(rng);
        t.quantize();
        break;
      }
      case ParamSpec::Init::kZeros:
        break;
      case ParamSpec::Init::kOnes:
        t = Tensor::full(spec.shape, 1.0);
        break;
    }
    params.tensors.emplace(spec.name, std::move(t));
  }
  return params;
}

const Tensor& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw Error("model has no parameter named '" + name + "'");
  }
  return it->second;
}

Tensor& ModelParams::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw Error("model has no parameter named '" + name + "'");
  }
  return it->second;
}

int64_t ModelParams::parameter_count() const {
  int64_t n = 0;
  for (const auto& [name, t] : tensors) {
    (void)name;
    n += t.numel();
  }
  return n;
}

Checkpoint model_to_checkpoint(const ModelParams& params) {
  const ModelConfig& c = params.config;
  Checkpoint ckpt;
  ckpt.kind = "model";
  ckpt.meta["feature_dim"] = std::to_string(c.feature_dim);
  ckpt.meta["model_dim"] = std::to_string(c.model_dim);
  ckpt.meta["ffn_dim"] = std::to_string(c.ffn_dim);
  ckpt.meta["encoder_layers"] = std::to_string(c.encoder_layers);
  ckpt.meta["decoder_layers"] = std::to_string(c.decoder_layers);
  ckpt.meta["heads"] = std::to_string(c.heads);
  ckpt.meta["vocab_size"] = std::to_string(c.vocab_size);
  ckpt.meta["max_len"] = std::to_string(c.max_len);
  ckpt.meta["max_trained_length"] = std::to_string(c.max_trained_length);
  ckpt.meta["conditioning"] = conditioning_name(c.conditioning);
  ckpt.meta["dropout"] = meta_encode_double(c.dropout);
  ckpt.meta["label_smoothing"] = meta_encode_double(c.label_smoothing);
  ckpt.meta["init_seed"] = std::to_string(params.init_seed);
  for (const auto& [name, t] : params.tensors) {
    ckpt.add(name, t);
  }
  return ckpt;
}

ModelParams model_from_checkpoint(const Checkpoint& ckpt) {
  auto require = [&](const std::string& key) -> const std::string& {
    auto it = ckpt.meta.find(key);
    if (it == ckpt.meta.end()) {
      throw IoError("checkpoint meta is missing '" + key + "'");
    }
    return it->second;
  };
  ModelConfig c;
  c.feature_dim = std::stoll(require("feature_dim"));
  c.model_dim = std::stoll(require("model_dim"));
  c.ffn_dim = std::stoll(require("ffn_dim"));
  c.encoder_layers = std::stoll(require("encoder_layers"));
  c.decoder_layers = std::stoll(require("decoder_layers"));
  c.heads = std::stoll(require("heads"));
  c.vocab_size = std::stoll(require("vocab_size"));
  c.max_len = std::stoll(require("max_len"));
  c.max_trained_length = std::stoll(require("max_trained_length"));
  c.conditioning = conditioning_from_name(require("conditioning"));
  c.dropout = meta_decode_double(require("dropout"));
  c.label_smoothing = meta_decode_double(require("label_smoothing"));
  c.validate();

  ModelParams params;
  params.config = c;
  params.init_seed = static_cast<uint64_t>(std::stoull(require("init_seed")));
  for (const ParamSpec& spec : param_spec(c)) {
    const Tensor& t = ckpt.get(spec.name);
    if (t.shape() != spec.shape) {
      throw IoError("checkpoint tensor '" + spec.name + "' has shape " +
                    t.shape_string() + ", expected " + shape_to_string(spec.shape));
    }
    params.tensors.emplace(spec.name, t);
  }
  return params;
}

double positional_encoding_value(int64_t pos, int64_t d, int64_t dim) {
  if (d < 0 || d >= dim) {
    throw ConfigError("position code component " + std::to_string(d) +
                      " outside dimension " + std::to_string(dim));
  }
  int64_t pair = d - (d % 2);
  double angle = static_cast<double>(pos) /
                 std::pow(10000.0, static_cast<double>(pair) / static_cast<double>(dim));
  return (d % 2 == 0) ? std::sin(angle) : std::cos(angle);
}

Tensor positional_encoding(int64_t pos, int64_t dim) {
  if (pos < 0) {
    throw ConfigError("position must be non-negative, got " + std::to_string(pos));
  }
  Tensor t({dim});
  for (int64_t d = 0; d < dim; ++d) {
    t.at(d) = positional_encoding_value(pos, d, dim);
  }
  t.quantize();
  return t;
}

Tensor positional_encoding_rows(const std::vector<int64_t>& positions, int64_t dim) {
  Tensor t({static_cast<int64_t>(positions.size()), dim});
  for (size_t r = 0; r < positions.size(); ++r) {
    Tensor row = positional_encoding(positions[r], dim);
    for (int64_t d = 0; d < dim; ++d) {
      t.at(static_cast<int64_t>(r), d) = row.at(d);
    }
  }
  t.quantize();
  return t;
}

Tensor length_encoding(int64_t target, int64_t position, int64_t dim) {
  int64_t remaining = target - position;
  if (remaining < 0) remaining = 0;
  return positional_encoding(remaining, dim);
}

std::vector<int64_t> countdown_for_prefix(const MergeTable& table,
                                          const std::vector<int32_t>& prefix,
                                          int64_t budget) {
  std::vector<int64_t> out;
  out.reserve(prefix.size());
  int64_t remaining = budget;
  for (int32_t id : prefix) {
    if (table.is_content(id)) --remaining;
    out.push_back(std::max<int64_t>(remaining, 0));
  }
  return out;
}

namespace {

// Assembles encoder/decoder graphs against one parameter set. Parameter
// nodes are created on first use; dropout masks are drawn in build order
// from a dedicated stream, so a (seed, example) pair always yields the same
// graph.
struct Builder {
  Graph g;
  const ModelParams& params;
  std::map<std::string, NodeId> param_nodes;
  std::mt19937_64 drop_rng;
  double dropout = 0.0;

  explicit Builder(const ModelParams& p) : params(p), drop_rng(0) {}

  int64_t dim() const { return params.config.model_dim; }

  NodeId p(const std::string& name) {
    auto it = param_nodes.find(name);
    if (it != param_nodes.end()) return it->second;
    NodeId id = g.param(name, params.at(name));
    param_nodes.emplace(name, id);
    return id;
  }

  NodeId maybe_dropout(NodeId x) {
    if (dropout <= 0.0) return x;
    double keep = 1.0 - dropout;
    Tensor mask(g.node(x).shape);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (double& v : mask.values()) {
      v = dist(drop_rng) < keep ? 1.0 / keep : 0.0;
    }
    return g.dropout(x, mask);
  }

  NodeId linear(NodeId x, const std::string& prefix) {
    return g.add_bias(g.matmul(x, p(prefix + ".w")), p(prefix + ".b"));
  }

  NodeId norm(NodeId x, const std::string& prefix) {
    return g.layer_norm_rows(x, p(prefix + ".g"), p(prefix + ".b"));
  }

  // Residual connection around a sublayer output, then layer norm.
  NodeId residual(NodeId x, NodeId sub, const std::string& ln_prefix) {
    return norm(g.add(x, maybe_dropout(sub)), ln_prefix);
  }

  NodeId attention(NodeId queries_in, NodeId keys_in, const std::string& prefix,
                   bool causal) {
    int64_t heads = params.config.heads;
    int64_t dh = dim() / heads;
    NodeId q = linear(queries_in, prefix + ".q");
    NodeId k = linear(keys_in, prefix + ".k");
    NodeId v = linear(keys_in, prefix + ".v");
    NodeId mask = -1;
    if (causal) {
      int64_t n = g.node(q).shape[0];
      Tensor m({n, n});
      for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = i + 1; j < n; ++j) {
          m.at(i, j) = -1e9;
        }
      }
      mask = g.constant(m);
    }
    std::vector<NodeId> contexts;
    for (int64_t h = 0; h < heads; ++h) {
      NodeId qh = g.slice_cols(q, h * dh, dh);
      NodeId kh = g.slice_cols(k, h * dh, dh);
      NodeId vh = g.slice_cols(v, h * dh, dh);
      NodeId scores = g.scale(g.matmul(qh, g.transpose(kh)),
                              1.0 / std::sqrt(static_cast<double>(dh)));
      if (mask >= 0) scores = g.add(scores, mask);
      contexts.push_back(g.matmul(g.softmax_rows(scores), vh));
    }
    return linear(g.concat_cols(contexts), prefix + ".o");
  }

  NodeId ffn(NodeId x, const std::string& prefix) {
    return linear(g.relu(linear(x, prefix + ".ffn1")), prefix + ".ffn2");
  }

  NodeId encoder(NodeId features) {
    int64_t frames = g.node(features).shape[0];
    std::vector<int64_t> positions(static_cast<size_t>(frames));
    for (int64_t i = 0; i < frames; ++i) positions[static_cast<size_t>(i)] = i;
    NodeId x = g.add_bias(g.matmul(features, p("enc.in.w")), p("enc.in.b"));
    x = g.add(x, g.constant(positional_encoding_rows(positions, dim())));
    x = maybe_dropout(x);
    for (int64_t l = 0; l < params.config.encoder_layers; ++l) {
      std::string pr = "enc.l" + std::to_string(l);
      x = residual(x, attention(x, x, pr + ".self", false), pr + ".ln1");
      x = residual(x, ffn(x, pr), pr + ".ln2");
    }
    return x;
  }

  NodeId decoder(NodeId memory, const std::vector<int32_t>& prefix,
                 const std::vector<int64_t>& remaining) {
    const ModelConfig& c = params.config;
    std::vector<int64_t> positions(prefix.size());
    for (size_t i = 0; i < prefix.size(); ++i) {
      positions[i] = static_cast<int64_t>(i);
    }
    NodeId emb = g.gather_rows(p("dec.embed"), prefix);
    NodeId x = g.scale(emb, std::sqrt(static_cast<double>(dim())));
    x = g.add(x, g.constant(positional_encoding_rows(positions, dim())));

    switch (c.conditioning) {
      case LengthConditioning::kNone:
        break;
      case LengthConditioning::kSinusoidalCountdown: {
        std::vector<int64_t> floored = remaining;
        for (int64_t& r : floored) r = std::max<int64_t>(r, 0);
        x = g.add(x, g.constant(positional_encoding_rows(floored, dim())));
        break;
      }
      case LengthConditioning::kLearnedEmbedding: {
        std::vector<int32_t> len_ids(remaining.size());
        for (size_t i = 0; i < remaining.size(); ++i) {
          int64_t r = std::clamp<int64_t>(remaining[i], 0, c.max_trained_length);
          len_ids[i] = static_cast<int32_t>(r);
        }
        NodeId len_emb = g.gather_rows(p("dec.len.table"), len_ids);
        NodeId cond = g.relu(g.add_bias(
            g.matmul(g.concat_cols({emb, len_emb}), p("dec.len.w")), p("dec.len.b")));
        x = g.add(x, cond);
        break;
      }
    }
    x = maybe_dropout(x);
    for (int64_t l = 0; l < c.decoder_layers; ++l) {
      std::string pr = "dec.l" + std::to_string(l);
      x = residual(x, attention(x, x, pr + ".self", true), pr + ".ln1");
      x = residual(x, attention(x, memory, pr + ".cross", false), pr + ".ln2");
      x = residual(x, ffn(x, pr), pr + ".ln3");
    }
    return linear(x, "dec.out");
  }
};

void check_features(const ModelConfig& c, const Tensor& features) {
  if (features.rank() != 2 || features.shape()[1] != c.feature_dim) {
    throw ShapeError("features must be [frames, " + std::to_string(c.feature_dim) +
                     "], got " + features.shape_string());
  }
  if (features.shape()[0] < 1) {
    throw ShapeError("feature sequence is empty");
  }
  if (features.shape()[0] > c.max_len) {
    throw ShapeError("feature sequence of " + std::to_string(features.shape()[0]) +
                     " frames exceeds max_len " + std::to_string(c.max_len));
  }
}

void check_prefix(const ModelConfig& c, const std::vector<int32_t>& prefix,
                  const std::vector<int64_t>& remaining) {
  if (prefix.empty()) {
    throw ShapeError("decoder prefix is empty");
  }
  if (static_cast<int64_t>(prefix.size()) > c.max_len) {
    throw ShapeError("decoder prefix of " + std::to_string(prefix.size()) +
                     " tokens exceeds max_len " + std::to_string(c.max_len));
  }
  if (remaining.size() != prefix.size()) {
    throw ShapeError("need one remaining-budget value per prefix position");
  }
  for (int32_t id : prefix) {
    if (id < 0 || id >= c.vocab_size) {
      throw ShapeError("token id " + std::to_string(id) +
                       " outside vocabulary of size " + std::to_string(c.vocab_size));
    }
  }
}

}  // namespace

Tensor encode_features(const ModelParams& params, const Tensor& features) {
  check_features(params.config, features);
  Builder b(params);
  NodeId memory = b.encoder(b.g.constant(features));
  b.g.run_forward();
  return b.g.value(memory);
}

Tensor decoder_logits(const ModelParams& params, const Tensor& memory,
                      const std::vector<int32_t>& prefix,
                      const std::vector<int64_t>& remaining) {
  const ModelConfig& c = params.config;
  check_prefix(c, prefix, remaining);
  if (memory.rank() != 2 || memory.shape()[1] != c.model_dim) {
    throw ShapeError("memory must be [frames, " + std::to_string(c.model_dim) +
                     "], got " + memory.shape_string());
  }
  Builder b(params);
  NodeId logits = b.decoder(b.g.constant(memory), prefix, remaining);
  b.g.run_forward();
  return b.g.value(logits);
}

Tensor decode_step(const ModelParams& params, const Tensor& memory,
                   const std::vector<int32_t>& prefix,
                   const std::vector<int64_t>& remaining) {
  Tensor logits = decoder_logits(params, memory, prefix, remaining);
  int64_t last = logits.shape()[0] - 1;
  Tensor row({logits.shape()[1]});
  for (int64_t v = 0; v < logits.shape()[1]; ++v) {
    row.at(v) = logits.at(last, v);
  }
  return row;
}

LossGraph build_loss_graph(const ModelParams& params, const Tensor& features,
                           const std::vector<int32_t>& content_ids,
                           int32_t target_tag_id, double dropout,
                           uint64_t dropout_seed) {
  const ModelConfig& c = params.config;
  check_features(c, features);
  if (content_ids.empty()) {
    throw ShapeError("training example has no content tokens");
  }

  int64_t budget = static_cast<int64_t>(content_ids.size());
  std::vector<int32_t> inputs;
  std::vector<int32_t> targets;
  std::vector<double> weights;
  std::vector<int64_t> remaining;
  inputs.push_back(kBosId);
  remaining.push_back(budget);
  if (target_tag_id >= 0) {
    inputs.push_back(target_tag_id);
    remaining.push_back(budget);
    targets.push_back(target_tag_id);
    weights.push_back(0.0);  // the tag is forced at decode time, not predicted
  }
  for (size_t i = 0; i < content_ids.size(); ++i) {
    targets.push_back(content_ids[i]);
    weights.push_back(1.0);
    if (i + 1 < content_ids.size()) {
      inputs.push_back(content_ids[i]);
      remaining.push_back(budget - static_cast<int64_t>(i) - 1);
    }
  }
  inputs.push_back(content_ids.back());
  remaining.push_back(0);
  targets.push_back(kEosId);
  weights.push_back(1.0);

  check_prefix(c, inputs, remaining);

  LossGraph out;
  Builder b(params);
  b.dropout = dropout;
  b.drop_rng.seed(dropout_seed);
  NodeId memory = b.encoder(b.g.constant(features));
  NodeId logits = b.decoder(memory, inputs, remaining);
  NodeId loss = b.g.cross_entropy(logits, targets, weights, c.label_smoothing);
  out.targets = targets;
  out.weights = weights;
  for (double w : weights) out.weight_sum += w;
  out.loss = loss;
  out.logits = logits;
  out.graph = std::move(b.g);
  return out;
}

}  // namespace lenctl
