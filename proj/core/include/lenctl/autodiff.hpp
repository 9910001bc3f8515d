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

#include "lenctl/tensor.hpp"

namespace lenctl {

// Reverse-mode automatic differentiation over a retained computation graph.
//
// A Graph is built once per example: builder calls append nodes, so creation
// order is already a topological order and backward is a single reverse
// sweep. Nodes keep their forward values alive for the backward pass.
// Shapes are inferred and validated at build time; a mismatch throws
// ShapeError naming the offending node.

using NodeId = int32_t;

enum class Op : uint8_t {
  kPlaceholder,
  kParam,
  kConstant,
  kAdd,
  kMul,
  kScale,
  kAddBias,
  kMatMul,
  kTranspose,
  kRelu,
  kSoftmaxRows,
  kLayerNormRows,
  kGatherRows,
  kConcatCols,
  kSliceCols,
  kDropout,
  kSum,
  kCrossEntropy,
};

const char* op_name(Op op);

struct Node {
  Op op = Op::kConstant;
  std::string name;
  std::vector<NodeId> args;
  std::vector<int64_t> shape;
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool bound = false;  // placeholders: input supplied

  // Per-op attributes; unused ones stay at their defaults.
  double scalar = 0.0;           // kScale factor, kCrossEntropy smoothing
  double weight_sum = 0.0;       // kCrossEntropy: sum of position weights
  int64_t begin = 0;             // kSliceCols
  int64_t count = 0;             // kSliceCols
  std::vector<int32_t> indices;  // kGatherRows row ids, kCrossEntropy targets
  std::vector<double> weights;   // kCrossEntropy per-position weights
  Tensor aux, aux2;              // forward caches for the backward pass
};

class Graph {
 public:
  // Leaf nodes.
  NodeId placeholder(const std::string& name, std::vector<int64_t> shape);
  NodeId param(const std::string& name, const Tensor& init);
  NodeId constant(const Tensor& value, const std::string& name = "");

  // Elementwise and linear algebra. add/mul require identical shapes;
  // add_bias adds a rank-1 bias to every row of a matrix.
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);
  NodeId add_bias(NodeId a, NodeId bias);
  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId a);
  NodeId relu(NodeId a);

  // Row-wise softmax with max subtraction, safe for large magnitudes.
  NodeId softmax_rows(NodeId a);

  // Row-wise layer normalization with learned gain and shift (rank-1 each).
  NodeId layer_norm_rows(NodeId x, NodeId gamma, NodeId beta);

  // Picks rows of a matrix by index; backward scatter-adds into the table.
  NodeId gather_rows(NodeId table, std::vector<int32_t> ids);

  NodeId concat_cols(const std::vector<NodeId>& parts);
  NodeId slice_cols(NodeId a, int64_t begin, int64_t count);

  // Multiplies by a precomputed mask whose kept entries are 1/keep_prob.
  // Inference graphs simply omit the node.
  NodeId dropout(NodeId a, const Tensor& scaled_mask);

  NodeId sum(NodeId a);

  // Label-smoothed cross entropy over rows of logits, fused with a stable
  // log-softmax. Returns a scalar: the weighted mean over positions of
  //   -(1 - smoothing) * log p[target] - (smoothing / V) * sum_v log p[v].
  // Positions with weight 0 do not contribute to loss or gradient.
  NodeId cross_entropy(NodeId logits, std::vector<int32_t> targets,
                       std::vector<double> weights, double smoothing);

  // Binds a placeholder. Rebinding replaces the previous value.
  void set_input(const std::string& name, Tensor value);

  // Evaluates every node in creation order. In 32-bit mode each produced
  // value is rounded through float; see tensor.hpp.
  void run_forward();

  // Reverse sweep from a scalar node. seed scales the whole gradient, which
  // lets a caller weight one example's contribution inside a batch.
  // Gradients accumulate in double and are rounded once at the end in
  // 32-bit mode. Parameters the loss never touches keep zero gradients.
  void run_backward(NodeId loss, double seed = 1.0);

  const Tensor& value(NodeId id) const;
  // Gradient of the last run_backward target w.r.t. this node. Throws if
  // backward has not run or the node does not require gradients.
  const Tensor& grad(NodeId id) const;

  Node& node(NodeId id);
  const Node& node(NodeId id) const;
  int64_t size() const { return static_cast<int64_t>(nodes_.size()); }
  const std::vector<NodeId>& param_ids() const { return param_ids_; }

  // Named node lookup (placeholders and params register automatically).
  NodeId find(const std::string& name) const;  // -1 when absent

  void mark_output(const std::string& name, NodeId id);
  const Tensor& output(const std::string& name) const;

  bool forward_done() const { return forward_done_; }

 private:
  NodeId append(Node n);
  NodeId check_id(NodeId id) const;
  void register_name(const std::string& name, NodeId id);
  void eval_node(Node& n);
  void backprop_node(Node& n);

  std::vector<Node> nodes_;
  std::vector<NodeId> param_ids_;
  std::map<std::string, NodeId> by_name_;
  std::map<std::string, NodeId> outputs_;
  bool forward_done_ = false;
  bool backward_done_ = false;
};

// Numerical gradient verification via central differences. Requires 64-bit
// mode. Every element of every parameter is perturbed by +/-step, the loss
// re-evaluated, and the quotient compared against the analytic gradient:
//   rel_err = |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
struct FdParamReport {
  std::string param;
  double max_rel_err = 0.0;
  int64_t elements = 0;
  int64_t flagged = 0;
};

struct FdReport {
  double step = 0.0;
  double tolerance = 0.0;
  double max_rel_err = 0.0;
  int64_t elements = 0;
  int64_t flagged = 0;
  std::vector<FdParamReport> params;
  bool passed() const { return flagged == 0; }
};

FdReport finite_difference_check(Graph& graph, NodeId loss,
                                 double step = 1e-5, double tolerance = 1e-4);

}  // namespace lenctl
