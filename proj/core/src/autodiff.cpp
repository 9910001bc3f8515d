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

#include "lenctl/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "lenctl/common.hpp"

namespace lenctl {

namespace {
constexpr double kLayerNormEps = 1e-5;
}

const char* op_name(Op op) {
  switch (op) {
    case Op::kPlaceholder: return "placeholder";
    case Op::kParam: return "param";
    case Op::kConstant: return "constant";
    case Op::kAdd: return "add";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kAddBias: return "add_bias";
    case Op::kMatMul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kRelu: return "relu";
    case Op::kSoftmaxRows: return "softmax_rows";
    case Op::kLayerNormRows: return "layer_norm_rows";
    case Op::kGatherRows: return "gather_rows";
    case Op::kConcatCols: return "concat_cols";
    case Op::kSliceCols: return "slice_cols";
    case Op::kDropout: return "dropout";
    case Op::kSum: return "sum";
    case Op::kCrossEntropy: return "cross_entropy";
  }
  return "?";
}

NodeId Graph::append(Node n) {
  if (n.name.empty()) {
    n.name = std::string(op_name(n.op)) + "#" + std::to_string(nodes_.size());
  }
  for (NodeId a : n.args) {
    if (nodes_[static_cast<size_t>(a)].requires_grad) {
      n.requires_grad = true;
    }
  }
  nodes_.push_back(std::move(n));
  forward_done_ = false;
  backward_done_ = false;
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::check_id(NodeId id) const {
  if (id < 0 || id >= size()) {
    throw Error("node id " + std::to_string(id) + " out of range");
  }
  return id;
}

void Graph::register_name(const std::string& name, NodeId id) {
  if (name.empty()) {
    throw Error("node name must not be empty");
  }
  auto [it, inserted] = by_name_.emplace(name, id);
  (void)it;
  if (!inserted) {
    throw Error("duplicate node name: " + name);
  }
}

NodeId Graph::placeholder(const std::string& name, std::vector<int64_t> shape) {
  Node n;
  n.op = Op::kPlaceholder;
  n.name = name;
  n.shape = std::move(shape);
  NodeId id = append(std::move(n));
  register_name(name, id);
  return id;
}

NodeId Graph::param(const std::string& name, const Tensor& init) {
  Node n;
  n.op = Op::kParam;
  n.name = name;
  n.shape = init.shape();
  n.value = init;
  n.requires_grad = true;
  n.bound = true;
  NodeId id = append(std::move(n));
  register_name(name, id);
  param_ids_.push_back(id);
  return id;
}

NodeId Graph::constant(const Tensor& value, const std::string& name) {
  Node n;
  n.op = Op::kConstant;
  n.name = name;
  n.shape = value.shape();
  n.value = value;
  n.bound = true;
  NodeId id = append(std::move(n));
  if (!name.empty()) {
    register_name(name, id);
  }
  return id;
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Node& na = node(check_id(a));
  const Node& nb = node(check_id(b));
  if (na.shape != nb.shape) {
    throw ShapeError("add: shape mismatch " + shape_to_string(na.shape) + " vs " +
                     shape_to_string(nb.shape) + " (" + na.name + ", " + nb.name + ")");
  }
  Node n;
  n.op = Op::kAdd;
  n.args = {a, b};
  n.shape = na.shape;
  return append(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  const Node& na = node(check_id(a));
  const Node& nb = node(check_id(b));
  if (na.shape != nb.shape) {
    throw ShapeError("mul: shape mismatch " + shape_to_string(na.shape) + " vs " +
                     shape_to_string(nb.shape) + " (" + na.name + ", " + nb.name + ")");
  }
  Node n;
  n.op = Op::kMul;
  n.args = {a, b};
  n.shape = na.shape;
  return append(std::move(n));
}

NodeId Graph::scale(NodeId a, double factor) {
  const Node& na = node(check_id(a));
  Node n;
  n.op = Op::kScale;
  n.args = {a};
  n.shape = na.shape;
  n.scalar = factor;
  return append(std::move(n));
}

NodeId Graph::add_bias(NodeId a, NodeId bias) {
  const Node& na = node(check_id(a));
  const Node& nb = node(check_id(bias));
  if (na.shape.size() != 2 || nb.shape.size() != 1 || nb.shape[0] != na.shape[1]) {
    throw ShapeError("add_bias: expected [r, c] and [c], got " +
                     shape_to_string(na.shape) + " and " + shape_to_string(nb.shape) +
                     " (" + na.name + ", " + nb.name + ")");
  }
  Node n;
  n.op = Op::kAddBias;
  n.args = {a, bias};
  n.shape = na.shape;
  return append(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Node& na = node(check_id(a));
  const Node& nb = node(check_id(b));
  if (na.shape.size() != 2 || nb.shape.size() != 2 || na.shape[1] != nb.shape[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(na.shape) +
                     " x " + shape_to_string(nb.shape) + " (" + na.name + ", " +
                     nb.name + ")");
  }
  Node n;
  n.op = Op::kMatMul;
  n.args = {a, b};
  n.shape = {na.shape[0], nb.shape[1]};
  return append(std::move(n));
}

NodeId Graph::transpose(NodeId a) {
  const Node& na = node(check_id(a));
  if (na.shape.size() != 2) {
    throw ShapeError("transpose: expected rank 2, got " + shape_to_string(na.shape) +
                     " (" + na.name + ")");
  }
  Node n;
  n.op = Op::kTranspose;
  n.args = {a};
  n.shape = {na.shape[1], na.shape[0]};
  return append(std::move(n));
}

NodeId Graph::relu(NodeId a) {
  const Node& na = node(check_id(a));
  Node n;
  n.op = Op::kRelu;
  n.args = {a};
  n.shape = na.shape;
  return append(std::move(n));
}

NodeId Graph::softmax_rows(NodeId a) {
  const Node& na = node(check_id(a));
  if (na.shape.size() != 2) {
    throw ShapeError("softmax_rows: expected rank 2, got " +
                     shape_to_string(na.shape) + " (" + na.name + ")");
  }
  Node n;
  n.op = Op::kSoftmaxRows;
  n.args = {a};
  n.shape = na.shape;
  return append(std::move(n));
}

NodeId Graph::layer_norm_rows(NodeId x, NodeId gamma, NodeId beta) {
  const Node& nx = node(check_id(x));
  const Node& ng = node(check_id(gamma));
  const Node& nb = node(check_id(beta));
  bool ok = nx.shape.size() == 2 && ng.shape.size() == 1 && nb.shape.size() == 1 &&
            ng.shape[0] == nx.shape[1] && nb.shape[0] == nx.shape[1];
  if (!ok) {
    throw ShapeError("layer_norm_rows: expected [r, c], [c], [c], got " +
                     shape_to_string(nx.shape) + ", " + shape_to_string(ng.shape) +
                     ", " + shape_to_string(nb.shape) + " (" + nx.name + ")");
  }
  Node n;
  n.op = Op::kLayerNormRows;
  n.args = {x, gamma, beta};
  n.shape = nx.shape;
  return append(std::move(n));
}

NodeId Graph::gather_rows(NodeId table, std::vector<int32_t> ids) {
  const Node& nt = node(check_id(table));
  if (nt.shape.size() != 2) {
    throw ShapeError("gather_rows: table must be rank 2, got " +
                     shape_to_string(nt.shape) + " (" + nt.name + ")");
  }
  for (int32_t i : ids) {
    if (i < 0 || i >= nt.shape[0]) {
      throw ShapeError("gather_rows: row id " + std::to_string(i) +
                       " out of range for table " + shape_to_string(nt.shape) +
                       " (" + nt.name + ")");
    }
  }
  Node n;
  n.op = Op::kGatherRows;
  n.args = {table};
  n.shape = {static_cast<int64_t>(ids.size()), nt.shape[1]};
  n.indices = std::move(ids);
  return append(std::move(n));
}

NodeId Graph::concat_cols(const std::vector<NodeId>& parts) {
  if (parts.empty()) {
    throw ShapeError("concat_cols: no inputs");
  }
  int64_t rows = -1;
  int64_t cols = 0;
  for (NodeId p : parts) {
    const Node& np = node(check_id(p));
    if (np.shape.size() != 2) {
      throw ShapeError("concat_cols: expected rank 2, got " +
                       shape_to_string(np.shape) + " (" + np.name + ")");
    }
    if (rows < 0) rows = np.shape[0];
    if (np.shape[0] != rows) {
      throw ShapeError("concat_cols: row mismatch at " + np.name);
    }
    cols += np.shape[1];
  }
  Node n;
  n.op = Op::kConcatCols;
  n.args = parts;
  n.shape = {rows, cols};
  return append(std::move(n));
}

NodeId Graph::slice_cols(NodeId a, int64_t begin, int64_t count) {
  const Node& na = node(check_id(a));
  if (na.shape.size() != 2 || begin < 0 || count <= 0 ||
      begin + count > na.shape[1]) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") invalid for " +
                     shape_to_string(na.shape) + " (" + na.name + ")");
  }
  Node n;
  n.op = Op::kSliceCols;
  n.args = {a};
  n.shape = {na.shape[0], count};
  n.begin = begin;
  n.count = count;
  return append(std::move(n));
}

NodeId Graph::dropout(NodeId a, const Tensor& scaled_mask) {
  const Node& na = node(check_id(a));
  if (na.shape != scaled_mask.shape()) {
    throw ShapeError("dropout: mask shape " + shape_to_string(scaled_mask.shape()) +
                     " does not match input " + shape_to_string(na.shape) + " (" +
                     na.name + ")");
  }
  Node n;
  n.op = Op::kDropout;
  n.args = {a};
  n.shape = na.shape;
  n.aux = scaled_mask;
  return append(std::move(n));
}

NodeId Graph::sum(NodeId a) {
  check_id(a);
  Node n;
  n.op = Op::kSum;
  n.args = {a};
  n.shape = {};
  return append(std::move(n));
}

NodeId Graph::cross_entropy(NodeId logits, std::vector<int32_t> targets,
                            std::vector<double> weights, double smoothing) {
  const Node& nl = node(check_id(logits));
  if (nl.shape.size() != 2) {
    throw ShapeError("cross_entropy: logits must be rank 2, got " +
                     shape_to_string(nl.shape) + " (" + nl.name + ")");
  }
  int64_t rows = nl.shape[0];
  int64_t vocab = nl.shape[1];
  if (static_cast<int64_t>(targets.size()) != rows ||
      static_cast<int64_t>(weights.size()) != rows) {
    throw ShapeError("cross_entropy: need one target and one weight per row of " +
                     shape_to_string(nl.shape) + " (" + nl.name + ")");
  }
  if (smoothing < 0.0 || smoothing >= 1.0) {
    throw ConfigError("cross_entropy: smoothing must lie in [0, 1)");
  }
  double weight_sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) {
      throw ConfigError("cross_entropy: negative position weight");
    }
    weight_sum += w;
  }
  if (weight_sum <= 0.0) {
    throw ConfigError("cross_entropy: all position weights are zero");
  }
  for (int32_t t : targets) {
    if (t < 0 || t >= vocab) {
      throw ShapeError("cross_entropy: target id " + std::to_string(t) +
                       " outside vocabulary of size " + std::to_string(vocab));
    }
  }
  Node n;
  n.op = Op::kCrossEntropy;
  n.args = {logits};
  n.shape = {};
  n.scalar = smoothing;
  n.weight_sum = weight_sum;
  n.indices = std::move(targets);
  n.weights = std::move(weights);
  return append(std::move(n));
}

void Graph::set_input(const std::string& name, Tensor value) {
  NodeId id = find(name);
  if (id < 0) {
    throw Error("no placeholder named '" + name + "'");
  }
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.op != Op::kPlaceholder) {
    throw Error("node '" + name + "' is not a placeholder");
  }
  if (value.shape() != n.shape) {
    throw ShapeError("input '" + name + "' has shape " + value.shape_string() +
                     ", expected " + shape_to_string(n.shape));
  }
  n.value = std::move(value);
  n.value.quantize();
  n.bound = true;
  forward_done_ = false;
}

NodeId Graph::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? -1 : it->second;
}

void Graph::mark_output(const std::string& name, NodeId id) {
  outputs_[name] = check_id(id);
}

const Tensor& Graph::output(const std::string& name) const {
  auto it = outputs_.find(name);
  if (it == outputs_.end()) {
    throw Error("no output named '" + name + "'");
  }
  return value(it->second);
}

Node& Graph::node(NodeId id) { return nodes_[static_cast<size_t>(check_id(id))]; }

const Node& Graph::node(NodeId id) const {
  return nodes_[static_cast<size_t>(check_id(id))];
}

const Tensor& Graph::value(NodeId id) const {
  const Node& n = node(id);
  if (!forward_done_ && n.op != Op::kParam && n.op != Op::kConstant) {
    throw Error("value of '" + n.name + "' requested before run_forward()");
  }
  return n.value;
}

const Tensor& Graph::grad(NodeId id) const {
  if (!backward_done_) {
    throw Error("gradient requested before run_backward()");
  }
  const Node& n = node(id);
  if (!n.requires_grad) {
    throw Error("node '" + n.name + "' does not carry a gradient");
  }
  return n.grad;
}

void Graph::run_forward() {
  for (Node& n : nodes_) {
    if (n.op == Op::kPlaceholder) {
      if (!n.bound) {
        throw Error("placeholder '" + n.name + "' is unbound");
      }
      continue;
    }
    if (n.op == Op::kParam || n.op == Op::kConstant) {
      continue;
    }
    eval_node(n);
    n.value.quantize();
  }
  forward_done_ = true;
}

void Graph::eval_node(Node& n) {
  auto arg = [&](size_t i) -> const Tensor& {
    return nodes_[static_cast<size_t>(n.args[i])].value;
  };
  switch (n.op) {
    case Op::kAdd: {
      const Tensor& a = arg(0);
      const Tensor& b = arg(1);
      n.value = Tensor(n.shape);
      for (int64_t i = 0; i < a.numel(); ++i) {
        n.value.values()[static_cast<size_t>(i)] =
            a.values()[static_cast<size_t>(i)] + b.values()[static_cast<size_t>(i)];
      }
      break;
    }
    case Op::kMul: {
      const Tensor& a = arg(0);
      const Tensor& b = arg(1);
      n.value = Tensor(n.shape);
      for (int64_t i = 0; i < a.numel(); ++i) {
        n.value.values()[static_cast<size_t>(i)] =
            a.values()[static_cast<size_t>(i)] * b.values()[static_cast<size_t>(i)];
      }
      break;
    }
    case Op::kScale: {
      const Tensor& a = arg(0);
      n.value = Tensor(n.shape);
      for (int64_t i = 0; i < a.numel(); ++i) {
        n.value.values()[static_cast<size_t>(i)] =
            a.values()[static_cast<size_t>(i)] * n.scalar;
      }
      break;
    }
    case Op::kAddBias: {
      const Tensor& a = arg(0);
      const Tensor& b = arg(1);
      int64_t rows = n.shape[0], cols = n.shape[1];
      n.value = Tensor(n.shape);
      for (int64_t r = 0; r < rows; ++r) {
        const double* ap = a.data() + r * cols;
        double* op = n.value.data() + r * cols;
        for (int64_t c = 0; c < cols; ++c) {
          op[c] = ap[c] + b.data()[c];
        }
      }
      break;
    }
    case Op::kMatMul: {
      const Tensor& a = arg(0);
      const Tensor& b = arg(1);
      int64_t m = a.shape()[0], k = a.shape()[1], p = b.shape()[1];
      n.value = Tensor(n.shape);
      double* out = n.value.data();
      for (int64_t i = 0; i < m; ++i) {
        const double* arow = a.data() + i * k;
        double* orow = out + i * p;
        for (int64_t kk = 0; kk < k; ++kk) {
          double av = arow[kk];
          const double* brow = b.data() + kk * p;
          for (int64_t j = 0; j < p; ++j) {
            orow[j] += av * brow[j];
          }
        }
      }
      break;
    }
    case Op::kTranspose: {
      const Tensor& a = arg(0);
      int64_t r = a.shape()[0], c = a.shape()[1];
      n.value = Tensor(n.shape);
      for (int64_t i = 0; i < r; ++i) {
        for (int64_t j = 0; j < c; ++j) {
          n.value.at(j, i) = a.at(i, j);
        }
      }
      break;
    }
    case Op::kRelu: {
      const Tensor& a = arg(0);
      n.value = Tensor(n.shape);
      for (int64_t i = 0; i < a.numel(); ++i) {
        double v = a.values()[static_cast<size_t>(i)];
        n.value.values()[static_cast<size_t>(i)] = v > 0.0 ? v : 0.0;
      }
      break;
    }
    case Op::kSoftmaxRows: {
      const Tensor& a = arg(0);
      int64_t rows = n.shape[0], cols = n.shape[1];
      n.value = Tensor(n.shape);
      for (int64_t r = 0; r < rows; ++r) {
        const double* in = a.data() + r * cols;
        double* out = n.value.data() + r * cols;
        double mx = in[0];
        for (int64_t c = 1; c < cols; ++c) mx = std::max(mx, in[c]);
        double total = 0.0;
        for (int64_t c = 0; c < cols; ++c) {
          out[c] = std::exp(in[c] - mx);
          total += out[c];
        }
        for (int64_t c = 0; c < cols; ++c) out[c] /= total;
      }
      break;
    }
    case Op::kLayerNormRows: {
      const Tensor& x = arg(0);
      const Tensor& gamma = arg(1);
      const Tensor& beta = arg(2);
      int64_t rows = n.shape[0], cols = n.shape[1];
      n.value = Tensor(n.shape);
      n.aux = Tensor({rows, cols});   // normalized input
      n.aux2 = Tensor({rows});        // 1 / sqrt(var + eps)
      for (int64_t r = 0; r < rows; ++r) {
        const double* in = x.data() + r * cols;
        double mean = 0.0;
        for (int64_t c = 0; c < cols; ++c) mean += in[c];
        mean /= static_cast<double>(cols);
        double var = 0.0;
        for (int64_t c = 0; c < cols; ++c) {
          double d = in[c] - mean;
          var += d * d;
        }
        var /= static_cast<double>(cols);
        double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        n.aux2.at(r) = inv;
        double* xh = n.aux.data() + r * cols;
        double* out = n.value.data() + r * cols;
        for (int64_t c = 0; c < cols; ++c) {
          xh[c] = (in[c] - mean) * inv;
          out[c] = gamma.data()[c] * xh[c] + beta.data()[c];
        }
      }
      break;
    }
    case Op::kGatherRows: {
      const Tensor& table = arg(0);
      int64_t cols = n.shape[1];
      n.value = Tensor(n.shape);
      for (size_t r = 0; r < n.indices.size(); ++r) {
        const double* src = table.data() + int64_t(n.indices[r]) * cols;
        double* dst = n.value.data() + int64_t(r) * cols;
        std::copy(src, src + cols, dst);
      }
      break;
    }
    case Op::kConcatCols: {
      int64_t rows = n.shape[0], cols = n.shape[1];
      n.value = Tensor(n.shape);
      int64_t offset = 0;
      for (NodeId a : n.args) {
        const Tensor& part = nodes_[static_cast<size_t>(a)].value;
        int64_t pc = part.shape()[1];
        for (int64_t r = 0; r < rows; ++r) {
          std::copy(part.data() + r * pc, part.data() + (r + 1) * pc,
                    n.value.data() + r * cols + offset);
        }
        offset += pc;
      }
      break;
    }
    case Op::kSliceCols: {
      const Tensor& a = arg(0);
      int64_t rows = n.shape[0], cols = a.shape()[1];
      n.value = Tensor(n.shape);
      for (int64_t r = 0; r < rows; ++r) {
        const double* src = a.data() + r * cols + n.begin;
        std::copy(src, src + n.count, n.value.data() + r * n.count);
      }
      break;
    }
    case Op::kDropout: {
      const Tensor& a = arg(0);
      n.value = Tensor(n.shape);
      for (int64_t i = 0; i < a.numel(); ++i) {
        n.value.values()[static_cast<size_t>(i)] =
            a.values()[static_cast<size_t>(i)] * n.aux.values()[static_cast<size_t>(i)];
      }
     break;
    }
    case Op::kSum: {
      const Tensor& a = arg(0);
      double total = 0.0;
      for (double v : a.values()) total += v;
      n.value = Tensor::scalar(total);
      break;
    }
    case Op::kCrossEntropy: {
      const Tensor& logits = arg(0);
      int64_t rows = logits.shape()[0], vocab = logits.shape()[1];
      n.aux = Tensor({rows, vocab});  // softmax cache for backward
      double smoothing = n.scalar;
      double uniform = smoothing / static_cast<double>(vocab);
      double loss = 0.0;
      for (int64_t r = 0; r < rows; ++r) {
        const double* z = logits.data() + r * vocab;
        double* p = n.aux.data() + r * vocab;
        double mx = z[0];
        for (int64_t v = 1; v < vocab; ++v) mx = std::max(mx, z[v]);
        double total = 0.0;
        for (int64_t v = 0; v < vocab; ++v) {
          p[v] = std::exp(z[v] - mx);
          total += p[v];
        }
        double lse = mx + std::log(total);
        for (int64_t v = 0; v < vocab; ++v) p[v] /= total;
        double w = n.weights[static_cast<size_t>(r)];
        if (w == 0.0) continue;
        double ce = -(1.0 - smoothing) * (z[n.indices[static_cast<size_t>(r)]] - lse);
        if (uniform > 0.0) {
          double sum_logp = 0.0;
          for (int64_t v = 0; v < vocab; ++v) sum_logp += z[v] - lse;
          ce -= uniform * sum_logp;
        }
        loss += w * ce;
      }
      n.value = Tensor::scalar(loss / n.weight_sum);
      break;
    }
    case Op::kPlaceholder:
    case Op::kParam:
    case Op::kConstant:
      break;
  }
}

void Graph::run_backward(NodeId loss, double seed) {
  check_id(loss);
  if (!forward_done_) {
    throw Error("run_backward() before run_forward()");
  }
  Node& ln = nodes_[static_cast<size_t>(loss)];
  if (ln.value.numel() != 1) {
    throw Error("backward target '" + ln.name + "' is not a scalar (shape " +
                shape_to_string(ln.shape) + ")");
  }
  if (!ln.requires_grad) {
    throw Error("backward target '" + ln.name + "' does not depend on any parameter");
  }
  for (Node& n : nodes_) {
    if (n.requires_grad) {
      n.grad = Tensor::zeros(n.shape);
    }
  }
  ln.grad = Tensor::from_values({}, {seed});
  for (NodeId id = loss; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.requires_grad) continue;
    backprop_node(n);
  }
  if (default_dtype() == DType::kF32) {
    for (Node& n : nodes_) {
      if (n.requires_grad) n.grad.quantize();
    }
  }
  backward_done_ = true;
}

void Graph::backprop_node(Node& n) {
  auto garg = [&](size_t i) -> Node& {
    return nodes_[static_cast<size_t>(n.args[i])];
  };
  auto wants = [&](size_t i) { return garg(i).requires_grad; };
  const Tensor& gy = n.grad;
  switch (n.op) {
    case Op::kPlaceholder:
    case Op::kParam:
    case Op::kConstant:
      break;
    case Op::kAdd: {
      for (size_t s = 0; s < 2; ++s) {
        if (!wants(s)) continue;
        Node& a = garg(s);
        for (int64_t i = 0; i < gy.numel(); ++i) {
          a.grad.values()[static_cast<size_t>(i)] += gy.values()[static_cast<size_t>(i)];
        }
      }
      break;
    }
    case Op::kMul: {
      for (size_t s = 0; s < 2; ++s) {
        if (!wants(s)) continue;
        Node& a = garg(s);
        const Tensor& other = garg(1 - s).value;
        for (int64_t i = 0; i < gy.numel(); ++i) {
          a.grad.values()[static_cast<size_t>(i)] +=
              gy.values()[static_cast<size_t>(i)] * other.values()[static_cast<size_t>(i)];
        }
      }
      break;
    }
    case Op::kScale: {
      if (!wants(0)) break;
      Node& a = garg(0);
      for (int64_t i = 0; i < gy.numel(); ++i) {
        a.grad.values()[static_cast<size_t>(i)] +=
            gy.values()[static_cast<size_t>(i)] * n.scalar;
      }
      break;
    }
    case Op::kAddBias: {
      int64_t rows = n.shape[0], cols = n.shape[1];
      if (wants(0)) {
        Node& a = garg(0);
        for (int64_t i = 0; i < gy.numel(); ++i) {
          a.grad.values()[static_cast<size_t>(i)] += gy.values()[static_cast<size_t>(i)];
        }
      }
      if (wants(1)) {
        Node& b = garg(1);
        for (int64_t r = 0; r < rows; ++r) {
          const double* g = gy.data() + r * cols;
          for (int64_t c = 0; c < cols; ++c) {
            b.grad.data()[c] += g[c];
          }
        }
      }
      break;
    }
    case Op::kMatMul: {
      const Tensor& a = garg(0).value;
      const Tensor& b = garg(1).value;
      int64_t m = a.shape()[0], k = a.shape()[1], p = b.shape()[1];
      if (wants(0)) {
        // dA = dY * B^T, computed as dot products along rows of B.
        Tensor& ga = garg(0).grad;
        for (int64_t i = 0; i < m; ++i) {
          const double* gr = gy.data() + i * p;
          double* gar = ga.data() + i * k;
          for (int64_t kk = 0; kk < k; ++kk) {
            const double* br = b.data() + kk * p;
            double acc = 0.0;
            for (int64_t j = 0; j < p; ++j) acc += gr[j] * br[j];
            gar[kk] += acc;
          }
        }
      }
      if (wants(1)) {
        // dB = A^T * dY, accumulated row by row.
        Tensor& gb = garg(1).grad;
        for (int64_t i = 0; i < m; ++i) {
          const double* ar = a.data() + i * k;
          const double* gr = gy.data() + i * p;
          for (int64_t kk = 0; kk < k; ++kk) {
            double av = ar[kk];
            if (av == 0.0) continue;
            double* gbr = gb.data() + kk * p;
            for (int64_t j = 0; j < p; ++j) gbr[j] += av * gr[j];
          }
        }
      }
      break;
    }
    case Op::kTranspose: {
      if (!wants(0)) break;
      Node& a = garg(0);
      int64_t r = n.shape[0], c = n.shape[1];
      for (int64_t i = 0; i < r; ++i) {
        for (int64_t j = 0; j < c; ++j) {
          a.grad.at(j, i) += gy.at(i, j);
        }
      }
      break;
    }
    case Op::kRelu: {
      if (!wants(0)) break;
      Node& a = garg(0);
      for (int64_t i = 0; i < gy.numel(); ++i) {
        if (a.value.values()[static_cast<size_t>(i)] > 0.0) {
          a.grad.values()[static_cast<size_t>(i)] += gy.values()[static_cast<size_t>(i)];
        }
      }
      break;
    }
    case Op::kSoftmaxRows: {
      if (!wants(0)) break;
      Node& a = garg(0);
      int64_t rows = n.shape[0], cols = n.shape[1];
      for (int64_t r = 0; r < rows; ++r) {
        const double* y = n.value.data() + r * cols;
        const double* g = gy.data() + r * cols;
        double dot = 0.0;
        for (int64_t c = 0; c < cols; ++c) dot += y[c] * g[c];
        double* ga = a.grad.data() + r * cols;
        for (int64_t c = 0; c < cols; ++c) {
          ga[c] += y[c] * (g[c] - dot);
        }
      }
      break;
    }
    case Op::kLayerNormRows: {
      const Tensor& gamma = garg(1).value;
      int64_t rows = n.shape[0], cols = n.shape[1];
      double inv_n = 1.0 / static_cast<double>(cols);
      for (int64_t r = 0; r < rows; ++r) {
        const double* g = gy.data() + r * cols;
        const double* xh = n.aux.data() + r * cols;
        double inv = n.aux2.at(r);
        if (wants(1)) {
          double* gg = garg(1).grad.data();
          for (int64_t c = 0; c < cols; ++c) gg[c] += g[c] * xh[c];
        }
        if (wants(2)) {
          double* gb = garg(2).grad.data();
          for (int64_t c = 0; c < cols; ++c) gb[c] += g[c];
        }
        if (wants(0)) {
          // dx = inv/n * (n*dxh - sum(dxh) - xh * sum(dxh*xh))
          double sum_dxh = 0.0, sum_dxh_xh = 0.0;
          for (int64_t c = 0; c < cols; ++c) {
            double dxh = g[c] * gamma.data()[c];
            sum_dxh += dxh;
            sum_dxh_xh += dxh * xh[c];
          }
          double* gx = garg(0).grad.data() + r * cols;
          for (int64_t c = 0; c < cols; ++c) {
            double dxh = g[c] * gamma.data()[c];
            gx[c] += inv * (dxh - inv_n * sum_dxh - inv_n * xh[c] * sum_dxh_xh);
          }
        }
      }
      break;
    }
    case Op::kGatherRows: {
      if (!wants(0)) break;
      Node& table = garg(0);
      int64_t cols = n.shape[1];
      for (size_t r = 0; r < n.indices.size(); ++r) {
        const double* g = gy.data() + int64_t(r) * cols;
        double* gt = table.grad.data() + int64_t(n.indices[r]) * cols;
        for (int64_t c = 0; c < cols; ++c) gt[c] += g[c];
      }
      break;
    }
    case Op::kConcatCols: {
      int64_t rows = n.shape[0], cols = n.shape[1];
      int64_t offset = 0;
      for (size_t s = 0; s < n.args.size(); ++s) {
        Node& part = garg(s);
        int64_t pc = part.shape[1];
        if (part.requires_grad) {
          for (int64_t r = 0; r < rows; ++r) {
            const double* g = gy.data() + r * cols + offset;
            double* gp = part.grad.data() + r * pc;
            for (int64_t c = 0; c < pc; ++c) gp[c] += g[c];
          }
        }
        offset += pc;
      }
      break;
    }
    case Op::kSliceCols: {
      if (!wants(0)) break;
      Node& a = garg(0);
      int64_t rows = n.shape[0], cols = a.shape[1];
      for (int64_t r = 0; r < rows; ++r) {
        const double* g = gy.data() + r * n.count;
        double* ga = a.grad.data() + r * cols + n.begin;
        for (int64_t c = 0; c < n.count; ++c) ga[c] += g[c];
      }
      break;
    }
    case Op::kDropout: {
      if (!wants(0)) break;
      Node& a = garg(0);
      for (int64_t i = 0; i < gy.numel(); ++i) {
        a.grad.values()[static_cast<size_t>(i)] +=
            gy.values()[static_cast<size_t>(i)] * n.aux.values()[static_cast<size_t>(i)];
      }
      break;
    }
    case Op::kSum: {
      if (!wants(0)) break;
      Node& a = garg(0);
      double g = gy.item();
      for (double& v : a.grad.values()) v += g;
      break;
    }
    case Op::kCrossEntropy: {
      if (!wants(0)) break;
      Node& a = garg(0);
      int64_t rows = a.shape[0], vocab = a.shape[1];
      double smoothing = n.scalar;
      double uniform = smoothing / static_cast<double>(vocab);
      double upstream = gy.item() / n.weight_sum;
      for (int64_t r = 0; r < rows; ++r) {
        double w = n.weights[static_cast<size_t>(r)];
        if (w == 0.0) continue;
        double f = w * upstream;
        const double* p = n.aux.data() + r * vocab;
        double* g = a.grad.data() + r * vocab;
        int32_t target = n.indices[static_cast<size_t>(r)];
        for (int64_t v = 0; v < vocab; ++v) {
          double q = uniform + (v == target ? 1.0 - smoothing : 0.0);
          g[v] += f * (p[v] - q);
        }
      }
      break;
    }
  }
}

FdReport finite_difference_check(Graph& graph, NodeId loss, double step,
                                 double tolerance) {
  if (default_dtype() != DType::kF64) {
    throw ConfigError("finite_difference_check requires 64-bit mode");
  }
  FdReport report;
  report.step = step;
  report.tolerance = tolerance;

  graph.run_forward();
  graph.run_backward(loss);

  // Analytic gradients are copied out first; the FD loop below reuses the
  // graph for forward evaluations and would overwrite them.
  std::vector<Tensor> analytic;
  analytic.reserve(graph.param_ids().size());
  for (NodeId pid : graph.param_ids()) {
    analytic.push_back(graph.grad(pid));
  }

  for (size_t pi = 0; pi < graph.param_ids().size(); ++pi) {
    NodeId pid = graph.param_ids()[pi];
    Node& p = graph.node(pid);
    FdParamReport pr;
    pr.param = p.name;
    pr.elements = p.value.numel();
    for (int64_t i = 0; i < p.value.numel(); ++i) {
      double saved = p.value.values()[static_cast<size_t>(i)];
      p.value.values()[static_cast<size_t>(i)] = saved + step;
      graph.run_forward();
      double up = graph.value(loss).item();
      p.value.values()[static_cast<size_t>(i)] = saved - step;
      graph.run_forward();
      double down = graph.value(loss).item();
      p.value.values()[static_cast<size_t>(i)] = saved;
      double numeric = (up - down) / (2.0 * step);
      double exact = analytic[pi].values()[static_cast<size_t>(i)];
      double rel = std::abs(exact - numeric) /
                   std::max({std::abs(exact), std::abs(numeric), 1e-6});
      pr.max_rel_err = std::max(pr.max_rel_err, rel);
      if (rel > tolerance) ++pr.flagged;
    }
    report.max_rel_err = std::max(report.max_rel_err, pr.max_rel_err);
    report.elements += pr.elements;
    report.flagged += pr.flagged;
    report.params.push_back(std::move(pr));
  }

  // Leave the graph in a consistent state for the caller.
  graph.run_forward();
  return report;
}

}  // namespace lenctl
