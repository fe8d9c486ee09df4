// Copyright 2026 The IKMR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "ikmr/error.hpp"

namespace ikmr {

using ArrayXd = Eigen::ArrayXd;
using Shape = std::vector<Eigen::Index>;

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One record of the implicit tape. Creation order (seq) is a topological
/// order of the graph: parents always precede children.
struct Node {
  Shape shape;
  ArrayXd values;
  ArrayXd grad;  // persistent accumulator, empty until first use
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::vector<NodePtr> parents;
  // Adds this node's adjoint contributions into the parent adjoints;
  // padj[i] is null when parent i does not need gradients.
  std::function<void(const ArrayXd& adj, const std::vector<ArrayXd*>& padj)>
      backprop;

  Eigen::Index numel() const { return values.size(); }
};

std::uint64_t next_seq();

}  // namespace detail

inline Eigen::Index shape_numel(const Shape& s) {
  Eigen::Index n = 1;
  for (const auto d : s) n *= d;
  return n;
}

/// Value-semantic handle to a node of the reverse-mode graph. All values are
/// 64-bit, stored flat in row-major order.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor from_array(Shape shape, ArrayXd values,
                           bool requires_grad = false);

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  Eigen::Index numel() const { return n_->numel(); }
  Eigen::Index dim(std::size_t i) const { return n_->shape[i]; }
  std::size_t rank() const { return n_->shape.size(); }

  const ArrayXd& values() const { return n_->values; }
  /// Direct value access for optimizer updates; only meaningful on leaves.
  ArrayXd& mutable_values() { return n_->values; }

  /// Scalar extraction; throws NotScalarError unless numel == 1.
  double item() const;

  bool requires_grad() const { return n_->requires_grad; }

  /// Accumulated gradient (zeros if backward never reached this tensor).
  const ArrayXd& grad() const;
  ArrayXd& mutable_grad();
  void add_grad(const ArrayXd& delta);
  void zero_grad();

  detail::Node* node() const { return n_.get(); }

  // Graph construction (used by ops).
  static Tensor make_op(Shape shape, ArrayXd values,
                        std::vector<Tensor> parents,
                        std::function<void(const ArrayXd&,
                                           const std::vector<ArrayXd*>&)>
                            backprop);
  static Tensor wrap(detail::NodePtr n) {
    Tensor t;
    t.n_ = std::move(n);
    return t;
  }
  detail::NodePtr node_ptr() const { return n_; }

 private:
  detail::NodePtr n_;
};

/// Receives leaf adjoints during backward. The default sink adds into each
/// leaf's persistent grad; training workers substitute private accumulators
/// so concurrent backward passes never write shared state.
class GradSink {
 public:
  virtual ~GradSink() = default;
  virtual void accumulate(detail::Node* leaf, const ArrayXd& adjoint) = 0;
};

/// Reverse sweep from a scalar loss. Visits each reachable node exactly once
/// in reverse creation order; repeated calls without zero_grad accumulate.
void backward(const Tensor& loss);
void backward(const Tensor& loss, GradSink& sink);

/// Map-backed sink for per-worker gradient accumulation.
class GradAccumulator : public GradSink {
 public:
  void accumulate(detail::Node* leaf, const ArrayXd& adjoint) override;
  const ArrayXd* find(detail::Node* leaf) const;
  void clear() { grads_.clear(); }

 private:
  std::unordered_map<detail::Node*, ArrayXd> grads_;
};

/// While alive on a thread, ops produce plain values without tape records.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;
};

bool grad_enabled();

}  // namespace ikmr
