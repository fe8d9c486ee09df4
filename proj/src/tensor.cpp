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

#include "ikmr/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_map>

namespace ikmr {

namespace detail {

std::uint64_t next_seq() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace detail

namespace {

thread_local int no_grad_depth = 0;

}  // namespace

NoGradScope::NoGradScope() { ++no_grad_depth; }
NoGradScope::~NoGradScope() { --no_grad_depth; }

bool grad_enabled() { return no_grad_depth == 0; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return from_array(std::move(shape), ArrayXd(), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const Eigen::Index n = shape_numel(shape);
  return from_array(std::move(shape), ArrayXd::Constant(n, value),
                    requires_grad);
}

Tensor Tensor::scalar(double value) {
  return from_array(Shape{}, ArrayXd::Constant(1, value), false);
}

Tensor Tensor::from_array(Shape shape, ArrayXd values, bool requires_grad) {
  const Eigen::Index n = shape_numel(shape);
  if (values.size() == 0) {
    values = ArrayXd::Zero(n);
  } else if (values.size() != n) {
    throw ShapeMismatchError("tensor values do not match shape");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  node->seq = detail::next_seq();
  return wrap(std::move(node));
}

Tensor Tensor::make_op(
    Shape shape, ArrayXd values, std::vector<Tensor> parents,
    std::function<void(const ArrayXd&, const std::vector<ArrayXd*>&)>
        backprop) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->seq = detail::next_seq();

  bool needs = false;
  if (grad_enabled()) {
    for (const auto& p : parents) {
      if (p.requires_grad()) {
        needs = true;
        break;
      }
    }
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_ptr());
    node->backprop = std::move(backprop);
  }
  return wrap(std::move(node));
}

double Tensor::item() const {
  if (!defined() || numel() != 1) {
    throw NotScalarError("tensor is not a scalar");
  }
  return n_->values(0);
}

const ArrayXd& Tensor::grad() const {
  if (n_->grad.size() == 0) {
    n_->grad = ArrayXd::Zero(n_->numel());
  }
  return n_->grad;
}

ArrayXd& Tensor::mutable_grad() {
  if (n_->grad.size() == 0) {
    n_->grad = ArrayXd::Zero(n_->numel());
  }
  return n_->grad;
}

void Tensor::add_grad(const ArrayXd& delta) {
  if (n_->grad.size() == 0) {
    n_->grad = delta;
  } else {
    n_->grad += delta;
  }
}

void Tensor::zero_grad() {
  if (n_->grad.size() != 0) {
    n_->grad.setZero();
  }
}

void GradAccumulator::accumulate(detail::Node* leaf, const ArrayXd& adjoint) {
  auto it = grads_.find(leaf);
  if (it == grads_.end()) {
    grads_.emplace(leaf, adjoint);
  } else {
    it->second += adjoint;
  }
}

const ArrayXd* GradAccumulator::find(detail::Node* leaf) const {
  auto it = grads_.find(leaf);
  return it == grads_.end() ? nullptr : &it->second;
}

namespace {

class DefaultSink : public GradSink {
 public:
  void accumulate(detail::Node* leaf, const ArrayXd& adjoint) override {
    if (leaf->grad.size() == 0) {
      leaf->grad = adjoint;
    } else {
      leaf->grad += adjoint;
    }
  }
};

}  // namespace

void backward(const Tensor& loss, GradSink& sink) {
  if (!loss.defined() || !loss.shape().empty()) {
    throw NotScalarError("backward requires a loss of shape []");
  }
  detail::Node* root = loss.node();
  if (!root->requires_grad) return;  // nothing on the tape needs gradients

  // Collect the grad-requiring subgraph reachable from the loss.
  std::vector<detail::Node*> stack{root};
  std::unordered_map<detail::Node*, ArrayXd> adjoints;
  std::vector<detail::Node*> order;
  std::unordered_map<detail::Node*, bool> seen;
  seen[root] = true;
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && !seen[p.get()]) {
        seen[p.get()] = true;
        stack.push_back(p.get());
      }
    }
  }
  // Reverse creation order is a reverse topological order.
  std::sort(order.begin(), order.end(),
            [](const detail::Node* a, const detail::Node* b) {
              return a->seq > b->seq;
            });

  adjoints[root] = ArrayXd::Ones(1);
  std::vector<ArrayXd*> padj;
  for (detail::Node* n : order) {
    auto it = adjoints.find(n);
    if (it == adjoints.end()) continue;
    const ArrayXd adj = std::move(it->second);
    adjoints.erase(it);
    if (n->backprop) {
      padj.clear();
      padj.reserve(n->parents.size());
      for (const auto& p : n->parents) {
        if (p->requires_grad) {
          auto [slot, inserted] =
              adjoints.try_emplace(p.get(), ArrayXd::Zero(p->numel()));
          padj.push_back(&slot->second);
        } else {
          padj.push_back(nullptr);
        }
      }
      n->backprop(adj, padj);
    } else if (n->requires_grad) {
      sink.accumulate(n, adj);
    }
  }
}

void backward(const Tensor& loss) {
  DefaultSink sink;
  backward(loss, sink);
}

}  // namespace ikmr
