#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dwa/error.hpp"

#if !defined(DWA_CHECK_FINITE) && !defined(NDEBUG)
#define DWA_CHECK_FINITE 1
#endif

namespace dwa {

// (batch, channels, rows, cols); data is stored row-major in that order.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  constexpr std::size_t size() const { return n * c * h * w; }
  constexpr std::size_t plane() const { return h * w; }
  constexpr std::size_t index(std::size_t b, std::size_t ch, std::size_t i, std::size_t j) const {
    return ((b * c + ch) * h + i) * w + j;
  }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
         std::to_string(s.w) + ")";
}

enum class PaddingMode { replicate, zero };

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct Node {
  using BackwardFn = std::function<void(const Node& self, std::span<const T> grad_out,
                                        std::span<std::vector<T>* const> grad_in)>;

  Shape shape;
  std::vector<T> data;
  std::vector<std::shared_ptr<const Node>> parents;
  // Accumulates into the parents' gradient buffers. A null buffer marks a parent
  // that needs no gradient.
  BackwardFn backward;
  bool requires_grad = false;
};

template <typename T>
void check_finite(std::span<const T> values, const char* where) {
  for (const T v : values) {
    if (!std::isfinite(v)) fail(ErrorCode::NonFiniteValue, std::string("non-finite value in ") + where);
  }
}

}  // namespace detail

template <typename T>
class Tensor {
 public:
  using Node = detail::Node<T>;
  using value_type = T;

  Tensor() : Tensor(Shape{0, 0, 0, 0}, std::vector<T>{}, false) {}

  // Detached constant tensor. Rejects length mismatch and non-finite input.
  static Tensor create(Shape shape, std::vector<T> values) {
    return Tensor(shape, std::move(values), false);
  }

  // Leaf that receives a gradient in backward().
  static Tensor parameter(Shape shape, std::vector<T> values) {
    return Tensor(shape, std::move(values), true);
  }

  static Tensor filled(Shape shape, T value) { return create(shape, std::vector<T>(shape.size(), value)); }
  static Tensor zeros(Shape shape) { return filled(shape, T(0)); }
  static Tensor scalar(T value) { return create(Shape{1, 1, 1, 1}, {value}); }

  // Result of a recorded operation. Gradient bookkeeping is dropped when no
  // parent needs a gradient.
  static Tensor from_op(Shape shape, std::vector<T> values, std::vector<Tensor> parents,
                        typename Node::BackwardFn backward, const char* op_name) {
#ifdef DWA_CHECK_FINITE
    detail::check_finite<T>(values, op_name);
#else
    (void)op_name;
#endif
    auto node = std::make_shared<Node>();
    node->shape = shape;
    node->data = std::move(values);
    const bool any = std::any_of(parents.begin(), parents.end(),
                                 [](const Tensor& p) { return p.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(parents.size());
      for (auto& p : parents) node->parents.push_back(p.node_);
      node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
  }

  const Shape& shape() const { return node_->shape; }
  std::span<const T> data() const { return node_->data; }
  std::size_t size() const { return node_->data.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  T operator()(std::size_t b, std::size_t ch, std::size_t i, std::size_t j) const {
    return node_->data[shape().index(b, ch, i, j)];
  }
  T operator[](std::size_t flat) const { return node_->data[flat]; }

  T item() const {
    if (size() != 1) fail(ErrorCode::ShapeMismatch, "item() on tensor of shape " + to_string(shape()));
    return node_->data[0];
  }

  Tensor detached() const { return Tensor(std::make_shared<Node>(Node{shape(), node_->data, {}, {}, false})); }
  Tensor as_parameter() const { return Tensor(std::make_shared<Node>(Node{shape(), node_->data, {}, {}, true})); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(node_->data.begin(), node_->data.end());
    return Tensor<U>::create(shape(), std::move(out));
  }

  // Batch element b as a (1,c,h,w) constant.
  Tensor slice_batch(std::size_t b) const {
    const auto& s = shape();
    const std::size_t per = s.c * s.h * s.w;
    std::vector<T> out(node_->data.begin() + static_cast<std::ptrdiff_t>(b * per),
                       node_->data.begin() + static_cast<std::ptrdiff_t>((b + 1) * per));
    return create(Shape{1, s.c, s.h, s.w}, std::move(out));
  }

  const Node* id() const { return node_.get(); }
  const std::shared_ptr<const Node>& node() const { return node_; }

 private:
  Tensor(Shape shape, std::vector<T> values, bool requires_grad) {
    if (values.size() != shape.size()) {
      fail(ErrorCode::ShapeMismatch, "value count " + std::to_string(values.size()) +
                                         " does not match shape " + to_string(shape));
    }
    detail::check_finite<T>(values, "tensor construction");
    auto node = std::make_shared<Node>();
    node->shape = shape;
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    node_ = std::move(node);
  }

  explicit Tensor(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  std::shared_ptr<const Node> node_;
};

// Gradients of one backward pass, keyed by leaf identity.
template <typename T>
class Gradients {
 public:
  using Node = detail::Node<T>;

  // Zero-filled when the tensor was unreachable from the loss.
  std::vector<T> of(const Tensor<T>& t) const {
    auto it = grads_.find(t.id());
    if (it == grads_.end()) return std::vector<T>(t.size(), T(0));
    return it->second;
  }

  bool contains(const Tensor<T>& t) const { return grads_.count(t.id()) != 0; }

 private:
  template <typename U>
  friend Gradients<U> backward(const Tensor<U>& loss);

  std::unordered_map<const Node*, std::vector<T>> grads_;
};

template <typename T>
Gradients<T> backward(const Tensor<T>& loss) {
  using Node = detail::Node<T>;
  if (loss.size() != 1) fail(ErrorCode::NonScalarLoss, "loss has shape " + to_string(loss.shape()));

  Gradients<T> result;
  if (!loss.requires_grad()) return result;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<const Node*> order;
  std::unordered_set<const Node*> visited;
  std::vector<std::pair<const Node*, std::size_t>> stack{{loss.id(), 0}};
  visited.insert(loss.id());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      const Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  auto& grads = result.grads_;
  grads[loss.id()] = std::vector<T>(1, T(1));
  std::vector<std::vector<T>*> buffers;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Node* node = *it;
    if (!node->backward) continue;  // leaf: keep its gradient
    auto found = grads.find(node);
    if (found == grads.end()) continue;
    buffers.clear();
    for (const auto& parent : node->parents) {
      if (!parent->requires_grad) {
        buffers.push_back(nullptr);
        continue;
      }
      auto& buf = grads[parent.get()];
      if (buf.empty()) buf.assign(parent->data.size(), T(0));
      buffers.push_back(&buf);
    }
    // Inserting parent buffers may rehash and invalidate `found`.
    std::vector<T> grad_out = std::move(grads[node]);
    grads.erase(node);
    node->backward(*node, grad_out, buffers);
  }
  return result;
}

}  // namespace dwa
