#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "vidfill/tensor.hpp"

namespace vidfill::ag {

// Minimal reverse-mode tape. Every op builds a Node eagerly; backward() walks
// the DAG once in reverse topological order. Parameters are long-lived nodes
// owned by the model; everything else is rebuilt per iteration.
template <class T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated on demand, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backward_fn;

  void ensure_grad() {
    if (grad.empty()) grad = Tensor<T>::zeros(value.shape());
  }
  void zero_grad() {
    if (!grad.empty()) grad.fill(T(0));
  }
};

template <class T>
using NodeRef = std::shared_ptr<Node<T>>;

template <class T>
NodeRef<T> constant(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  return n;
}

template <class T>
NodeRef<T> parameter(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = true;
  return n;
}

template <class T>
NodeRef<T> make_op(Tensor<T> value, std::vector<NodeRef<T>> parents,
                   std::function<void(Node<T>&)> backward_fn) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backward_fn = std::move(backward_fn);
  return n;
}

// Reverse accumulation from a scalar root.
template <class T>
void backward(const NodeRef<T>& root) {
  require(root->value.numel() == 1, "backward root must be scalar");
  if (!root->requires_grad) return;

  // iterative post-order DFS
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn) {
      n->ensure_grad();
      n->backward_fn(*n);
    }
  }
}

// ---- elementwise ops -------------------------------------------------------

template <class T>
NodeRef<T> add(const NodeRef<T>& a, const NodeRef<T>& b) {
  require(a->value.same_shape(b->value), "shape mismatch");
  Tensor<T> out(a->value.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    for (int k = 0; k < 2; ++k) {
      auto& p = n.parents[k];
      if (!p->requires_grad) continue;
      p->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.numel(); ++i) p->grad[i] += n.grad[i];
    }
  });
}

template <class T>
NodeRef<T> sub(const NodeRef<T>& a, const NodeRef<T>& b) {
  require(a->value.same_shape(b->value), "shape mismatch");
  Tensor<T> out(a->value.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] - b->value[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    auto& a = n.parents[0];
    auto& b = n.parents[1];
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.numel(); ++i) a->grad[i] += n.grad[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.numel(); ++i) b->grad[i] -= n.grad[i];
    }
  });
}

template <class T>
NodeRef<T> mul(const NodeRef<T>& a, const NodeRef<T>& b) {
  require(a->value.same_shape(b->value), "shape mismatch");
  Tensor<T> out(a->value.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    auto& a = n.parents[0];
    auto& b = n.parents[1];
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.numel(); ++i) a->grad[i] += n.grad[i] * b->value[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.numel(); ++i) b->grad[i] += n.grad[i] * a->value[i];
    }
  });
}

template <class T>
NodeRef<T> scale(const NodeRef<T>& a, T s) {
  Tensor<T> out(a->value.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * s;
  return make_op<T>(std::move(out), {a}, [s](Node<T>& n) {
    auto& a = n.parents[0];
    a->ensure_grad();
    for (std::int64_t i = 0; i < n.grad.numel(); ++i) a->grad[i] += n.grad[i] * s;
  });
}

namespace detail {

// Finds the single axis along which `small` (dim 1) broadcasts against `big`,
// or -1 if the shapes are identical.
inline int broadcast_axis(const std::vector<int>& big, const std::vector<int>& small) {
  if (big == small) return -1;
  if (big.size() != small.size()) fail("shape mismatch");
  int axis = -2;
  for (std::size_t i = 0; i < big.size(); ++i) {
    if (big[i] == small[i]) continue;
    if (small[i] == 1 && axis == -2)
      axis = int(i);
    else
      fail("shape mismatch");
  }
  if (axis == -2) fail("shape mismatch");
  return axis;
}

}  // namespace detail

// Elementwise product with a constant gate. The gate either matches the input
// shape or has size 1 along exactly one axis (e.g. a {N,1,H,W} mask applied
// to a {N,C,H,W} image batch).
namespace detail {

// Applies fn(flat_index_big, flat_index_small) over a single-axis broadcast.
template <class Fn>
void for_broadcast(const std::vector<int>& big, int axis, Fn&& fn) {
  std::int64_t total = 1;
  for (int d : big) total *= d;
  if (axis < 0) {
    for (std::int64_t i = 0; i < total; ++i) fn(i, i);
    return;
  }
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= big[std::size_t(i)];
  for (std::size_t i = std::size_t(axis) + 1; i < big.size(); ++i) inner *= big[i];
  const std::int64_t reps = big[std::size_t(axis)];
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t r = 0; r < reps; ++r) {
      const std::int64_t base_big = (o * reps + r) * inner;
      const std::int64_t base_small = o * inner;
      for (std::int64_t i = 0; i < inner; ++i) fn(base_big + i, base_small + i);
    }
}

}  // namespace detail

template <class T>
NodeRef<T> gate(const NodeRef<T>& x, const Tensor<T>& g) {
  const int axis = detail::broadcast_axis(x->value.shape(), g.shape());
  const std::vector<int> xshape = x->value.shape();
  Tensor<T> out(xshape);
  detail::for_broadcast(xshape, axis, [&](std::int64_t xi, std::int64_t gi) {
    out[xi] = x->value[xi] * g[gi];
  });
  Tensor<T> gate_copy = g;
  return make_op<T>(std::move(out), {x}, [gate_copy, axis, xshape](Node<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    detail::for_broadcast(xshape, axis, [&](std::int64_t xi, std::int64_t gi) {
      x->grad[xi] += n.grad[xi] * gate_copy[gi];
    });
  });
}

// mean of squared entries -> scalar
template <class T>
NodeRef<T> sq_mean(const NodeRef<T>& x) {
  const std::int64_t n = x->value.numel();
  double acc = 0;
  for (std::int64_t i = 0; i < n; ++i) acc += double(x->value[i]) * double(x->value[i]);
  Tensor<T> out({1});
  out[0] = T(acc / double(n));
  return make_op<T>(std::move(out), {x}, [n](Node<T>& nd) {
    auto& x = nd.parents[0];
    x->ensure_grad();
    const T g = nd.grad[0] * T(2) / T(n);
    for (std::int64_t i = 0; i < n; ++i) x->grad[i] += g * x->value[i];
  });
}

// weighted sum of scalar nodes -> scalar
template <class T>
NodeRef<T> weighted_sum(const std::vector<NodeRef<T>>& xs, const std::vector<T>& ws) {
  require(!xs.empty() && xs.size() == ws.size(), "weighted_sum: size mismatch");
  Tensor<T> out({1});
  for (std::size_t i = 0; i < xs.size(); ++i) {
    require(xs[i]->value.numel() == 1, "weighted_sum expects scalars");
    out[0] += ws[i] * xs[i]->value[0];
  }
  std::vector<T> wcopy = ws;
  return make_op<T>(std::move(out), xs, [wcopy](Node<T>& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      auto& p = n.parents[i];
      if (!p->requires_grad) continue;
      p->ensure_grad();
      p->grad[0] += n.grad[0] * wcopy[i];
    }
  });
}

template <class T>
NodeRef<T> mean_scalars(const std::vector<NodeRef<T>>& xs) {
  return weighted_sum(xs, std::vector<T>(xs.size(), T(1) / T(xs.size())));
}

template <class T>
NodeRef<T> leaky_relu(const NodeRef<T>& x, T slope) {
  Tensor<T> out(x->value.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    const T v = x->value[i];
    out[i] = v > T(0) ? v : v * slope;
  }
  return make_op<T>(std::move(out), {x}, [slope](Node<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    for (std::int64_t i = 0; i < n.grad.numel(); ++i)
      x->grad[i] += n.grad[i] * (x->value[i] > T(0) ? T(1) : slope);
  });
}

template <class T>
NodeRef<T> sigmoid(const NodeRef<T>& x) {
  Tensor<T> out(x->value.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = T(1) / (T(1) + std::exp(-x->value[i]));
  return make_op<T>(std::move(out), {x}, [](Node<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    for (std::int64_t i = 0; i < n.grad.numel(); ++i) {
      const T y = n.value[i];
      x->grad[i] += n.grad[i] * y * (T(1) - y);
    }
  });
}

// Contiguous slice along one axis (copying view; backward scatters).
template <class T>
NodeRef<T> slice(const NodeRef<T>& x, int axis, int start, int len) {
  const auto& s = x->value.shape();
  require(axis >= 0 && axis < int(s.size()), "slice: bad axis");
  require(start >= 0 && len > 0 && start + len <= s[std::size_t(axis)], "slice: out of range");
  std::vector<int> os = s;
  os[std::size_t(axis)] = len;
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[std::size_t(i)];
  for (std::size_t i = std::size_t(axis) + 1; i < s.size(); ++i) inner *= s[i];
  const std::int64_t full = s[std::size_t(axis)];

  Tensor<T> out(os);
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t r = 0; r < len; ++r)
      std::copy_n(x->value.data() + ((o * full + start + r) * inner), inner,
                  out.data() + ((o * len + r) * inner));
  return make_op<T>(std::move(out), {x}, [=](Node<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    for (std::int64_t o = 0; o < outer; ++o)
      for (std::int64_t r = 0; r < len; ++r) {
        const T* src = n.grad.data() + ((o * len + r) * inner);
        T* dst = x->grad.data() + ((o * full + start + r) * inner);
        for (std::int64_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
  });
}

// Concatenation of two tensors along one axis.
template <class T>
NodeRef<T> concat(const NodeRef<T>& a, const NodeRef<T>& b, int axis) {
  const auto& sa = a->value.shape();
  const auto& sb = b->value.shape();
  require(sa.size() == sb.size(), "concat: rank mismatch");
  for (std::size_t i = 0; i < sa.size(); ++i)
    require(int(i) == axis || sa[i] == sb[i], "concat: shape mismatch");
  std::vector<int> os = sa;
  os[std::size_t(axis)] += sb[std::size_t(axis)];

  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= sa[std::size_t(i)];
  for (std::size_t i = std::size_t(axis) + 1; i < sa.size(); ++i) inner *= sa[i];
  const std::int64_t la = sa[std::size_t(axis)], lb = sb[std::size_t(axis)];

  Tensor<T> out(os);
  for (std::int64_t o = 0; o < outer; ++o) {
    std::copy_n(a->value.data() + o * la * inner, la * inner,
                out.data() + o * (la + lb) * inner);
    std::copy_n(b->value.data() + o * lb * inner, lb * inner,
                out.data() + (o * (la + lb) + la) * inner);
  }
  return make_op<T>(std::move(out), {a, b}, [=](Node<T>& n) {
    auto& a = n.parents[0];
    auto& b = n.parents[1];
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::int64_t o = 0; o < outer; ++o) {
        const T* src = n.grad.data() + o * (la + lb) * inner;
        T* dst = a->grad.data() + o * la * inner;
        for (std::int64_t i = 0; i < la * inner; ++i) dst[i] += src[i];
      }
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::int64_t o = 0; o < outer; ++o) {
        const T* src = n.grad.data() + (o * (la + lb) + la) * inner;
        T* dst = b->grad.data() + o * lb * inner;
        for (std::int64_t i = 0; i < lb * inner; ++i) dst[i] += src[i];
      }
    }
  });
}

}  // namespace vidfill::ag
