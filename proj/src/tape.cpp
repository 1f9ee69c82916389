//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <array>
#include <atomic>
#include <utility>

#include "ringkit/error.h"
#include "ringkit/tensor.h"

namespace ringkit::tensor {

std::string shape_string(const Shape &shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0)
      out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

namespace {
  constexpr std::array<std::pair<Op, std::string_view>, 22> kOpNames { {
      { Op::kLeaf, "leaf" },
      { Op::kMatmul, "matmul" },
      { Op::kAdd, "add" },
      { Op::kSub, "sub" },
      { Op::kMul, "mul" },
      { Op::kDiv, "div" },
      { Op::kScale, "scale" },
      { Op::kScaleBy, "scale_by" },
      { Op::kConcat, "concat" },
      { Op::kConcatRows, "concat_rows" },
      { Op::kSlice, "slice" },
      { Op::kRelu, "relu" },
      { Op::kExp, "exp" },
      { Op::kLog, "log" },
      { Op::kAbs, "abs" },
      { Op::kSoftmaxRows, "softmax_rows" },
      { Op::kSegmentSoftmax, "segment_softmax" },
      { Op::kSegmentSum, "segment_sum" },
      { Op::kGatherRows, "gather_rows" },
      { Op::kSum, "sum" },
      { Op::kMean, "mean" },
      { Op::kSignedEps, "signed_eps" },
  } };

  // -1: no fault injected.
  std::atomic<int> g_flipped_op { -1 };
}  // namespace

std::string_view op_name(Op op) {
  for (const auto &[o, name]: kOpNames) {
    if (o == op)
      return name;
  }
  return "unknown";
}

std::optional<Op> parse_op_name(std::string_view name) {
  for (const auto &[o, n]: kOpNames) {
    if (n == name)
      return o;
  }
  return std::nullopt;
}

namespace testing {
  void set_flipped_adjoint(std::optional<Op> op) {
    g_flipped_op.store(op ? static_cast<int>(*op) : -1);
  }

  std::optional<Op> flipped_adjoint() {
    const int v = g_flipped_op.load();
    if (v < 0)
      return std::nullopt;
    return static_cast<Op>(v);
  }
}  // namespace testing

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_))
    throw Error(ErrorCode::kShapeMismatch,
                "data length " + std::to_string(data_.size())
                    + " does not match shape " + shape_string(shape_));
}

template <class T>
const Tensor<T> &Gradients<T>::operator[](const Var<T> &v) const {
  if (!has(v))
    throw Error(ErrorCode::kDetachedTensor,
                "no gradient for node " + std::to_string(v.id()));
  return *grads_[v.id()];
}

template <class T>
Var<T> Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  nodes_.push_back({ Op::kLeaf, std::move(value), {}, {}, requires_grad });
  return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
}

template <class T>
Var<T> Tape<T>::record(Op op, Tensor<T> value, std::vector<int> inputs,
                       Backward backward) {
  bool rg = false;
  for (int i: inputs)
    rg = rg || nodes_[i].requires_grad;
  nodes_.push_back({ op, std::move(value), std::move(inputs),
                     rg ? std::move(backward) : Backward {}, rg });
  return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
}

template <class T>
Tensor<T> *Tape<T>::grad_buffer(int id) {
  if (!nodes_[id].requires_grad)
    return nullptr;
  auto &slot = grads_[id];
  if (!slot)
    slot.emplace(nodes_[id].value.shape());
  return &*slot;
}

template <class T>
Gradients<T> Tape<T>::backward(const Var<T> &loss) {
  if (&loss.tape() != this)
    throw Error(ErrorCode::kDetachedTensor, "loss is not on this tape");
  const int root = loss.id();
  if (nodes_[root].value.size() != 1)
    throw Error(ErrorCode::kNotScalar,
                "loss has shape " + shape_string(nodes_[root].value.shape()));
  if (!nodes_[root].requires_grad)
    throw Error(ErrorCode::kDetachedTensor,
                "loss does not depend on any parameter");

  grads_.assign(nodes_.size(), std::nullopt);
  grads_[root].emplace(nodes_[root].value.shape(), T(1));
  const std::optional<Op> flipped = testing::flipped_adjoint();

  for (int i = root; i >= 0; --i) {
    Node &node = nodes_[i];
    if (!grads_[i] || !node.backward)
      continue;
    if (flipped && node.op == *flipped) {
      for (T &g: grads_[i]->values())
        g = -g;
    }
    node.backward(*this, i);
    // Interior adjoints are dead once propagated.
    grads_[i].reset();
  }

  std::vector<std::optional<Tensor<T>>> out = std::move(grads_);
  grads_.clear();
  return Gradients<T>(std::move(out));
}

template <class T>
void Tape<T>::mix_kink_bits(std::span<const T> x, bool strict) {
  std::uint64_t h = kink_hash_;
  std::uint64_t word = 0;
  int bits = 0;
  for (const T v: x) {
    word = (word << 1) | ((strict ? v > T(0) : v >= T(0)) ? 1U : 0U);
    if (++bits == 64) {
      h = (h ^ word) * 1099511628211ULL;
      word = 0;
      bits = 0;
    }
  }
  h = (h ^ word ^ static_cast<std::uint64_t>(bits)) * 1099511628211ULL;
  kink_hash_ = h;
}

template class Tensor<float>;
template class Tensor<double>;
template class Gradients<float>;
template class Gradients<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace ringkit::tensor
