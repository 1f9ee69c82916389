//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef RINGKIT_TENSOR_H_
#define RINGKIT_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ringkit::tensor {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape &shape);

inline std::size_t shape_size(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t { 1 },
                         std::multiplies<> {});
}

/// Dense row-major array. Rank-2 views treat the last axis as columns and
/// every leading axis as rows.
template <class T>
class Tensor {
public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) { }
  Tensor(Shape shape, std::vector<T> data);

  static Tensor scalar(T v) { return Tensor(Shape {}, std::vector<T> { v }); }
  static Tensor matrix(std::size_t rows, std::size_t cols, T fill = T(0)) {
    return Tensor(Shape { rows, cols }, fill);
  }

  const Shape &shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t cols() const { return shape_.empty() ? 1 : shape_.back(); }
  std::size_t rows() const {
    const std::size_t c = cols();
    return c == 0 ? 0 : data_.size() / c;
  }

  T *data() { return data_.data(); }
  const T *data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T> &storage() { return data_; }
  const std::vector<T> &storage() const { return data_; }

  T &operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }
  T &at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  T at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  bool same_shape(const Tensor &o) const { return shape_ == o.shape_; }

  template <class U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const Tensor &) const = default;

private:
  Shape shape_;
  std::vector<T> data_;
};

enum class Op : std::uint8_t {
  kLeaf,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,
  kScaleBy,
  kConcat,
  kConcatRows,
  kSlice,
  kRelu,
  kExp,
  kLog,
  kAbs,
  kSoftmaxRows,
  kSegmentSoftmax,
  kSegmentSum,
  kGatherRows,
  kSum,
  kMean,
  kSignedEps,
};

std::string_view op_name(Op op);
std::optional<Op> parse_op_name(std::string_view name);

template <class T>
class Tape;

/// Handle to a value recorded on a Tape.
template <class T>
class Var {
public:
  Var() = default;
  Var(Tape<T> *tape, int id): tape_(tape), id_(id) { }

  bool valid() const { return tape_ != nullptr; }
  Tape<T> &tape() const { return *tape_; }
  int id() const { return id_; }
  const Tensor<T> &value() const;
  const Shape &shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

private:
  Tape<T> *tape_ = nullptr;
  int id_ = -1;
};

/// Result of Tape::backward, indexed by node id.
template <class T>
class Gradients {
public:
  Gradients() = default;
  explicit Gradients(std::vector<std::optional<Tensor<T>>> grads)
      : grads_(std::move(grads)) { }

  bool has(const Var<T> &v) const {
    return v.id() >= 0 && v.id() < static_cast<int>(grads_.size())
           && grads_[v.id()].has_value();
  }
  /// Throws DetachedTensor when v received no gradient.
  const Tensor<T> &operator[](const Var<T> &v) const;

private:
  std::vector<std::optional<Tensor<T>>> grads_;
};

/// Records operations in execution order; backward replays them in exact
/// reverse order. Single owner; not thread-safe.
template <class T>
class Tape {
public:
  using Backward = std::function<void(Tape &, int)>;

  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }
  Var<T> parameter(Tensor<T> value) { return leaf(std::move(value), true); }
  Var<T> leaf(Tensor<T> value, bool requires_grad);

  /// Appends an op node. The node requires grad when any input does.
  Var<T> record(Op op, Tensor<T> value, std::vector<int> inputs,
                Backward backward);

  std::size_t size() const { return nodes_.size(); }
  const Tensor<T> &value(int id) const { return nodes_[id].value; }
  Op op(int id) const { return nodes_[id].op; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  const std::vector<int> &inputs(int id) const { return nodes_[id].inputs; }

  /// During backward: the upstream gradient of node id.
  const Tensor<T> &upstream(int id) const { return *grads_[id]; }
  /// During backward: gradient buffer of node id (zero-initialized on first
  /// use), or nullptr when the node does not require grad.
  Tensor<T> *grad_buffer(int id);

  /// Throws NotScalar when loss has more than one element and
  /// DetachedTensor when it is not on this tape or depends on no parameter.
  Gradients<T> backward(const Var<T> &loss);

  /// Kink tracking folds the sign pattern of every relu/abs input into a
  /// running hash so finite-difference checks can detect crossings.
  void set_track_kinks(bool on) { track_kinks_ = on; }
  bool track_kinks() const { return track_kinks_; }
  void mix_kink_bits(std::span<const T> x, bool strict);
  std::uint64_t kink_signature() const { return kink_hash_; }

private:
  struct Node {
    Op op;
    Tensor<T> value;
    std::vector<int> inputs;
    Backward backward;
    bool requires_grad;
  };

  // deque: values handed out by reference stay valid while recording.
  std::deque<Node> nodes_;
  std::vector<std::optional<Tensor<T>>> grads_;
  bool track_kinks_ = false;
  std::uint64_t kink_hash_ = 1469598103934665603ULL;
};

template <class T>
const Tensor<T> &Var<T>::value() const {
  return tape_->value(id_);
}

namespace testing {
  /// Negates the adjoint of every node of the given kind during backward.
  /// Fault injection for verifying the gradient checker; nullopt disables.
  void set_flipped_adjoint(std::optional<Op> op);
  std::optional<Op> flipped_adjoint();
}  // namespace testing

}  // namespace ringkit::tensor

#endif  // RINGKIT_TENSOR_H_
