//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ringkit/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "ringkit/error.h"

namespace ringkit::tensor {
namespace {
  template <class T>
  using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic,
                               Eigen::RowMajor>;

  template <class T>
  Eigen::Map<const RowMat<T>> view(const Tensor<T> &t) {
    return { t.data(), static_cast<Eigen::Index>(t.rows()),
             static_cast<Eigen::Index>(t.cols()) };
  }

  template <class T>
  Eigen::Map<RowMat<T>> view(Tensor<T> &t) {
    return { t.data(), static_cast<Eigen::Index>(t.rows()),
             static_cast<Eigen::Index>(t.cols()) };
  }

  [[noreturn]] void shape_error(const std::string &what) {
    throw Error(ErrorCode::kShapeMismatch, what);
  }

  template <class T>
  Tape<T> &common_tape(const Var<T> &a, const Var<T> &b) {
    if (!a.valid() || !b.valid() || &a.tape() != &b.tape())
      shape_error("operands live on different tapes");
    return a.tape();
  }

  template <class T>
  void require_same_shape(const Var<T> &a, const Var<T> &b, const char *op) {
    if (a.shape() != b.shape())
      shape_error(std::string(op) + ": " + shape_string(a.shape()) + " vs "
                  + shape_string(b.shape()));
  }

  template <class T>
  void check_index(std::span<const int> idx, std::size_t bound,
                   const char *op) {
    for (int i: idx) {
      if (i < 0 || static_cast<std::size_t>(i) >= bound)
        throw Error(ErrorCode::kOutOfRange,
                    std::string(op) + ": index " + std::to_string(i)
                        + " outside [0, " + std::to_string(bound) + ")");
    }
  }
}  // namespace

template <class T>
Var<T> matmul(const Var<T> &a, const Var<T> &b) {
  Tape<T> &tape = common_tape(a, b);
  const Tensor<T> &x = a.value(), &w = b.value();
  if (x.cols() != w.rows() || w.rank() > 2)
    shape_error("matmul: " + shape_string(x.shape()) + " @ "
                + shape_string(w.shape()));
  Tensor<T> y = Tensor<T>::matrix(x.rows(), w.cols());
  if (y.size() > 0 && x.cols() > 0)
    view(y).noalias() = view(x) * view(w);

  return tape.record(
      Op::kMatmul, std::move(y), { a.id(), b.id() }, [](Tape<T> &t, int id) {
        const int ia = t.inputs(id)[0], ib = t.inputs(id)[1];
        const Tensor<T> &g = t.upstream(id);
        if (g.size() == 0)
          return;
        if (Tensor<T> *ga = t.grad_buffer(ia); ga && ga->size() > 0)
          view(*ga).noalias() += view(g) * view(t.value(ib)).transpose();
        if (Tensor<T> *gb = t.grad_buffer(ib); gb && gb->size() > 0)
          view(*gb).noalias() += view(t.value(ia)).transpose() * view(g);
      });
}

template <class T>
Var<T> add(const Var<T> &a, const Var<T> &b) {
  Tape<T> &tape = common_tape(a, b);
  const Tensor<T> &x = a.value(), &z = b.value();
  const bool same = x.shape() == z.shape();
  const bool broadcast = !same && z.rows() == 1 && z.cols() == x.cols();
  if (!same && !broadcast)
    shape_error("add: " + shape_string(x.shape()) + " + "
                + shape_string(z.shape()));

  Tensor<T> y = x;
  if (same) {
    for (std::size_t i = 0; i < y.size(); ++i)
      y[i] += z[i];
  } else {
    const std::size_t cols = x.cols();
    for (std::size_t r = 0; r < x.rows(); ++r) {
      T *row = y.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c)
        row[c] += z[c];
    }
  }

  return tape.record(
      Op::kAdd, std::move(y), { a.id(), b.id() },
      [broadcast](Tape<T> &t, int id) {
        const Tensor<T> &g = t.upstream(id);
        if (Tensor<T> *ga = t.grad_buffer(t.inputs(id)[0])) {
          for (std::size_t i = 0; i < g.size(); ++i)
            (*ga)[i] += g[i];
        }
        if (Tensor<T> *gb = t.grad_buffer(t.inputs(id)[1])) {
          if (!broadcast) {
            for (std::size_t i = 0; i < g.size(); ++i)
              (*gb)[i] += g[i];
          } else {
            const std::size_t cols = g.cols();
            for (std::size_t r = 0; r < g.rows(); ++r) {
              const T *row = g.data() + r * cols;
              for (std::size_t c = 0; c < cols; ++c)
                (*gb)[c] += row[c];
            }
          }
        }
      });
}

template <class T>
Var<T> sub(const Var<T> &a, const Var<T> &b) {
  Tape<T> &tape = common_tape(a, b);
  require_same_shape(a, b, "sub");
  const Tensor<T> &x = a.value(), &z = b.value();
  Tensor<T> y = x;
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] -= z[i];
  return tape.record(Op::kSub, std::move(y), { a.id(), b.id() },
                     [](Tape<T> &t, int id) {
                       const Tensor<T> &g = t.upstream(id);
                       if (Tensor<T> *ga = t.grad_buffer(t.inputs(id)[0])) {
                         for (std::size_t i = 0; i < g.size(); ++i)
                           (*ga)[i] += g[i];
                       }
                       if (Tensor<T> *gb = t.grad_buffer(t.inputs(id)[1])) {
                         for (std::size_t i = 0; i < g.size(); ++i)
                           (*gb)[i] -= g[i];
                       }
                     });
}

template <class T>
Var<T> mul(const Var<T> &a, const Var<T> &b) {
  Tape<T> &tape = common_tape(a, b);
  require_same_shape(a, b, "mul");
  const Tensor<T> &x = a.value(), &z = b.value();
  Tensor<T> y = x;
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] *= z[i];
  return tape.record(Op::kMul, std::move(y), { a.id(), b.id() },
                     [](Tape<T> &t, int id) {
                       const int ia = t.inputs(id)[0], ib = t.inputs(id)[1];
                       const Tensor<T> &g = t.upstream(id);
                       if (Tensor<T> *ga = t.grad_buffer(ia)) {
                         const Tensor<T> &z = t.value(ib);
                         for (std::size_t i = 0; i < g.size(); ++i)
                           (*ga)[i] += g[i] * z[i];
                       }
                       if (Tensor<T> *gb = t.grad_buffer(ib)) {
                         const Tensor<T> &x = t.value(ia);
                         for (std::size_t i = 0; i < g.size(); ++i)
                           (*gb)[i] += g[i] * x[i];
                       }
                     });
}

template <class T>
Var<T> div(const Var<T> &a, const Var<T> &b) {
  Tape<T> &tape = common_tape(a, b);
  require_same_shape(a, b, "div");
  const Tensor<T> &x = a.value(), &z = b.value();
  Tensor<T> y = x;
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] /= z[i];
  return tape.record(
      Op::kDiv, std::move(y), { a.id(), b.id() }, [](Tape<T> &t, int id) {
        const int ia = t.inputs(id)[0], ib = t.inputs(id)[1];
        const Tensor<T> &g = t.upstream(id);
        const Tensor<T> &z = t.value(ib);
        if (Tensor<T> *ga = t.grad_buffer(ia)) {
          for (std::size_t i = 0; i < g.size(); ++i)
            (*ga)[i] += g[i] / z[i];
        }
        if (Tensor<T> *gb = t.grad_buffer(ib)) {
          const Tensor<T> &y = t.value(id);
          for (std::size_t i = 0; i < g.size(); ++i)
            (*gb)[i] -= g[i] * y[i] / z[i];
        }
      });
}

template <class T>
Var<T> scale(const Var<T> &a, T c) {
  const Tensor<T> &x = a.value();
  Tensor<T> y = x;
  for (T &v: y.values())
    v *= c;
  return a.tape().record(Op::kScale, std::move(y), { a.id() },
                         [c](Tape<T> &t, int id) {
                           const Tensor<T> &g = t.upstream(id);
                           if (Tensor<T> *ga = t.grad_buffer(t.inputs(id)[0])) {
                             for (std::size_t i = 0; i < g.size(); ++i)
                               (*ga)[i] += c * g[i];
                           }
                         });
}

template <class T>
Var<T> scale_by(const Var<T> &a, const Var<T> &s) {
  Tape<T> &tape = common_tape(a, s);
  if (s.value().size() != 1)
    shape_error("scale_by: factor has shape " + shape_string(s.shape()));
  const T c = s.value()[0];
  Tensor<T> y = a.value();
  for (T &v: y.values())
    v *= c;
  return tape.record(Op::kScaleBy, std::move(y), { a.id(), s.id() },
                     [](Tape<T> &t, int id) {
                       const int ia = t.inputs(id)[0], is = t.inputs(id)[1];
                       const Tensor<T> &g = t.upstream(id);
                       const T c = t.value(is)[0];
                       if (Tensor<T> *ga = t.grad_buffer(ia)) {
                         for (std::size_t i = 0; i < g.size(); ++i)
                           (*ga)[i] += c * g[i];
                       }
                       if (Tensor<T> *gs = t.grad_buffer(is)) {
                         const Tensor<T> &x = t.value(ia);
                         T acc = 0;
                         for (std::size_t i = 0; i < g.size(); ++i)
                           acc += g[i] * x[i];
                         (*gs)[0] += acc;
                       }
                     });
}

template <class T>
Var<T> concat(std::span<const Var<T>> parts) {
  if (parts.empty())
    shape_error("concat: no inputs");
  Tape<T> &tape = parts[0].tape();
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  for (const Var<T> &p: parts) {
    common_tape(parts[0], p);
    if (p.rows() != rows)
      shape_error("concat: row count " + std::to_string(p.rows()) + " vs "
                  + std::to_string(rows));
    ids.push_back(p.id());
    offsets.push_back(cols);
    cols += p.cols();
  }

  Tensor<T> y = Tensor<T>::matrix(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor<T> &x = parts[k].value();
    const std::size_t pc = x.cols();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(x.data() + r * pc, pc, y.data() + r * cols + offsets[k]);
  }

  return tape.record(
      Op::kConcat, std::move(y), ids,
      [offsets = std::move(offsets)](Tape<T> &t, int id) {
        const Tensor<T> &g = t.upstream(id);
        const std::size_t rows = g.rows(), cols = g.cols();
        const std::vector<int> &in = t.inputs(id);
        for (std::size_t k = 0; k < in.size(); ++k) {
          Tensor<T> *gk = t.grad_buffer(in[k]);
          if (!gk)
            continue;
          const std::size_t pc = gk->cols();
          for (std::size_t r = 0; r < rows; ++r) {
            const T *src = g.data() + r * cols + offsets[k];
            T *dst = gk->data() + r * pc;
            for (std::size_t c = 0; c < pc; ++c)
              dst[c] += src[c];
          }
        }
      });
}

template <class T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty())
    shape_error("concat_rows: no inputs");
  Tape<T> &tape = parts[0].tape();
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  std::vector<int> ids;
  for (const Var<T> &p: parts) {
    common_tape(parts[0], p);
    if (p.cols() != cols)
      shape_error("concat_rows: column count " + std::to_string(p.cols())
                  + " vs " + std::to_string(cols));
    ids.push_back(p.id());
    rows += p.rows();
  }
  Tensor<T> y = Tensor<T>::matrix(rows, cols);
  std::size_t at = 0;
  for (const Var<T> &p: parts) {
    std::copy(p.value().storage().begin(), p.value().storage().end(),
              y.data() + at);
    at += p.value().size();
  }
  return tape.record(Op::kConcatRows, std::move(y), ids,
                     [](Tape<T> &t, int id) {
                       const Tensor<T> &g = t.upstream(id);
                       std::size_t at = 0;
                       for (int in: t.inputs(id)) {
                         const std::size_t n = t.value(in).size();
                         if (Tensor<T> *gk = t.grad_buffer(in)) {
                           for (std::size_t i = 0; i < n; ++i)
                             (*gk)[i] += g[at + i];
                         }
                         at += n;
                       }
                     });
}

template <class T>
Var<T> slice(const Var<T> &a, std::size_t begin, std::size_t end) {
  const Tensor<T> &x = a.value();
  if (begin > end || end > x.cols())
    shape_error("slice: [" + std::to_string(begin) + ", " + std::to_string(end)
                + ") of " + std::to_string(x.cols()) + " columns");
  const std::size_t rows = x.rows(), cols = x.cols(), w = end - begin;
  Tensor<T> y = Tensor<T>::matrix(rows, w);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(x.data() + r * cols + begin, w, y.data() + r * w);
  return a.tape().record(
      Op::kSlice, std::move(y), { a.id() }, [begin](Tape<T> &t, int id) {
        const Tensor<T> &g = t.upstream(id);
        Tensor<T> *ga = t.grad_buffer(t.inputs(id)[0]);
        if (!ga)
          return;
        const std::size_t rows = g.rows(), w = g.cols(), cols = ga->cols();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < w; ++c)
            ga->data()[r * cols + begin + c] += g.data()[r * w + c];
        }
      });
}

template <class T>
Var<T> relu(const Var<T> &a) {
  Tape<T> &tape = a.tape();
  const Tensor<T> &x = a.value();
  if (tape.track_kinks())
    tape.mix_kink_bits(x.values(), true);
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = x[i] > T(0) ? x[i] : T(0);
  return tape.record(Op::kRelu, std::move(y), { a.id() },
                     [](Tape<T> &t, int id) {
                       const int ia = t.inputs(id)[0];
                       const Tensor<T> &g = t.upstream(id);
                       const Tensor<T> &x = t.value(ia);
                       if (Tensor<T> *ga = t.grad_buffer(ia)) {
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           if (x[i] > T(0))
                             (*ga)[i] += g[i];
                         }
                       }
                     });
}

template <class T>
Var<T> exp(const Var<T> &a) {
  const Tensor<T> &x = a.value();
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = std::exp(x[i]);
  return a.tape().record(Op::kExp, std::move(y), { a.id() },
                         [](Tape<T> &t, int id) {
                           const Tensor<T> &g = t.upstream(id);
                           const Tensor<T> &y = t.value(id);
                           if (Tensor<T> *ga = t.grad_buffer(t.inputs(id)[0])) {
                             for (std::size_t i = 0; i < g.size(); ++i)
                               (*ga)[i] += g[i] * y[i];
                           }
                         });
}

template <class T>
Var<T> log(const Var<T> &a) {
  const Tensor<T> &x = a.value();
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = std::log(x[i]);
  return a.tape().record(Op::kLog, std::move(y), { a.id() },
                         [](Tape<T> &t, int id) {
                           const int ia = t.inputs(id)[0];
                           const Tensor<T> &g = t.upstream(id);
                           const Tensor<T> &x = t.value(ia);
                           if (Tensor<T> *ga = t.grad_buffer(ia)) {
                             for (std::size_t i = 0; i < g.size(); ++i)
                               (*ga)[i] += g[i] / x[i];
                           }
                         });
}

template <class T>
Var<T> abs(const Var<T> &a) {
  Tape<T> &tape = a.tape();
  const Tensor<T> &x = a.value();
  if (tape.track_kinks())
    tape.mix_kink_bits(x.values(), false);
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = std::abs(x[i]);
  return tape.record(Op::kAbs, std::move(y), { a.id() },
                     [](Tape<T> &t, int id) {
                       const int ia = t.inputs(id)[0];
                       const Tensor<T> &g = t.upstream(id);
                       const Tensor<T> &x = t.value(ia);
                       if (Tensor<T> *ga = t.grad_buffer(ia)) {
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           const T s = x[i] > T(0)   ? T(1)
                                       : x[i] < T(0) ? T(-1)
                                                     : T(0);
                           (*ga)[i] += g[i] * s;
                         }
                       }
                     });
}

namespace {
  // Softmax backward on one strided group: gx = y * (g - <g, y>).
  template <class T>
  void softmax_adjoint(const T *y, const T *g, T *gx, std::size_t n,
                       std::size_t stride) {
    T dot = 0;
    for (std::size_t i = 0; i < n; ++i)
      dot += g[i * stride] * y[i * stride];
    for (std::size_t i = 0; i < n; ++i)
      gx[i * stride] += y[i * stride] * (g[i * stride] - dot);
  }

  template <class T>
  void softmax_forward(const T *x, T *y, std::size_t n, std::size_t stride) {
    if (n == 0)
      return;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t i = 0; i < n; ++i)
      mx = std::max(mx, x[i * stride]);
    T total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i * stride] = std::exp(x[i * stride] - mx);
      total += y[i * stride];
    }
    for (std::size_t i = 0; i < n; ++i)
      y[i * stride] /= total;
  }
}  // namespace

template <class T>
Var<T> softmax_rows(const Var<T> &a) {
  const Tensor<T> &x = a.value();
  Tensor<T> y(x.shape());
  const std::size_t rows = x.rows(), cols = x.cols();
  for (std::size_t r = 0; r < rows; ++r)
    softmax_forward(x.data() + r * cols, y.data() + r * cols, cols, 1);
  return a.tape().record(
      Op::kSoftmaxRows, std::move(y), { a.id() }, [](Tape<T> &t, int id) {
        Tensor<T> *ga = t.grad_buffer(t.inputs(id)[0]);
        if (!ga)
          return;
        const Tensor<T> &g = t.upstream(id);
        const Tensor<T> &y = t.value(id);
        const std::size_t rows = y.rows(), cols = y.cols();
        for (std::size_t r = 0; r < rows; ++r) {
          softmax_adjoint(y.data() + r * cols, g.data() + r * cols,
                          ga->data() + r * cols, cols, 1);
        }
      });
}

template <class T>
Var<T> segment_softmax(const Var<T> &a, std::span<const int> offsets) {
  const Tensor<T> &x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  if (offsets.empty() || offsets.front() != 0
      || static_cast<std::size_t>(offsets.back()) != rows
      || !std::is_sorted(offsets.begin(), offsets.end()))
    shape_error("segment_softmax: offsets must run from 0 to "
                + std::to_string(rows) + " without decreasing");

  Tensor<T> y(x.shape());
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const std::size_t b = offsets[s], n = offsets[s + 1] - offsets[s];
    for (std::size_t c = 0; c < cols; ++c)
      softmax_forward(x.data() + b * cols + c, y.data() + b * cols + c, n,
                      cols);
  }
  return a.tape().record(
      Op::kSegmentSoftmax, std::move(y), { a.id() },
      [offsets = std::vector<int>(offsets.begin(), offsets.end())](Tape<T> &t,
                                                                   int id) {
        Tensor<T> *ga = t.grad_buffer(t.inputs(id)[0]);
        if (!ga)
          return;
        const Tensor<T> &g = t.upstream(id);
        const Tensor<T> &y = t.value(id);
        const std::size_t cols = y.cols();
        for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
          const std::size_t b = offsets[s], n = offsets[s + 1] - offsets[s];
          for (std::size_t c = 0; c < cols; ++c) {
            softmax_adjoint(y.data() + b * cols + c, g.data() + b * cols + c,
                            ga->data() + b * cols + c, n, cols);
          }
        }
      });
}

template <class T>
Var<T> segment_sum(const Var<T> &a, std::span<const int> ids,
                   std::size_t num_segments) {
  const Tensor<T> &x = a.value();
  if (ids.size() != x.rows())
    shape_error("segment_sum: " + std::to_string(ids.size()) + " ids for "
                + std::to_string(x.rows()) + " rows");
  check_index<T>(ids, num_segments, "segment_sum");
  const std::size_t cols = x.cols();
  Tensor<T> y = Tensor<T>::matrix(num_segments, cols);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const T *src = x.data() + r * cols;
    T *dst = y.data() + static_cast<std::size_t>(ids[r]) * cols;
    for (std::size_t c = 0; c < cols; ++c)
      dst[c] += src[c];
  }
  return a.tape().record(
      Op::kSegmentSum, std::move(y), { a.id() },
      [ids = std::vector<int>(ids.begin(), ids.end())](Tape<T> &t, int id) {
        Tensor<T> *ga = t.grad_buffer(t.inputs(id)[0]);
        if (!ga)
          return;
        const Tensor<T> &g = t.upstream(id);
        const std::size_t cols = g.cols();
        for (std::size_t r = 0; r < ids.size(); ++r) {
          const T *src = g.data() + static_cast<std::size_t>(ids[r]) * cols;
          T *dst = ga->data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c)
            dst[c] += src[c];
        }
      });
}

template <class T>
Var<T> gather_rows(const Var<T> &a, std::span<const int> index) {
  const Tensor<T> &x = a.value();
  check_index<T>(index, x.rows(), "gather_rows");
  const std::size_t cols = x.cols();
  Tensor<T> y = Tensor<T>::matrix(index.size(), cols);
  for (std::size_t r = 0; r < index.size(); ++r) {
    std::copy_n(x.data() + static_cast<std::size_t>(index[r]) * cols, cols,
                y.data() + r * cols);
  }
  return a.tape().record(
      Op::kGatherRows, std::move(y), { a.id() },
      [index = std::vector<int>(index.begin(), index.end())](Tape<T> &t,
                                                             int id) {
        Tensor<T> *ga = t.grad_buffer(t.inputs(id)[0]);
        if (!ga)
          return;
        const Tensor<T> &g = t.upstream(id);
        const std::size_t cols = g.cols();
        for (std::size_t r = 0; r < index.size(); ++r) {
          const T *src = g.data() + r * cols;
          T *dst = ga->data() + static_cast<std::size_t>(index[r]) * cols;
          for (std::size_t c = 0; c < cols; ++c)
            dst[c] += src[c];
        }
      });
}

template <class T>
Var<T> sum(const Var<T> &a) {
  T total = 0;
  for (T v: a.value().values())
    total += v;
  return a.tape().record(Op::kSum, Tensor<T>::scalar(total), { a.id() },
                         [](Tape<T> &t, int id) {
                           const T g = t.upstream(id)[0];
                           if (Tensor<T> *ga = t.grad_buffer(t.inputs(id)[0])) {
                             for (T &v: ga->values())
                               v += g;
                           }
                         });
}

template <class T>
Var<T> mean(const Var<T> &a) {
  const std::size_t n = a.value().size();
  if (n == 0)
    shape_error("mean of an empty tensor");
  T total = 0;
  for (T v: a.value().values())
    total += v;
  return a.tape().record(Op::kMean, Tensor<T>::scalar(total / T(n)),
                         { a.id() }, [n](Tape<T> &t, int id) {
                           const T g = t.upstream(id)[0] / T(n);
                           if (Tensor<T> *ga = t.grad_buffer(t.inputs(id)[0])) {
                             for (T &v: ga->values())
                               v += g;
                           }
                         });
}

template <class T>
Var<T> signed_eps(const Var<T> &a, T eps) {
  Tensor<T> y = a.value();
  for (T &v: y.values())
    v += std::copysign(eps, v);
  return a.tape().record(Op::kSignedEps, std::move(y), { a.id() },
                         [](Tape<T> &t, int id) {
                           const Tensor<T> &g = t.upstream(id);
                           if (Tensor<T> *ga = t.grad_buffer(t.inputs(id)[0])) {
                             for (std::size_t i = 0; i < g.size(); ++i)
                               (*ga)[i] += g[i];
                           }
                         });
}

#define RINGKIT_INSTANTIATE_OPS(T)                                            \
  template Var<T> matmul(const Var<T> &, const Var<T> &);                     \
  template Var<T> add(const Var<T> &, const Var<T> &);                        \
  template Var<T> sub(const Var<T> &, const Var<T> &);                        \
  template Var<T> mul(const Var<T> &, const Var<T> &);                        \
  template Var<T> div(const Var<T> &, const Var<T> &);                        \
  template Var<T> scale(const Var<T> &, T);                                   \
  template Var<T> scale_by(const Var<T> &, const Var<T> &);                   \
  template Var<T> concat(std::span<const Var<T>>);                            \
  template Var<T> concat_rows(std::span<const Var<T>>);                       \
  template Var<T> slice(const Var<T> &, std::size_t, std::size_t);            \
  template Var<T> relu(const Var<T> &);                                       \
  template Var<T> exp(const Var<T> &);                                        \
  template Var<T> log(const Var<T> &);                                        \
  template Var<T> abs(const Var<T> &);                                        \
  template Var<T> softmax_rows(const Var<T> &);                               \
  template Var<T> segment_softmax(const Var<T> &, std::span<const int>);      \
  template Var<T> segment_sum(const Var<T> &, std::span<const int>,           \
                              std::size_t);                                   \
  template Var<T> gather_rows(const Var<T> &, std::span<const int>);          \
  template Var<T> sum(const Var<T> &);                                        \
  template Var<T> mean(const Var<T> &);                                       \
  template Var<T> signed_eps(const Var<T> &, T);

RINGKIT_INSTANTIATE_OPS(float)
RINGKIT_INSTANTIATE_OPS(double)

#undef RINGKIT_INSTANTIATE_OPS

}  // namespace ringkit::tensor
