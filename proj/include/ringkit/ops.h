//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef RINGKIT_OPS_H_
#define RINGKIT_OPS_H_

#include <cstddef>
#include <span>
#include <vector>

#include "ringkit/tensor.h"

// Differentiable operations. Every op takes its tape from its first Var
// argument; mixing tapes throws ShapeMismatch. Matrices are the rank-2 views
// of Tensor (leading axes are rows, the last axis is columns).
namespace ringkit::tensor {

/// (n x k) @ (k x m)
template <class T>
Var<T> matmul(const Var<T> &a, const Var<T> &b);

/// Elementwise a + b. b may also be a single row (or a vector of length
/// cols(a)) broadcast over the rows of a.
template <class T>
Var<T> add(const Var<T> &a, const Var<T> &b);

template <class T>
Var<T> sub(const Var<T> &a, const Var<T> &b);

/// Elementwise product of equal shapes.
template <class T>
Var<T> mul(const Var<T> &a, const Var<T> &b);

/// Elementwise quotient of equal shapes.
template <class T>
Var<T> div(const Var<T> &a, const Var<T> &b);

/// a * c for a constant c.
template <class T>
Var<T> scale(const Var<T> &a, T c);

/// a * s for a one-element Var s.
template <class T>
Var<T> scale_by(const Var<T> &a, const Var<T> &s);

/// Concatenation along the last axis; all parts share rows().
template <class T>
Var<T> concat(std::span<const Var<T>> parts);

/// Concatenation along rows; all parts share cols().
template <class T>
Var<T> concat_rows(std::span<const Var<T>> parts);

/// Columns [begin, end) of every row.
template <class T>
Var<T> slice(const Var<T> &a, std::size_t begin, std::size_t end);

template <class T>
Var<T> relu(const Var<T> &a);

template <class T>
Var<T> exp(const Var<T> &a);

template <class T>
Var<T> log(const Var<T> &a);

template <class T>
Var<T> abs(const Var<T> &a);

template <class T>
Var<T> softmax_rows(const Var<T> &a);

/// Softmax over the rows of each contiguous segment, independently per
/// column. offsets has num_segments + 1 entries; segment s owns rows
/// [offsets[s], offsets[s+1]).
template <class T>
Var<T> segment_softmax(const Var<T> &a, std::span<const int> offsets);

/// out[ids[i]] += a[i]; out has num_segments rows.
template <class T>
Var<T> segment_sum(const Var<T> &a, std::span<const int> ids,
                   std::size_t num_segments);

/// out[i] = a[index[i]] (embedding lookup).
template <class T>
Var<T> gather_rows(const Var<T> &a, std::span<const int> index);

template <class T>
Var<T> sum(const Var<T> &a);

template <class T>
Var<T> mean(const Var<T> &a);

/// a + copysign(eps, a); keeps denominators away from zero. Adjoint 1.
template <class T>
Var<T> signed_eps(const Var<T> &a, T eps);

}  // namespace ringkit::tensor

#endif  // RINGKIT_OPS_H_
