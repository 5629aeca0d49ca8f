#pragma once

#include "hgsum/value.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace hgsum::ops {

// Every primitive throws NumericError naming itself and the offending shapes
// when its inputs do not fit.

Value matmul(const Value& a, const Value& b);
// a * b^T
Value matmul_nt(const Value& a, const Value& b);
Value transpose(const Value& a);

// Same shape, or `b` a 1 x n row broadcast over the rows of `a`.
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
// Scales row i of `a` by c(i, 0).
Value mul_col(const Value& a, const Value& c);
Value scale(const Value& a, double s);
// a / s for a 1 x 1 divisor s.
Value divide(const Value& a, const Value& s);

// axis 0 stacks rows, axis 1 stacks columns.
Value concat(std::span<const Value> parts, int axis);
Value slice(const Value& a, int axis, Index begin, Index count);

Value softmax_rows(const Value& a);
Value log_softmax_rows(const Value& a);
Value leaky_relu(const Value& a, double slope);
Value relu(const Value& a);
Value elu(const Value& a);

// axis 0 averages over rows (result 1 x cols), axis 1 over columns (rows x 1).
Value mean(const Value& a, int axis);
Value sum(const Value& a);

// Cosine of two 1 x d rows, 0 (with zero gradient) when either norm < 1e-12.
Value cosine(const Value& u, const Value& v);

// Entries where mask(i, j) is true are replaced by `fill` and get no gradient.
Value masked_fill(const Value& a, const std::vector<std::uint8_t>& mask, double fill);

// Embedding lookup: row i of the result is table.row(ids[i]).
Value gather_rows(const Value& table, std::span<const Index> ids);
// out.row(index[e]) += src.row(e) for an `out` of `n_rows` rows.
Value scatter_add_rows(const Value& src, std::span<const Index> index, Index n_rows);
// Softmax of an E x 1 column within groups sharing segment[e].
Value segment_softmax(const Value& scores, std::span<const Index> segment, Index n_segments);

Value layer_norm(const Value& x, const Value& gain, const Value& bias, double eps = 1e-5);
Value dropout(const Value& x, double p, std::mt19937_64& rng, bool training);

// Mean over non-ignored rows of the smoothed negative log-likelihood: the gold
// class gets 1 - eps and every other class eps / (V - 1).
Value cross_entropy_smoothed(const Value& logits, std::span<const Index> targets, double eps, Index ignore_id = -1);

}  // namespace hgsum::ops
