#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

#include "fednlp/tensor/autodiff.hpp"

namespace fednlp {

/// Matrix product. `a` may have any rank >= 2 and is viewed as rows x cols
/// (cols = last dimension); the result keeps a's leading dimensions.
Var matmul(Var a, Var b);

enum class Elementwise { add, sub, mul, tanh, sigmoid, gelu };

/// Binary kinds take `b` with a's exact shape, or a trailing vector of a.cols()
/// elements that is broadcast over every row of `a`.
Var elementwise(Elementwise kind, Var a, std::optional<Var> b = std::nullopt);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var tanh(Var a);
Var sigmoid(Var a);
/// Exact (erf) form: x * Phi(x).
Var gelu(Var a);
Var scale(Var a, double factor);

/// Row-wise softmax over the last dimension (max-subtracted).
Var softmax_rows(Var a);

inline constexpr double kLayerNormEpsilon = 1e-5;

/// Normalizes each row to zero mean and unit (biased) variance, then applies
/// `gain` and `bias` (vectors of a.cols() elements).
Var layer_norm(Var a, Var gain, Var bias);

/// Gathers rows of `table` (V x d). The result has shape ids_shape + {d}.
Var embedding_lookup(Var table, std::span<const std::int32_t> ids, const Shape& ids_shape);

/// Mean of -log softmax(logits[i])[labels[i]] over positions whose label is
/// not `ignore_value`. `logits` is viewed as labels.size() rows of V logits.
/// Returns 0 with zero gradient when every position is ignored.
Var masked_cross_entropy(Var logits, std::span<const std::int32_t> labels, std::int32_t ignore_value);

Var reshape(Var a, Shape shape);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var gather_rows(Var a, std::span<const std::size_t> rows);
Var concat_rows(std::span<const Var> parts);
Var sum(Var a);

/// Raw kernels shared with the attention op and benchmarks. All matrices are
/// row-major and contiguous; C is accumulated into (C += ...).
namespace kernels {
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c);
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c);
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c);
}  // namespace kernels

}  // namespace fednlp
