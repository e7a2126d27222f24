#include "fednlp/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fednlp/tensor/errors.hpp"

namespace fednlp {

namespace kernels {

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* a0 = a + i * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    double* __restrict c0 = c + i * n;
    double* __restrict c1 = c0 + n;
    double* __restrict c2 = c1 + n;
    double* __restrict c3 = c2 + n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* __restrict brow = b + p * n;
      const double x0 = a0[p], x1 = a1[p], x2 = a2[p], x3 = a3[p];
      for (std::size_t j = 0; j < n; ++j) {
        const double bv = brow[j];
        c0[j] += x0 * bv;
        c1[j] += x1 * bv;
        c2[j] += x2 * bv;
        c3[j] += x3 * bv;
      }
    }
  }
  for (; i < m; ++i) {
    const double* arow = a + i * k;
    double* __restrict crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* __restrict brow = b + p * n;
      const double x = arow[p];
      for (std::size_t j = 0; j < n; ++j) crow[j] += x * brow[j];
    }
  }
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
  // b is n x k; transpose once so the inner loop runs over contiguous memory.
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  gemm_nn(m, k, n, a, bt.data(), c);
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
  // a is k x m: c[i, :] += sum_p a[p, i] * b[p, :]
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    double* __restrict c0 = c + i * n;
    double* __restrict c1 = c0 + n;
    double* __restrict c2 = c1 + n;
    double* __restrict c3 = c2 + n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* arow = a + p * m + i;
      const double* __restrict brow = b + p * n;
      const double x0 = arow[0], x1 = arow[1], x2 = arow[2], x3 = arow[3];
      for (std::size_t j = 0; j < n; ++j) {
        const double bv = brow[j];
        c0[j] += x0 * bv;
        c1[j] += x1 * bv;
        c2[j] += x2 * bv;
        c3[j] += x3 * bv;
      }
    }
  }
  for (; i < m; ++i) {
    double* __restrict crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double x = a[p * m + i];
      const double* __restrict brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += x * brow[j];
    }
  }
}

}  // namespace kernels

namespace {

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() < 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " + shape_to_string(t.shape()));
  }
}

Shape with_last_dim(const Shape& shape, std::size_t last) {
  Shape out = shape;
  out.back() = last;
  return out;
}

void accumulate(Tensor& target, const Tensor& delta) {
  double* __restrict t = target.values().data();
  const double* __restrict d = delta.values().data();
  for (std::size_t i = 0, n = target.numel(); i < n; ++i) t[i] += d[i];
}

// How a binary op's second operand lines up with the first.
enum class Broadcast { same, row_vector };

Broadcast classify_broadcast(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::same;
  if (b.numel() == a.cols() && b.rows() == 1) return Broadcast::row_vector;
  throw DimensionError(std::string(op) + ": cannot broadcast " + shape_to_string(b.shape()) + " onto " +
                       shape_to_string(a.shape()));
}

// Reduces a full-shape gradient to b's shape.
void accumulate_broadcast(Tensor& b_grad, const Tensor& full, Broadcast mode, double sign) {
  if (mode == Broadcast::same) {
    double* __restrict g = b_grad.values().data();
    const double* __restrict f = full.values().data();
    for (std::size_t i = 0, n = full.numel(); i < n; ++i) g[i] += sign * f[i];
    return;
  }
  const std::size_t cols = full.cols();
  double* __restrict g = b_grad.values().data();
  for (std::size_t r = 0; r < full.rows(); ++r) {
    const double* __restrict f = full.values().data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) g[c] += sign * f[c];
  }
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Var binary(Elementwise kind, Var a, Var b) {
  const char* name = kind == Elementwise::add ? "add" : kind == Elementwise::sub ? "sub" : "mul";
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast mode = classify_broadcast(av, bv, name);
  Tensor out = av;
  const std::size_t cols = av.cols();
  double* __restrict o = out.values().data();
  const double* __restrict bp = bv.values().data();
  for (std::size_t i = 0, n = out.numel(); i < n; ++i) {
    const double y = mode == Broadcast::same ? bp[i] : bp[i % cols];
    switch (kind) {
      case Elementwise::add: o[i] += y; break;
      case Elementwise::sub: o[i] -= y; break;
      default: o[i] *= y; break;
    }
  }
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [kind, mode, ia, ib](Tape& tape, const Tensor& g) {
    if (kind == Elementwise::mul) {
      const Tensor& av = tape.value(ia);
      const Tensor& bv = tape.value(ib);
      const std::size_t cols = av.cols();
      if (tape.requires_grad(ia)) {
        double* ga = tape.grad_mut(ia).values().data();
        for (std::size_t i = 0, n = g.numel(); i < n; ++i) {
          ga[i] += g[i] * (mode == Broadcast::same ? bv[i] : bv[i % cols]);
        }
      }
      if (tape.requires_grad(ib)) {
        double* gb = tape.grad_mut(ib).values().data();
        for (std::size_t i = 0, n = g.numel(); i < n; ++i) {
          gb[mode == Broadcast::same ? i : i % cols] += g[i] * av[i];
        }
      }
      return;
    }
    if (tape.requires_grad(ia)) accumulate(tape.grad_mut(ia), g);
    if (tape.requires_grad(ib)) {
      accumulate_broadcast(tape.grad_mut(ib), g, mode, kind == Elementwise::sub ? -1.0 : 1.0);
    }
  });
}

Var unary(Elementwise kind, Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) {
    switch (kind) {
      case Elementwise::tanh: v = std::tanh(v); break;
      case Elementwise::sigmoid: v = sigmoid_scalar(v); break;
      default: v = gelu_scalar(v); break;
    }
  }
  const NodeId ia = a.id();
  const NodeId io = static_cast<NodeId>(a.tape().size());
  return a.tape().record(std::move(out), {ia}, [kind, ia, io](Tape& tape, const Tensor& g) {
    const Tensor& y = tape.value(io);
    const Tensor& x = tape.value(ia);
    double* ga = tape.grad_mut(ia).values().data();
    for (std::size_t i = 0, n = g.numel(); i < n; ++i) {
      double d;
      switch (kind) {
        case Elementwise::tanh: d = 1.0 - y[i] * y[i]; break;
        case Elementwise::sigmoid: d = y[i] * (1.0 - y[i]); break;
        default: d = gelu_derivative(x[i]); break;
      }
      ga[i] += g[i] * d;
    }
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul");
  if (bv.rank() != 2) {
    throw DimensionError("matmul: right operand must be rank 2, got " + shape_to_string(bv.shape()));
  }
  if (av.cols() != bv.shape()[0]) {
    throw DimensionError("matmul: inner dimensions disagree: " + shape_to_string(av.shape()) + " x " +
                         shape_to_string(bv.shape()));
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out(with_last_dim(av.shape(), n), 0.0);
  kernels::gemm_nn(m, k, n, av.values().data(), bv.values().data(), out.values().data());
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& tape, const Tensor& g) {
    if (tape.requires_grad(ia)) {
      kernels::gemm_nt(m, n, k, g.values().data(), tape.value(ib).values().data(),
                       tape.grad_mut(ia).values().data());
    }
    if (tape.requires_grad(ib)) {
      kernels::gemm_tn(k, m, n, tape.value(ia).values().data(), g.values().data(),
                       tape.grad_mut(ib).values().data());
    }
  });
}

Var elementwise(Elementwise kind, Var a, std::optional<Var> b) {
  const bool is_binary = kind == Elementwise::add || kind == Elementwise::sub || kind == Elementwise::mul;
  if (is_binary != b.has_value()) {
    throw UsageError(is_binary ? "elementwise: binary op needs a second operand"
                               : "elementwise: unary op takes one operand");
  }
  return is_binary ? binary(kind, a, *b) : unary(kind, a);
}

Var add(Var a, Var b) { return binary(Elementwise::add, a, b); }
Var sub(Var a, Var b) { return binary(Elementwise::sub, a, b); }
Var mul(Var a, Var b) { return binary(Elementwise::mul, a, b); }
Var tanh(Var a) { return unary(Elementwise::tanh, a); }
Var sigmoid(Var a) { return unary(Elementwise::sigmoid, a); }
Var gelu(Var a) { return unary(Elementwise::gelu, a); }

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia, factor](Tape& tape, const Tensor& g) {
    double* ga = tape.grad_mut(ia).values().data();
    for (std::size_t i = 0, n = g.numel(); i < n; ++i) ga[i] += factor * g[i];
  });
}

Var softmax_rows(Var a) {
  Tensor out = a.value();
  const std::size_t cols = out.cols();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      total += v;
    }
    for (double& v : row) v /= total;
  }
  const NodeId ia = a.id();
  const NodeId io = static_cast<NodeId>(a.tape().size());
  return a.tape().record(std::move(out), {ia}, [ia, io, cols](Tape& tape, const Tensor& g) {
    const Tensor& y = tape.value(io);
    Tensor& ga = tape.grad_mut(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const double* yr = y.values().data() + r * cols;
      const double* gr = g.values().data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += yr[c] * gr[c];
      double* out = ga.values().data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) out[c] += yr[c] * (gr[c] - dot);
    }
  });
}

Var layer_norm(Var a, Var gain, Var bias) {
  const Tensor& x = a.value();
  const std::size_t n = x.cols();
  if (gain.value().numel() != n || bias.value().numel() != n) {
    throw DimensionError("layer_norm: gain/bias " + shape_to_string(gain.shape()) + "/" +
                         shape_to_string(bias.shape()) + " do not match row width of " +
                         shape_to_string(x.shape()));
  }
  const std::size_t rows = x.rows();
  // Saved for backward: normalized rows and the reciprocal std per row.
  Tensor normalized(x.shape(), 0.0);
  std::vector<double> inv_std(rows);
  Tensor out(x.shape(), 0.0);
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  for (std::size_t r = 0; r < rows; ++r) {
    auto xr = x.row(r);
    double mean = 0.0;
    for (double v : xr) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : xr) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double istd = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    inv_std[r] = istd;
    auto nr = normalized.row(r);
    auto orow = out.row(r);
    for (std::size_t c = 0; c < n; ++c) {
      nr[c] = (xr[c] - mean) * istd;
      orow[c] = nr[c] * gv[c] + bv[c];
    }
  }
  const NodeId ia = a.id(), ig = gain.id(), ib = bias.id();
  return a.tape().record(
      std::move(out), {ia, ig, ib},
      [ia, ig, ib, n, normalized = std::move(normalized), inv_std = std::move(inv_std)](Tape& tape,
                                                                                         const Tensor& g) {
        const Tensor& gv = tape.value(ig);
        const bool want_x = tape.requires_grad(ia);
        const bool want_g = tape.requires_grad(ig);
        const bool want_b = tape.requires_grad(ib);
        std::vector<double> dxhat(n);
        for (std::size_t r = 0; r < normalized.rows(); ++r) {
          auto xh = normalized.row(r);
          auto gr = g.row(r);
          if (want_g) {
            auto dg = tape.grad_mut(ig).values();
            for (std::size_t c = 0; c < n; ++c) dg[c] += gr[c] * xh[c];
          }
          if (want_b) {
            auto db = tape.grad_mut(ib).values();
            for (std::size_t c = 0; c < n; ++c) db[c] += gr[c];
          }
          if (!want_x) continue;
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t c = 0; c < n; ++c) {
            dxhat[c] = gr[c] * gv[c];
            mean_d += dxhat[c];
            mean_dx += dxhat[c] * xh[c];
          }
          mean_d /= static_cast<double>(n);
          mean_dx /= static_cast<double>(n);
          auto dx = tape.grad_mut(ia).row(r);
          for (std::size_t c = 0; c < n; ++c) dx[c] += inv_std[r] * (dxhat[c] - mean_d - xh[c] * mean_dx);
        }
      });
}

Var embedding_lookup(Var table, std::span<const std::int32_t> ids, const Shape& ids_shape) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw DimensionError("embedding_lookup: table must be V x d, got " + shape_to_string(tv.shape()));
  if (shape_numel(ids_shape) != ids.size()) {
    throw DimensionError("embedding_lookup: ids length " + std::to_string(ids.size()) + " does not match shape " +
                         shape_to_string(ids_shape));
  }
  const std::size_t vocab = tv.rows(), d = tv.cols();
  for (std::int32_t id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw IndexError("embedding_lookup: id " + std::to_string(id) + " outside [0, " + std::to_string(vocab) + ")");
    }
  }
  Shape out_shape = ids_shape;
  out_shape.push_back(d);
  Tensor out(out_shape, 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto src = tv.row(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), out.values().begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  const NodeId it = table.id();
  std::vector<std::int32_t> saved(ids.begin(), ids.end());
  return table.tape().record(std::move(out), {it}, [it, d, saved = std::move(saved)](Tape& tape, const Tensor& g) {
    Tensor& gt = tape.grad_mut(it);
    for (std::size_t i = 0; i < saved.size(); ++i) {
      double* dst = gt.values().data() + static_cast<std::size_t>(saved[i]) * d;
      const double* src = g.values().data() + i * d;
      for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
    }
  });
}

Var masked_cross_entropy(Var logits, std::span<const std::int32_t> labels, std::int32_t ignore_value) {
  const Tensor& z = logits.value();
  const std::size_t vocab = z.cols();
  if (z.rows() != labels.size()) {
    throw DimensionError("masked_cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                         shape_to_string(z.shape()));
  }
  std::size_t counted = 0;
  for (std::int32_t y : labels) {
    if (y == ignore_value) continue;
    if (y < 0 || static_cast<std::size_t>(y) >= vocab) {
      throw IndexError("masked_cross_entropy: label " + std::to_string(y) + " outside [0, " + std::to_string(vocab) +
                       ")");
    }
    ++counted;
  }
  // Saved softmax probabilities of the counted rows only.
  std::vector<std::size_t> rows;
  rows.reserve(counted);
  Tensor probs(Shape{std::max<std::size_t>(counted, 1), vocab}, 0.0);
  double loss = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] == ignore_value) continue;
    auto zr = z.row(r);
    const double mx = *std::max_element(zr.begin(), zr.end());
    double total = 0.0;
    auto pr = probs.row(rows.size());
    for (std::size_t c = 0; c < vocab; ++c) {
      pr[c] = std::exp(zr[c] - mx);
      total += pr[c];
    }
    for (double& p : pr) p /= total;
    loss += (std::log(total) + mx) - zr[static_cast<std::size_t>(labels[r])];
    rows.push_back(r);
  }
  if (counted > 0) loss /= static_cast<double>(counted);
  const NodeId iz = logits.id();
  std::vector<std::int32_t> saved(labels.begin(), labels.end());
  return logits.tape().record(
      Tensor::scalar(loss), {iz},
      [iz, vocab, rows = std::move(rows), probs = std::move(probs), saved = std::move(saved)](Tape& tape,
                                                                                             const Tensor& g) {
        if (rows.empty()) return;
        const double factor = g[0] / static_cast<double>(rows.size());
        Tensor& gz = tape.grad_mut(iz);
        for (std::size_t k = 0; k < rows.size(); ++k) {
          auto pr = probs.row(k);
          auto out = gz.row(rows[k]);
          for (std::size_t c = 0; c < vocab; ++c) out[c] += factor * pr[c];
          out[static_cast<std::size_t>(saved[rows[k]])] -= factor;
        }
      });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {ia},
                         [ia](Tape& tape, const Tensor& g) { accumulate(tape.grad_mut(ia), g); });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require_matrix(av, "slice_rows");
  if (begin >= end || end > av.rows()) {
    throw IndexError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) + ") outside " +
                     shape_to_string(av.shape()));
  }
  const std::size_t cols = av.cols();
  std::vector<double> data(av.values().begin() + static_cast<std::ptrdiff_t>(begin * cols),
                           av.values().begin() + static_cast<std::ptrdiff_t>(end * cols));
  const NodeId ia = a.id();
  return a.tape().record(Tensor(Shape{end - begin, cols}, std::move(data)), {ia},
                         [ia, begin, cols](Tape& tape, const Tensor& g) {
                           double* dst = tape.grad_mut(ia).values().data() + begin * cols;
                           for (std::size_t i = 0, n = g.numel(); i < n; ++i) dst[i] += g[i];
                         });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require_matrix(av, "slice_cols");
  if (begin >= end || end > av.cols()) {
    throw IndexError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) + ") outside " +
                     shape_to_string(av.shape()));
  }
  const std::size_t rows = av.rows(), cols = av.cols(), width = end - begin;
  Tensor out(Shape{rows, width}, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = av.values().data() + r * cols + begin;
    std::copy(src, src + width, out.values().data() + r * width);
  }
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia, begin, cols, width](Tape& tape, const Tensor& g) {
    Tensor& ga = tape.grad_mut(ia);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double* dst = ga.values().data() + r * cols + begin;
      const double* src = g.values().data() + r * width;
      for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
    }
  });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  const Tensor& av = a.value();
  require_matrix(av, "gather_rows");
  if (rows.empty()) throw UsageError("gather_rows: no rows requested");
  const std::size_t cols = av.cols();
  Tensor out(Shape{rows.size(), cols}, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows()) {
      throw IndexError("gather_rows: row " + std::to_string(rows[i]) + " outside " + shape_to_string(av.shape()));
    }
    auto src = av.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  const NodeId ia = a.id();
  std::vector<std::size_t> saved(rows.begin(), rows.end());
  return a.tape().record(std::move(out), {ia}, [ia, cols, saved = std::move(saved)](Tape& tape, const Tensor& g) {
    Tensor& ga = tape.grad_mut(ia);
    for (std::size_t i = 0; i < saved.size(); ++i) {
      double* dst = ga.values().data() + saved[i] * cols;
      const double* src = g.values().data() + i * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat_rows: no inputs");
  const std::size_t cols = parts.front().value().cols();
  std::size_t rows = 0;
  std::vector<NodeId> ids;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    if (p.value().cols() != cols) {
      throw DimensionError("concat_rows: column mismatch " + shape_to_string(parts.front().shape()) + " vs " +
                           shape_to_string(p.shape()));
    }
    offsets.push_back(rows);
    rows += p.value().rows();
    ids.push_back(p.id());
  }
  Tensor out(Shape{rows, cols}, 0.0);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& src = parts[i].value().values();
    std::copy(src.begin(), src.end(), out.values().begin() + static_cast<std::ptrdiff_t>(offsets[i] * cols));
  }
  std::vector<NodeId> inputs = ids;
  return parts.front().tape().record(
      std::move(out), std::move(inputs), [ids, offsets, cols](Tape& tape, const Tensor& g) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (!tape.requires_grad(ids[i])) continue;
          Tensor& gi = tape.grad_mut(ids[i]);
          const double* src = g.values().data() + offsets[i] * cols;
          for (std::size_t k = 0, n = gi.numel(); k < n; ++k) gi[k] += src[k];
        }
      });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const NodeId ia = a.id();
  return a.tape().record(Tensor::scalar(total), {ia}, [ia](Tape& tape, const Tensor& g) {
    for (double& v : tape.grad_mut(ia).values()) v += g[0];
  });
}

}  // namespace fednlp
