#include "fednlp/tensor/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "fednlp/tensor/errors.hpp"

namespace fednlp {

AttentionOutput multi_head_attention(Var q, Var k, Var v, std::span<const std::uint8_t> key_mask,
                                     const AttentionShape& shape) {
  const std::size_t B = shape.batch, T = shape.seq_len, H = shape.n_heads, D = shape.head_dim;
  const std::size_t width = H * D;
  for (const Var* x : {&q, &k, &v}) {
    if (x->value().rows() != B * T || x->value().cols() != width) {
      throw DimensionError("multi_head_attention: expected " + std::to_string(B * T) + "x" + std::to_string(width) +
                           " projections, got " + shape_to_string(x->shape()));
    }
  }
  if (key_mask.size() != B * T) throw DimensionError("multi_head_attention: key mask length mismatch");

  const double scale = 1.0 / std::sqrt(static_cast<double>(D));
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  Tensor weights(Shape{B, H, T, T}, 0.0);
  Tensor out(Shape{B * T, width}, 0.0);
  std::vector<double> scores(T);

  for (std::size_t b = 0; b < B; ++b) {
    const std::uint8_t* mask = key_mask.data() + b * T;
    for (std::size_t h = 0; h < H; ++h) {
      double* wbh = weights.values().data() + ((b * H + h) * T) * T;
      for (std::size_t t = 0; t < T; ++t) {
        const double* qrow = qv.values().data() + (b * T + t) * width + h * D;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < T; ++s) {
          if (!mask[s]) continue;
          const double* krow = kv.values().data() + (b * T + s) * width + h * D;
          double dot = 0.0;
          for (std::size_t c = 0; c < D; ++c) dot += qrow[c] * krow[c];
          scores[s] = dot * scale;
          mx = std::max(mx, scores[s]);
        }
        double* prow = wbh + t * T;
        if (mx == -std::numeric_limits<double>::infinity()) continue;  // no real keys
        double total = 0.0;
        for (std::size_t s = 0; s < T; ++s) {
          if (!mask[s]) continue;
          prow[s] = std::exp(scores[s] - mx);
          total += prow[s];
        }
        double* orow = out.values().data() + (b * T + t) * width + h * D;
        for (std::size_t s = 0; s < T; ++s) {
          if (!mask[s]) continue;
          prow[s] /= total;
          const double* vrow = vv.values().data() + (b * T + s) * width + h * D;
          for (std::size_t c = 0; c < D; ++c) orow[c] += prow[s] * vrow[c];
        }
      }
    }
  }

  const NodeId iq = q.id(), ik = k.id(), iv = v.id();
  Tensor saved = weights;
  Var context = q.tape().record(
      std::move(out), {iq, ik, iv},
      [iq, ik, iv, B, T, H, D, width, scale, probs = std::move(saved)](Tape& tape, const Tensor& g) {
        const Tensor& qv = tape.value(iq);
        const Tensor& kv = tape.value(ik);
        const Tensor& vv = tape.value(iv);
        double* dq = tape.requires_grad(iq) ? tape.grad_mut(iq).values().data() : nullptr;
        double* dk = tape.requires_grad(ik) ? tape.grad_mut(ik).values().data() : nullptr;
        double* dv = tape.requires_grad(iv) ? tape.grad_mut(iv).values().data() : nullptr;
        std::vector<double> dp(T);
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t h = 0; h < H; ++h) {
            const double* pbh = probs.values().data() + ((b * H + h) * T) * T;
            for (std::size_t t = 0; t < T; ++t) {
              const double* prow = pbh + t * T;
              const double* gout = g.values().data() + (b * T + t) * width + h * D;
              double weighted = 0.0;
              for (std::size_t s = 0; s < T; ++s) {
                if (prow[s] == 0.0) {
                  dp[s] = 0.0;
                  continue;
                }
                const std::size_t off = (b * T + s) * width + h * D;
                const double* vrow = vv.values().data() + off;
                double dot = 0.0;
                for (std::size_t c = 0; c < D; ++c) dot += gout[c] * vrow[c];
                dp[s] = dot;
                weighted += prow[s] * dot;
                if (dv) {
                  double* dvrow = dv + off;
                  for (std::size_t c = 0; c < D; ++c) dvrow[c] += prow[s] * gout[c];
                }
              }
              const double* qrow = qv.values().data() + (b * T + t) * width + h * D;
              double* dqrow = dq ? dq + (b * T + t) * width + h * D : nullptr;
              for (std::size_t s = 0; s < T; ++s) {
                if (prow[s] == 0.0) continue;
                const double ds = prow[s] * (dp[s] - weighted) * scale;
                const std::size_t off = (b * T + s) * width + h * D;
                if (dqrow) {
                  const double* krow = kv.values().data() + off;
                  for (std::size_t c = 0; c < D; ++c) dqrow[c] += ds * krow[c];
                }
                if (dk) {
                  double* dkrow = dk + off;
                  for (std::size_t c = 0; c < D; ++c) dkrow[c] += ds * qrow[c];
                }
              }
            }
          }
        }
      });
  return AttentionOutput{context, std::move(weights)};
}

}  // namespace fednlp
