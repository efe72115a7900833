#ifndef SLDCNN_TEST_ORACLES_HPP
#define SLDCNN_TEST_ORACLES_HPP

#include <cmath>
#include <functional>
#include <vector>

#include "sldcnn/layers.hpp"

namespace oracle {

using sldcnn::Real;
using sldcnn::Tensor;

// out[b,f,i,j] = bias[f] + sum_{c,u,v} in[b,c,i+u,j+v] * w[f,c,u,v]
inline Tensor conv_direct(const Tensor& in, const Tensor& w, const Tensor& bias) {
  const std::size_t B = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const std::size_t F = w.dim(0), K = w.dim(2);
  const std::size_t Ho = H - K + 1, Wo = W - K + 1;
  Tensor out({B, F, Ho, Wo});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t i = 0; i < Ho; ++i)
        for (std::size_t j = 0; j < Wo; ++j) {
          Real s = bias[f];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t u = 0; u < K; ++u)
              for (std::size_t v = 0; v < K; ++v)
                s += in[((b * C + c) * H + i + u) * W + j + v] * w[((f * C + c) * K + u) * K + v];
          out[((b * F + f) * Ho + i) * Wo + j] = s;
        }
  return out;
}

// Window maxima by explicit scan; windows that do not fit are dropped.
inline Tensor pool_direct(const Tensor& in, std::size_t p, std::size_t s) {
  const std::size_t B = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const std::size_t Ho = (H - p) / s + 1, Wo = (W - p) / s + 1;
  Tensor out({B, C, Ho, Wo});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < Ho; ++i)
        for (std::size_t j = 0; j < Wo; ++j) {
          Real m = -INFINITY;
          for (std::size_t u = 0; u < p; ++u)
            for (std::size_t v = 0; v < p; ++v)
              m = std::max(m, in[((b * C + c) * H + i * s + u) * W + j * s + v]);
          out[((b * C + c) * Ho + i) * Wo + j] = m;
        }
  return out;
}

// Central difference of `loss` with respect to every element of `x`.
inline Tensor numeric_grad(Tensor& x, const std::function<Real()>& loss) {
  Tensor g(x.shape());
  for (std::size_t e = 0; e < x.size(); ++e) {
    const Real saved = x[e];
    const Real h = 1e-5 * std::max(Real{1}, std::abs(saved));
    x[e] = saved + h;
    const Real lp = loss();
    x[e] = saved - h;
    const Real lm = loss();
    x[e] = saved;
    g[e] = (lp - lm) / (2 * h);
  }
  return g;
}

inline Real max_rel_error(const Tensor& a, const Tensor& n) {
  Real worst = 0;
  for (std::size_t e = 0; e < a.size(); ++e) {
    const Real denom = std::max({std::abs(a[e]), std::abs(n[e]), Real{1e-7}});
    worst = std::max(worst, std::abs(a[e] - n[e]) / denom);
  }
  return worst;
}

// Fixed random projection turning a tensor into a scalar loss.
inline Real project(const Tensor& y, const Tensor& weights) {
  Real s = 0;
  for (std::size_t e = 0; e < y.size(); ++e) s += y[e] * weights[e];
  return s;
}

}  // namespace oracle

#endif
