#include "sldcnn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sldcnn/error.hpp"

namespace sldcnn {

std::size_t conv_extent(std::size_t n, std::size_t k) { return n >= k ? n - k + 1 : 0; }

std::size_t pool_extent(std::size_t n, std::size_t p, std::size_t s) {
  if (n < p || s == 0) return 0;
  return (n - p) / s + 1;
}

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                     ", got " + shape_string(t.shape()));
  }
}

void check_conv_params(const ConvLayer& layer) {
  require_rank(layer.weights, 4, "conv weights");
  if (layer.weights.dim(2) != layer.weights.dim(3)) throw ShapeError("conv kernel must be square");
  if (layer.biases.shape() != Shape{layer.filters()}) throw ShapeError("conv bias shape");
}

Shape conv_out_shape(const Tensor& input, const ConvLayer& layer) {
  require_rank(input, 4, "conv input");
  check_conv_params(layer);
  if (input.dim(1) != layer.channels()) {
    throw ShapeError("conv: input has " + std::to_string(input.dim(1)) + " channels, layer expects " +
                     std::to_string(layer.channels()));
  }
  const std::size_t k = layer.kernel();
  const std::size_t ho = conv_extent(input.dim(2), k), wo = conv_extent(input.dim(3), k);
  if (ho == 0 || wo == 0) {
    throw ShapeError("conv: spatial extent " + shape_string(input.shape()) +
                     " smaller than kernel " + std::to_string(k));
  }
  return {input.dim(0), layer.filters(), ho, wo};
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& biases,
                     const char* what) {
  require_rank(input, 2, what);
  const std::size_t batch = input.dim(0), in = input.dim(1), out = weights.dim(0);
  if (weights.dim(1) != in) {
    throw ShapeError(std::string(what) + ": input width " + std::to_string(in) +
                     " does not match layer width " + std::to_string(weights.dim(1)));
  }
  Tensor result({batch, out});
  for (std::size_t b = 0; b < batch; ++b) {
    const Real* x = input.data() + b * in;
    Real* y = result.data() + b * out;
    for (std::size_t o = 0; o < out; ++o) {
      const Real* w = weights.data() + o * in;
      Real acc = biases[o];
      for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
      y[o] = acc;
    }
  }
  return result;
}

ParamGrads dense_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weights,
                          const char* what) {
  require_rank(grad_out, 2, what);
  require_rank(input, 2, what);
  const std::size_t batch = input.dim(0), in = input.dim(1), out = weights.dim(0);
  if (grad_out.shape() != Shape{batch, out}) {
    throw ShapeError(std::string(what) + ": gradient shape " + shape_string(grad_out.shape()) +
                     " does not match forward output");
  }
  ParamGrads g{Tensor(input.shape()), Tensor(weights.shape()), Tensor({out})};
  for (std::size_t b = 0; b < batch; ++b) {
    const Real* x = input.data() + b * in;
    const Real* dy = grad_out.data() + b * out;
    Real* dx = g.input.data() + b * in;
    for (std::size_t o = 0; o < out; ++o) {
      const Real d = dy[o];
      if (d == 0) continue;
      const Real* w = weights.data() + o * in;
      Real* dw = g.weights.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        dw[i] += d * x[i];
        dx[i] += d * w[i];
      }
      g.biases[o] += d;
    }
  }
  return g;
}

}  // namespace

Tensor conv_forward(const Tensor& input, const ConvLayer& layer) {
  const Shape out_shape = conv_out_shape(input, layer);
  const std::size_t batch = out_shape[0], filters = out_shape[1];
  const std::size_t ho = out_shape[2], wo = out_shape[3];
  const std::size_t channels = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t k = layer.kernel();

  Tensor out(out_shape);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t f = 0; f < filters; ++f) {
      Real* plane = out.data() + (b * filters + f) * ho * wo;
      std::fill(plane, plane + ho * wo, layer.biases[f]);
      for (std::size_t c = 0; c < channels; ++c) {
        const Real* src = input.data() + (b * channels + c) * h * w;
        const Real* kern = layer.weights.data() + (f * channels + c) * k * k;
        for (std::size_t u = 0; u < k; ++u) {
          for (std::size_t v = 0; v < k; ++v) {
            const Real wt = kern[u * k + v];
            for (std::size_t i = 0; i < ho; ++i) {
              const Real* row = src + (i + u) * w + v;
              Real* dst = plane + i * wo;
              for (std::size_t j = 0; j < wo; ++j) dst[j] += wt * row[j];
            }
          }
        }
      }
    }
  }
  return out;
}

ParamGrads conv_backward(const Tensor& grad_out, const Tensor& input, const ConvLayer& layer) {
  const Shape out_shape = conv_out_shape(input, layer);
  if (grad_out.shape() != out_shape) {
    throw ShapeError("conv_backward: gradient shape " + shape_string(grad_out.shape()) +
                     " does not match forward output " + shape_string(out_shape));
  }
  const std::size_t batch = out_shape[0], filters = out_shape[1];
  const std::size_t ho = out_shape[2], wo = out_shape[3];
  const std::size_t channels = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t k = layer.kernel();

  ParamGrads g{Tensor(input.shape()), Tensor(layer.weights.shape()), Tensor(layer.biases.shape())};
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t f = 0; f < filters; ++f) {
      const Real* dy = grad_out.data() + (b * filters + f) * ho * wo;
      Real bias_acc = 0;
      for (std::size_t i = 0; i < ho * wo; ++i) bias_acc += dy[i];
      g.biases[f] += bias_acc;
      for (std::size_t c = 0; c < channels; ++c) {
        const Real* src = input.data() + (b * channels + c) * h * w;
        Real* dsrc = g.input.data() + (b * channels + c) * h * w;
        const Real* kern = layer.weights.data() + (f * channels + c) * k * k;
        Real* dkern = g.weights.data() + (f * channels + c) * k * k;
        for (std::size_t u = 0; u < k; ++u) {
          for (std::size_t v = 0; v < k; ++v) {
            const Real wt = kern[u * k + v];
            Real acc = 0;
            for (std::size_t i = 0; i < ho; ++i) {
              const Real* row = src + (i + u) * w + v;
              Real* drow = dsrc + (i + u) * w + v;
              const Real* dyrow = dy + i * wo;
              for (std::size_t j = 0; j < wo; ++j) {
                acc += dyrow[j] * row[j];
                drow[j] += dyrow[j] * wt;
              }
            }
            dkern[u * k + v] += acc;
          }
        }
      }
    }
  }
  return g;
}

PoolResult maxpool_forward(const Tensor& input, const MaxPoolLayer& layer) {
  require_rank(input, 4, "maxpool input");
  const std::size_t p = layer.pool, s = layer.stride;
  if (p == 0 || s == 0) throw ShapeError("maxpool: pool and stride must be >= 1");
  const std::size_t batch = input.dim(0), chans = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t ho = pool_extent(h, p, s), wo = pool_extent(w, p, s);
  if (ho == 0 || wo == 0) {
    throw ShapeError("maxpool: spatial extent " + shape_string(input.shape()) +
                     " smaller than pool " + std::to_string(p));
  }
  PoolResult r{Tensor({batch, chans, ho, wo}), std::vector<std::size_t>(batch * chans * ho * wo)};
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < batch * chans; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j, ++o) {
        std::size_t best = base + i * s * w + j * s;
        Real best_val = input[best];
        for (std::size_t u = 0; u < p; ++u) {
          for (std::size_t v = 0; v < p; ++v) {
            const std::size_t idx = base + (i * s + u) * w + (j * s + v);
            if (input[idx] > best_val) {
              best_val = input[idx];
              best = idx;
            }
          }
        }
        r.output[o] = best_val;
        r.argmax[o] = best;
      }
    }
  }
  return r;
}

Tensor maxpool_backward(const Tensor& grad_out, std::span<const std::size_t> argmax,
                        const Shape& input_shape) {
  if (argmax.size() != grad_out.size()) {
    throw ShapeError("maxpool_backward: " + std::to_string(argmax.size()) + " indices for " +
                     std::to_string(grad_out.size()) + " gradients");
  }
  Tensor g(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) {
    if (argmax[o] >= g.size()) {
      throw InternalError("maxpool_backward: argmax index " + std::to_string(argmax[o]) +
                          " outside input of size " + std::to_string(g.size()));
    }
    g[argmax[o]] += grad_out[o];
  }
  return g;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (Real& v : out.values()) {
    if (!std::isfinite(v)) throw NumericError("relu: non-finite activation");
    v = v > 0 ? v : Real{0};
  }
  return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& input) {
  if (grad_out.shape() != input.shape()) {
    throw ShapeError("relu_backward: shape mismatch " + shape_string(grad_out.shape()) + " vs " +
                     shape_string(input.shape()));
  }
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(input[i] > 0)) g[i] = 0;
  }
  return g;
}

Tensor fc_forward(const Tensor& input, const FCLayer& layer) {
  return dense_forward(input, layer.weights, layer.biases, "fc");
}

ParamGrads fc_backward(const Tensor& grad_out, const Tensor& input, const FCLayer& layer) {
  return dense_backward(grad_out, input, layer.weights, "fc_backward");
}

Tensor softmax_logits(const Tensor& input, const SoftmaxLayer& layer) {
  return dense_forward(input, layer.weights, layer.biases, "softmax");
}

ParamGrads softmax_logits_backward(const Tensor& grad_out, const Tensor& input,
                                   const SoftmaxLayer& layer) {
  return dense_backward(grad_out, input, layer.weights, "softmax_backward");
}

SoftmaxResult softmax_xent(const Tensor& logits, std::span<const int> labels,
                           std::size_t normalizer) {
  require_rank(logits, 2, "softmax_xent");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw ShapeError("softmax_xent: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(batch));
  }
  const Real denom = static_cast<Real>(normalizer ? normalizer : batch);
  SoftmaxResult r{0, Tensor(logits.shape()), Tensor(logits.shape())};
  Real total = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw LabelError("softmax_xent: label " + std::to_string(label) + " outside [0," +
                       std::to_string(classes) + ")");
    }
    const Real* z = logits.data() + b * classes;
    Real* p = r.probs.data() + b * classes;
    const Real zmax = *std::max_element(z, z + classes);
    Real norm = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      p[k] = std::exp(z[k] - zmax);
      norm += p[k];
    }
    for (std::size_t k = 0; k < classes; ++k) p[k] /= norm;
    // log-sum-exp form keeps the loss finite when p[label] underflows
    total += std::log(norm) - (z[label] - zmax);
    Real* g = r.grad_logits.data() + b * classes;
    for (std::size_t k = 0; k < classes; ++k) g[k] = p[k] / denom;
    g[label] -= Real{1} / denom;
  }
  r.loss = total / denom;
  if (!std::isfinite(r.loss)) throw NumericError("softmax_xent: non-finite loss");
  return r;
}

}  // namespace sldcnn
