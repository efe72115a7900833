#ifndef SLDCNN_LAYERS_HPP
#define SLDCNN_LAYERS_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "sldcnn/tensor.hpp"

namespace sldcnn {

// Layer kernels. Activations are batched: convolution and pooling work on
// [B, C, H, W], dense layers on [B, features]. Every backward pass is written
// by hand against its forward map.

/// Valid (unpadded) stride-1 convolution.
struct ConvLayer {
  Tensor weights;  // [F, C, k, k]
  Tensor biases;   // [F]

  std::size_t filters() const { return weights.dim(0); }
  std::size_t channels() const { return weights.dim(1); }
  std::size_t kernel() const { return weights.dim(2); }
};

/// p x p max pooling with stride s; windows may overlap.
struct MaxPoolLayer {
  std::size_t pool = 2;
  std::size_t stride = 2;
};

struct FCLayer {
  Tensor weights;  // [out, in]
  Tensor biases;   // [out]
};

/// Affine map to class scores; the softmax itself lives in softmax_xent.
struct SoftmaxLayer {
  Tensor weights;  // [classes, in]
  Tensor biases;   // [classes]
};

struct ParamGrads {
  Tensor input;
  Tensor weights;
  Tensor biases;
};

struct PoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat index into the input, one per output element
};

struct SoftmaxResult {
  Real loss = 0;
  Tensor probs;
  Tensor grad_logits;
};

/// n - k + 1, or 0 when the kernel does not fit.
std::size_t conv_extent(std::size_t n, std::size_t k);
/// floor((n - p) / s) + 1, or 0 when the window does not fit.
std::size_t pool_extent(std::size_t n, std::size_t p, std::size_t s);

Tensor conv_forward(const Tensor& input, const ConvLayer& layer);
ParamGrads conv_backward(const Tensor& grad_out, const Tensor& input, const ConvLayer& layer);

/// Ties resolve to the first maximum in row-major window order.
PoolResult maxpool_forward(const Tensor& input, const MaxPoolLayer& layer);
Tensor maxpool_backward(const Tensor& grad_out, std::span<const std::size_t> argmax,
                        const Shape& input_shape);

Tensor relu(const Tensor& input);
/// Passes gradient where input > 0; zero at input == 0.
Tensor relu_backward(const Tensor& grad_out, const Tensor& input);

Tensor fc_forward(const Tensor& input, const FCLayer& layer);
ParamGrads fc_backward(const Tensor& grad_out, const Tensor& input, const FCLayer& layer);

Tensor softmax_logits(const Tensor& input, const SoftmaxLayer& layer);
ParamGrads softmax_logits_backward(const Tensor& grad_out, const Tensor& input,
                                   const SoftmaxLayer& layer);

/// Max-shifted softmax with mean cross-entropy over the batch.
///
/// `normalizer` replaces the batch size as the divisor of both loss and
/// gradient; a mini-batch split into shards passes the full batch size so
/// that shard contributions sum to the batch mean. Zero means "use B".
SoftmaxResult softmax_xent(const Tensor& logits, std::span<const int> labels,
                           std::size_t normalizer = 0);

}  // namespace sldcnn

#endif  // SLDCNN_LAYERS_HPP
