#ifndef SLDCNN_ARCH_HPP
#define SLDCNN_ARCH_HPP

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "sldcnn/tensor.hpp"

namespace sldcnn {

enum class LayerKind { kConv, kPool, kFC, kSoftmax };

const char* layer_kind_name(LayerKind kind);

/// One token of the architecture notation:
///   xCy  conv, x filters of y*y      xPy  pool, x*x window, stride y
///   xFC  fully connected, x units    xSM  softmax output, x classes
struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  std::size_t first = 1;   // filters | pool size | units | classes
  std::size_t second = 0;  // kernel | stride | unused

  static LayerSpec conv(std::size_t filters, std::size_t kernel) {
    return {LayerKind::kConv, filters, kernel};
  }
  static LayerSpec pool(std::size_t size, std::size_t stride) {
    return {LayerKind::kPool, size, stride};
  }
  static LayerSpec fc(std::size_t units) { return {LayerKind::kFC, units, 0}; }
  static LayerSpec softmax(std::size_t classes) { return {LayerKind::kSoftmax, classes, 0}; }

  std::string render() const;
  bool operator==(const LayerSpec&) const = default;
};

struct InputGeometry {
  std::size_t height = 70;
  std::size_t width = 70;
  std::size_t channels = 1;

  Shape shape() const { return {channels, height, width}; }
  bool operator==(const InputGeometry&) const = default;
};

struct ArchSpec {
  std::vector<LayerSpec> layers;
  InputGeometry input;

  std::string render() const;
};

/// Parses "64C4-4P2-...-1500FC-171SM". Case-sensitive, no whitespace.
/// Throws ParseError naming the 1-based token position on any violation,
/// including a missing or misplaced softmax head.
std::vector<LayerSpec> parse_arch(std::string_view text);

std::string render_layers(const std::vector<LayerSpec>& layers);

/// Per-sample output shape after applying `spec` to `in`
/// ([C,H,W] for conv/pool, [units] for dense layers). Throws ShapeError.
Shape layer_output_shape(const Shape& in, const LayerSpec& spec);

/// Output shape of every layer in order. Throws ShapeError naming the
/// first layer whose output would be empty.
std::vector<Shape> infer_shapes(const ArchSpec& spec);

ArchSpec make_arch(std::string_view text, InputGeometry input = {});

/// A stage of layerwise construction: the feature layers of one block
/// (a run of conv layers closed by a pool layer).
struct ArchBlocks {
  std::vector<std::vector<LayerSpec>> blocks;
  std::vector<LayerSpec> head;  // FC layers and the softmax output
};

/// Splits an architecture into conv/pool blocks and the dense head.
/// Throws ConfigError when no block contains a convolution.
ArchBlocks split_blocks(const std::vector<LayerSpec>& layers);

}  // namespace sldcnn

#endif  // SLDCNN_ARCH_HPP
