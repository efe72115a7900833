#ifndef SLDCNN_MODEL_HPP
#define SLDCNN_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sldcnn/arch.hpp"
#include "sldcnn/layers.hpp"
#include "sldcnn/optimizer.hpp"
#include "sldcnn/rng.hpp"

namespace sldcnn {

using LayerOp = std::variant<ConvLayer, MaxPoolLayer, FCLayer, SoftmaxLayer>;

/// A live layer. Conv and FC layers carry a fused ReLU on their output.
struct Layer {
  LayerSpec spec;
  Shape input_shape;   // per sample
  Shape output_shape;  // per sample
  LayerOp op;
  std::vector<RmsPropState> state;  // one accumulator per entry of parameters()

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
};

struct LayerCache {
  Tensor input;
  Tensor pre_activation;  // conv/fc only
  std::vector<std::size_t> argmax;  // pool only
};

/// Per-layer values kept by the forward pass for the backward pass.
struct ForwardCache {
  std::vector<LayerCache> layers;
  Tensor output;
};

/// Parameter gradients laid out like Layer::parameters(), one entry per layer.
using Gradients = std::vector<std::vector<Tensor>>;

struct BatchResult {
  Real loss = 0;            // contribution to the batch-mean loss
  std::size_t correct = 0;  // argmax hits in this batch
  Gradients grads;
};

struct PhaseEntry {
  std::string phase;
  std::string arch;
  std::size_t epochs = 0;
  bool operator==(const PhaseEntry&) const = default;
};

struct ModelOptions {
  std::uint64_t seed = 1;
  Real gamma = 0.9;
  Real epsilon = 1e-8;
  Real init_scale = 1.0;  // multiplies the +-sqrt(6 / fan_in) init bound
};

class Model {
 public:
  explicit Model(InputGeometry input = {}, ModelOptions options = {});

  /// Appends a freshly initialized layer with zeroed RMSProp state.
  /// Throws ShapeError if the layer cannot consume the current output.
  void add_layer(const LayerSpec& spec);

  /// Drops the trailing layer and its parameters. StateError when empty.
  void remove_layer();

  std::size_t depth() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  const InputGeometry& input() const { return input_; }
  const ModelOptions& options() const { return options_; }

  /// Per-sample output shape of the last layer (the input shape when empty).
  Shape output_shape() const;
  std::vector<LayerSpec> specs() const;
  std::string arch_string() const;
  /// True when the last layer is a softmax head.
  bool trainable() const;
  std::size_t classes() const;
  std::size_t parameter_count() const;

  /// Runs layers [from, depth) on a batch whose per-sample shape matches
  /// layer `from`'s input.
  ForwardCache forward(const Tensor& batch, std::size_t from = 0) const;
  Tensor logits(const Tensor& batch) const;
  std::vector<int> predict(const Tensor& batch) const;

  /// Backpropagates `grad_output` through layers [from, depth).
  /// When `input_grads` is non-null it receives dLoss/d(input of layer i)
  /// for every i >= from (earlier entries stay empty).
  Gradients backward(const ForwardCache& cache, const Tensor& grad_output, std::size_t from = 0,
                     std::vector<Tensor>* input_grads = nullptr) const;

  /// Loss and gradients for one mini-batch. The batch is split into at most
  /// `threads` contiguous shards whose gradients are summed in shard order,
  /// so results are reproducible for a fixed thread count.
  BatchResult batch_gradients(const Tensor& images, std::span<const int> labels,
                              std::size_t threads = 1) const;

  /// RMSProp update of every parameter in layers [from, depth).
  void apply_gradients(const Gradients& grads, Real alpha, std::size_t from = 0);

  Rng& rng() { return rng_; }

  const std::vector<PhaseEntry>& phase_log() const { return phase_log_; }
  void log_phase(PhaseEntry entry) { phase_log_.push_back(std::move(entry)); }

 private:
  InputGeometry input_;
  ModelOptions options_;
  Rng rng_;
  std::vector<Layer> layers_;
  std::vector<PhaseEntry> phase_log_;
};

/// Checkpoint layout (little-endian):
///   "SLCN" | u8 version | u32 len + architecture string | u8 precision tag
///   | u32 height, width, channels
///   | per parameter tensor: u8 rank, u32 extents, f64 values
///   | u32 len + phase log text
void save_checkpoint(const Model& model, const std::filesystem::path& path);

/// Throws FormatError (with byte offset) on a bad or truncated file and
/// IoError when the file cannot be opened.
Model load_checkpoint(const std::filesystem::path& path);

std::string render_phase_log(const std::vector<PhaseEntry>& log);

}  // namespace sldcnn

#endif  // SLDCNN_MODEL_HPP
